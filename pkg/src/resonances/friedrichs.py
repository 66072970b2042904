"""Closed-form single-level model with constant coupling: the oracle.

The external channel is multiplication on (0, a), the internal space is one
dimensional with level lambda1, and the coupling is a constant beta. The
self-energy is an explicit logarithm, so resonances, bound states, and their
asymptotics are available independently of any contour quadrature. This
module cross-validates the whole pipeline.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NonconvergenceError, UnsupportedModelError
from .model import SpectralModel, spectral_norm

_BRENT_RTOL = 4.0 * float(np.finfo(float).eps)  # smallest rtol brentq accepts


@dataclass(frozen=True)
class FriedrichsParams:
    """Interval length a, internal level lambda1, coupling beta, sheet nu."""

    a: float
    lambda1: float
    beta: float
    nu: int = 0

    def __post_init__(self):
        if not (self.a > 0.0):
            raise DomainError("interval length a must be positive")
        if not (self.beta > 0.0):
            raise DomainError("coupling beta must be positive")

    def with_sheet(self, nu: int) -> "FriedrichsParams":
        return FriedrichsParams(self.a, self.lambda1, self.beta, int(nu))


def self_energy_closed(params: FriedrichsParams, z: complex) -> complex:
    """Closed-form self-energy on sheet nu.

    The branch is the principal logarithm difference, which is real for
    real z > a (physical-sheet calibration); sheet nu adds 2*pi*i*nu times
    the squared coupling.
    """
    z = complex(z)
    if z == 0.0 or z == params.a:
        raise DomainError(f"z={z} is a branch point")
    b2 = params.beta ** 2
    return b2 * (cmath.log(z) - cmath.log(z - params.a) + 2j * math.pi * params.nu)


def transfer_closed(params: FriedrichsParams, z: complex) -> complex:
    """Scalar transfer function lambda1 - z + self-energy on sheet nu."""
    return params.lambda1 - complex(z) + self_energy_closed(params, z)


def _transfer_derivative(params: FriedrichsParams, z: complex) -> complex:
    b2 = params.beta ** 2
    return -1.0 + b2 * (1.0 / z - 1.0 / (z - params.a))


@dataclass(frozen=True)
class ResonanceRoot:
    z: complex
    residual: float
    iterations: int
    angle_residual: float | None
    trajectory: tuple[complex, ...]


def symmetric_angle_root(beta_tilde_sq: float, nu: int, tol: float = 1e-14) -> float | None:
    """Root of tan(phi) = bt2*(phi - pi/2 + pi*nu) on [0, pi/2), if any.

    For the symmetric model (a = 2R, lambda1 = R) each root corresponds to a
    resonance R*(1 + i*tan(phi)) on the upper half of sheet nu. A sign scan
    plus bisection; returns None when no sign change exists (all nu <= 0).
    """
    def g(phi: float) -> float:
        return math.tan(phi) - beta_tilde_sq * (phi - math.pi / 2.0 + math.pi * nu)

    lo, hi = 0.0, math.pi / 2.0 - 1e-9
    while g(hi) < 0.0:
        hi = 0.5 * (hi + math.pi / 2.0)
        if math.pi / 2.0 - hi < 1e-15:
            return None
    if g(lo) > 0.0:
        # scan for an interior sign change before giving up
        grid = np.linspace(lo, hi, 1001)
        vals = [g(p) for p in grid]
        for p0, p1, v0, v1 in zip(grid[:-1], grid[1:], vals[:-1], vals[1:]):
            if v0 <= 0.0 <= v1 or v1 <= 0.0 <= v0:
                lo, hi = p0, p1
                break
        else:
            return None
    return float(brentq(g, lo, hi, xtol=tol, rtol=_BRENT_RTOL, maxiter=300))


def resonance_root(params: FriedrichsParams, tol: float = 1e-12,
                   max_steps: int = 100) -> ResonanceRoot:
    """Newton root of the sheet-nu transfer function (nu != 0 required).

    Started at lambda1 plus a small displacement into the half plane of the
    sheet index. In the symmetric case (a = 2*lambda1) the root is checked
    against the independent tangent equation for the argument angle.
    """
    if params.nu == 0:
        raise DomainError("resonance_root requires a nonzero sheet index")
    z = complex(params.lambda1, math.copysign(params.a / 10.0, params.nu))
    trajectory = [z]
    for it in range(1, max_steps + 1):
        f = transfer_closed(params, z)
        if abs(f) <= tol:
            break
        df = _transfer_derivative(params, z)
        if df == 0.0:
            raise NonconvergenceError("Newton derivative vanished", trajectory)
        z = z - f / df
        trajectory.append(z)
    else:
        raise NonconvergenceError(
            f"Newton did not reach |f| <= {tol} in {max_steps} steps", trajectory)

    angle_residual = None
    if abs(params.a - 2.0 * params.lambda1) <= 1e-12 * params.a:
        r = params.lambda1
        bt2 = 2.0 * params.beta ** 2 / r
        phi = math.atan2(abs(z.imag), r)
        angle_residual = abs(math.tan(phi)
                             - bt2 * (phi - math.pi / 2.0 + math.pi * abs(params.nu)))
    return ResonanceRoot(z, abs(transfer_closed(params, z)), it, angle_residual,
                         tuple(trajectory))


@dataclass(frozen=True)
class BoundStates:
    """Physical-sheet roots below zero and above a.

    ``za_offset`` stores the distance of the upper root from the endpoint a
    to full relative precision; the root equation near a is ill conditioned
    in the absolute coordinate, so the residual is evaluated through the
    offset parametrization.
    """

    z0: float
    za: float
    za_offset: float
    residual0: float
    residual_a: float

    def z0_asymptote(self, params: FriedrichsParams) -> float:
        return -params.a * math.exp(-params.lambda1 / params.beta ** 2)

    def za_asymptote(self, params: FriedrichsParams) -> float:
        return params.a * (1.0 + math.exp(-(params.a - params.lambda1) / params.beta ** 2))

    def za_gap_asymptote(self, params: FriedrichsParams) -> float:
        return params.a * math.exp(-(params.a - params.lambda1) / params.beta ** 2)


def _physical_transfer_real(params: FriedrichsParams, x: float) -> float:
    b2 = params.beta ** 2
    return params.lambda1 - x + b2 * (math.log(abs(x)) - math.log(abs(x - params.a)))


def bound_states(params: FriedrichsParams, ftol: float = 1e-12) -> BoundStates:
    """The two physical-sheet roots: one below zero, one above a.

    Requires the internal level inside (0, a), where both endpoint integrals
    of the constant coupling diverge and therefore both roots exist. The
    lower root is bisected in place; the upper root is bisected in the
    offset coordinate t = z - a, which keeps the residual resolvable when
    the root sits exponentially close to the endpoint.
    """
    a, lam, b2 = params.a, params.lambda1, params.beta ** 2
    if not (0.0 < lam < a):
        raise DomainError("bound states require lambda1 inside (0, a)")

    f = lambda x: _physical_transfer_real(params, x)

    lo = -a * math.exp(min(lam / b2, 600.0)) - 1.0
    hi = -a * math.exp(-min(lam / b2, 600.0)) * 1e-6
    if f(hi) > 0.0:
        hi = -1e-300
    z0 = float(brentq(f, lo, hi, xtol=1e-300, rtol=_BRENT_RTOL, maxiter=600))
    for _ in range(4):
        if abs(f(z0)) <= ftol:
            break
        z0 -= f(z0) / (-1.0 + b2 * (1.0 / z0 - 1.0 / (z0 - a)))

    def g(t: float) -> float:
        return lam - a - t + b2 * (math.log(a + t) - math.log(t))

    t_est = a * math.exp(-min((a - lam) / b2, 600.0))
    t_lo = max(t_est * 1e-6, 5e-324)
    t_hi = a
    while g(t_hi) > 0.0:
        t_hi *= 2.0
        if t_hi > 1e30:
            raise NonconvergenceError("could not bracket the upper bound state", (t_hi,))
    t = float(brentq(g, t_lo, t_hi, xtol=1e-300, rtol=_BRENT_RTOL, maxiter=600))
    for _ in range(8):
        if abs(g(t)) <= ftol:
            break
        t -= g(t) / (-1.0 + b2 * (1.0 / (a + t) - 1.0 / t))
    return BoundStates(z0, a + t, t, abs(f(z0)), abs(g(t)))


@dataclass(frozen=True)
class OutsideSpectrumReport:
    """Endpoint-integral hypothesis check plus a determinant root scan."""

    status: str  # "holds" | "violated" | "indeterminate"
    v1_at_zero: float | None
    v1_at_a: float | None
    lambda_min: float
    lambda_max: float
    roots_below: int
    roots_above: int

    @property
    def consistent(self) -> bool:
        if self.status != "holds":
            return True
        return self.roots_below == 0 and self.roots_above == 0


def _quadratic_form_matrix(model: SpectralModel, weight, panels: int = 64,
                           points: int = 16) -> np.ndarray:
    """Composite Gauss-Legendre integral of weight(mu)*density(mu) on (0, a)."""
    iv = model.intervals[0]
    x, w = np.polynomial.legendre.leggauss(points)
    edges = np.linspace(iv.lo, iv.hi, panels + 1)
    out = np.zeros((model.dim, model.dim), dtype=complex)
    for a_, b_ in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (a_ + b_), 0.5 * (b_ - a_)
        for xi, wi in zip(x, w):
            mu = mid + half * xi
            out += (half * wi * weight(mu)) * model.coupling(mu)
    return out


def no_spectrum_outside(model: SpectralModel, grid: int = 4001) -> OutsideSpectrumReport:
    """Check the endpoint-integral hypothesis that confines the spectrum.

    Evaluates the largest eigenvalues of the two endpoint-weighted coupling
    integrals, compares them with the extreme internal levels, and scans the
    physical transfer determinant for sign changes below 0 and above a as a
    consistency check. If the coupling does not vanish at an endpoint the
    corresponding integral diverges and the result is indeterminate.
    """
    if model.m != 1 or not model.intervals[0].bounded or model.intervals[0].lo != 0.0:
        raise UnsupportedModelError("requires a single bounded interval (0, a)")
    if model.discrete:
        raise UnsupportedModelError("requires an empty discrete remainder")
    iv = model.intervals[0]
    a = iv.hi
    lam = np.linalg.eigvalsh(0.5 * (model.a1 + model.a1.conj().T))
    lam_min, lam_max = float(lam[0]), float(lam[-1])

    k0 = spectral_norm(model.coupling(0.0))
    ka = spectral_norm(model.coupling(a))
    scale = 1.0 + max(spectral_norm(model.coupling(x)) for x in np.linspace(0.1 * a, 0.9 * a, 9))
    finite0 = k0 <= 1e-12 * scale
    finitea = ka <= 1e-12 * scale

    v1_0 = None
    v1_a = None
    if finite0:
        m0 = _quadratic_form_matrix(model, lambda mu: 1.0 / mu)
        v1_0 = float(np.linalg.eigvalsh(0.5 * (m0 + m0.conj().T))[-1])
    if finitea:
        ma = _quadratic_form_matrix(model, lambda mu: 1.0 / (a - mu))
        v1_a = float(np.linalg.eigvalsh(0.5 * (ma + ma.conj().T))[-1])

    if not (finite0 and finitea):
        status = "indeterminate"
    elif v1_0 < lam_min and v1_a < a - lam_max:
        status = "holds"
    else:
        status = "violated"

    # determinant sign scan outside [0, a] on the physical sheet; the node
    # density values are precomputed once and reused for every scan point
    points = 16
    panels = 96
    x_gl, w_gl = np.polynomial.legendre.leggauss(points)
    edges = np.linspace(0.0, a, panels + 1)
    mids = 0.5 * (edges[:-1] + edges[1:])
    halves = 0.5 * (edges[1:] - edges[:-1])
    mus = (mids[:, None] + halves[:, None] * x_gl[None, :]).reshape(-1)
    ws = (halves[:, None] * w_gl[None, :]).reshape(-1)
    stack = np.stack([model.coupling(mu) for mu in mus])

    def det_at(x: float) -> float:
        se = np.einsum("q,qij->ij", ws / (x - mus), stack)
        m = model.a1 - x * np.eye(model.dim) + se
        return float(np.linalg.det(0.5 * (m + m.conj().T)).real)

    span = max(a, abs(lam_min), abs(lam_max)) * 4.0 + a
    below = np.linspace(-span, -1e-9 * a, max(grid // 20, 100))
    above = np.linspace(a + 1e-9 * a, a + span, max(grid // 20, 100))
    roots_below = _sign_changes([det_at(x) for x in below])
    roots_above = _sign_changes([det_at(x) for x in above])
    return OutsideSpectrumReport(status, v1_0, v1_a, lam_min, lam_max,
                                 roots_below, roots_above)


def _sign_changes(vals) -> int:
    count = 0
    prev = None
    for v in vals:
        s = math.copysign(1.0, v) if v != 0.0 else 0.0
        if prev is not None and s != 0.0 and prev != 0.0 and s != prev:
            count += 1
        if s != 0.0:
            prev = s
    return count


def friedrichs_model(r: float = 1.0, beta: float | None = None,
                     beta_sq: float | None = None, strip: float | None = None) -> SpectralModel:
    """The symmetric single-level model: interval (0, 2R), level R, constant beta."""
    from .model import CouplingFunction, Interval

    if beta is None:
        if beta_sq is None:
            raise DomainError("provide beta or beta_sq")
        beta = math.sqrt(beta_sq)
    strip = strip if strip is not None else 4.0 * r
    coupling = CouplingFunction.constant_vector([beta])
    return SpectralModel(np.array([[r]]), [Interval(0.0, 2.0 * r, strip)], (), coupling)


def params_from_model(model: SpectralModel, nu: int = 0) -> FriedrichsParams:
    """Extract closed-form parameters from a single-level constant model."""
    if model.dim != 1 or model.m != 1 or model.discrete:
        raise UnsupportedModelError("oracle requires n=1, one interval, no remainder")
    if model.coupling.kind != "constant-vector":
        raise UnsupportedModelError("oracle requires the constant-vector coupling")
    iv = model.intervals[0]
    if not iv.bounded or iv.lo != 0.0:
        raise UnsupportedModelError("oracle requires the interval (0, a)")
    beta = float(abs(model.coupling.row[0]))
    return FriedrichsParams(iv.hi, float(model.a1[0, 0].real), beta, nu)
