"""Contraction solver for the nonlinear operator fixed-point equation.

The correction X solves X = F(X) where F applies the self-energy integral to
the shifted internal matrix. Under an admissible certificate F contracts
every ball between the two certified radii, the iteration starts at zero,
and the standard a-posteriori bound controls the distance to the true fixed
point at termination.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .contour import (
    Contour,
    SolvabilityCertificate,
    is_mirror_pair,
    solvability_certificate,
)
from .errors import (
    ContractionViolationError,
    IdentityFailureError,
    InadmissibleCertificateError,
    NonconvergenceError,
    PairingError,
    ResolventSingularityError,
)
from .model import SpectralModel, spectral_norm
from .transfer import _kprime_stack

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
_RATIO_SLACK = 1e-6


def self_energy_of_operator(model: SpectralModel, contour: Contour,
                            y: np.ndarray, debug: bool = False) -> np.ndarray:
    """Self-energy applied to an operator argument.

    Sums the coupling data against the resolvent of ``y`` at every discrete
    point and quadrature node, in fixed node order. On an eigenvector of
    ``y`` this action reduces to the scalar self-energy at the eigenvalue.
    With ``debug=True`` the norm estimate against the variation times the
    largest resolvent norm is asserted.
    """
    y = np.asarray(y, dtype=complex)
    n = model.dim
    eye = np.eye(n)
    out = np.zeros((n, n), dtype=complex)
    max_resolvent = 0.0
    for p in model.discrete:
        shifted = y - p.nu * eye
        try:
            inv = np.linalg.inv(shifted)
        except np.linalg.LinAlgError as exc:
            raise ResolventSingularityError(p.nu) from exc
        out += p.weight @ inv
        if debug:
            max_resolvent = max(max_resolvent, spectral_norm(inv))
    stack = _kprime_stack(model, contour)
    for q, mu in enumerate(contour.nodes):
        shifted = y - mu * eye
        try:
            inv = np.linalg.inv(shifted)
        except np.linalg.LinAlgError as exc:
            raise ResolventSingularityError(mu) from exc
        out += contour.weights[q] * (stack[q] @ inv)
        if debug:
            max_resolvent = max(max_resolvent, spectral_norm(inv))
    if debug:
        from .contour import variation

        bound = variation(model, contour) * max_resolvent
        if spectral_norm(out) > bound * (1.0 + 1e-9) + 1e-300:
            raise IdentityFailureError(
                f"self-energy norm {spectral_norm(out):.3e} exceeds its bound {bound:.3e}")
    return out


def adjoint_self_energy_of_operator(model: SpectralModel, contour: Contour,
                                    y: np.ndarray) -> np.ndarray:
    """Left-resolvent variant: integrates resolvent times coupling data."""
    y = np.asarray(y, dtype=complex)
    n = model.dim
    eye = np.eye(n)
    out = np.zeros((n, n), dtype=complex)
    for p in model.discrete:
        try:
            inv = np.linalg.inv(y - p.nu * eye)
        except np.linalg.LinAlgError as exc:
            raise ResolventSingularityError(p.nu) from exc
        out += inv @ p.weight
    stack = _kprime_stack(model, contour)
    for q, mu in enumerate(contour.nodes):
        try:
            inv = np.linalg.inv(y - mu * eye)
        except np.linalg.LinAlgError as exc:
            raise ResolventSingularityError(mu) from exc
        out += contour.weights[q] * (inv @ stack[q])
    return out


@dataclass(frozen=True, eq=False)
class Solution:
    """Fixed point of the contraction map with its diagnostics."""

    multi_index: tuple[int, ...]
    correction: np.ndarray          # X
    effective: np.ndarray           # internal matrix plus X
    iterations: int
    last_step_norm: float
    a_posteriori_bound: float
    certificate: SolvabilityCertificate
    contour: Contour
    step_norms: tuple[float, ...]
    fixed_point_residual: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)


def _iterate(model: SpectralModel, contour: Contour, cert, q: float,
             tol: float, max_iter: int, r_escape: float | None,
             stop_abs: float | None = None, x0: np.ndarray | None = None):
    n = model.dim
    a1 = model.a1
    x = np.zeros((n, n), dtype=complex) if x0 is None else np.asarray(x0, dtype=complex)
    scale = spectral_norm(a1) + 1.0
    floor = 10.0 * np.finfo(float).eps * scale
    threshold = stop_abs if stop_abs is not None else (
        math.inf if q == 0.0 else tol * (1.0 - q) / q)
    steps: list[float] = []
    prev_step = None
    for it in range(1, max_iter + 1):
        x_next = self_energy_of_operator(model, contour, a1 + x)
        step = spectral_norm(x_next - x)
        steps.append(step)
        x_norm = spectral_norm(x_next)
        if r_escape is not None and x_norm > r_escape * (1.0 + 1e-12):
            raise ContractionViolationError(
                f"iterate norm {x_norm:.6e} escaped the certified ball "
                f"of radius {r_escape:.6e} at iteration {it}")
        if prev_step is not None and prev_step > floor and step > floor:
            if q > 0.0 and step > q * prev_step * (1.0 + _RATIO_SLACK):
                raise ContractionViolationError(
                    f"empirical step ratio {step / prev_step:.6e} exceeds the "
                    f"certified contraction factor {q:.6e} at iteration {it}")
        x = x_next
        if step <= threshold:
            return x, it, step, steps
        prev_step = step
    raise NonconvergenceError(
        f"no convergence within {max_iter} iterations "
        f"(last step {steps[-1]:.3e}, threshold {threshold:.3e})", steps)


def solve_fixed_point(model: SpectralModel, contour: Contour,
                      tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> Solution:
    """Solve the fixed-point equation by plain iteration from zero.

    Requires an admissible certificate; refuses otherwise with the
    certificate attached. Stops when the step norm guarantees an a-posteriori
    error at most ``tol``; the geometric decay of the step norms is checked
    against the certified contraction factor on every iteration, and an
    iterate escaping the larger certified ball aborts the solve.
    """
    cert = solvability_certificate(model, contour)
    if not cert.admissible:
        raise InadmissibleCertificateError(cert)
    q = cert.contraction_factor()
    x, iterations, last_step, steps = _iterate(
        model, contour, cert, q, tol, max_iter, cert.r_max)
    bound = 0.0 if q == 0.0 else q / (1.0 - q) * last_step
    x_norm = spectral_norm(x)
    if x_norm > cert.r_min + bound + 1e-12 * (1.0 + cert.r_min):
        raise ContractionViolationError(
            f"final norm {x_norm:.6e} exceeds the certified radius "
            f"{cert.r_min:.6e} plus bound {bound:.3e}")
    residual = spectral_norm(x - self_energy_of_operator(model, contour, model.a1 + x))
    return Solution(
        multi_index=contour.multi_index,
        correction=x,
        effective=model.a1 + x,
        iterations=iterations,
        last_step_norm=last_step,
        a_posteriori_bound=bound,
        certificate=cert,
        contour=contour,
        step_norms=tuple(steps),
        fixed_point_residual=residual,
    )


def refine_fixed_point(model: SpectralModel, contour: Contour, x0: np.ndarray,
                       tol: float = 1e-12,
                       max_iter: int = DEFAULT_MAX_ITER) -> Solution:
    """Picard refinement from a given starting matrix, without a certificate.

    For ingesting externally constructed solutions (inverse constructions,
    previous runs): iterates until the absolute step norm drops below
    ``tol``, with no contraction enforcement, and records the certificate
    purely as data. The a-posteriori bound is not a guarantee here; it
    reports the final step norm.
    """
    cert = solvability_certificate(model, contour)
    x = np.asarray(x0, dtype=complex)
    steps: list[float] = []
    for it in range(1, max_iter + 1):
        x_next = self_energy_of_operator(model, contour, model.a1 + x)
        step = spectral_norm(x_next - x)
        steps.append(step)
        x = x_next
        if step <= tol:
            break
    else:
        raise NonconvergenceError(
            f"refinement did not reach step <= {tol} in {max_iter} iterations",
            steps)
    residual = spectral_norm(x - self_energy_of_operator(model, contour, model.a1 + x))
    return Solution(
        multi_index=contour.multi_index,
        correction=x,
        effective=model.a1 + x,
        iterations=len(steps),
        last_step_norm=steps[-1],
        a_posteriori_bound=steps[-1],
        certificate=cert,
        contour=contour,
        step_norms=tuple(steps),
        fixed_point_residual=residual,
    )


def contour_independence(model: SpectralModel, sol: Solution, other: Contour,
                         tol: float = DEFAULT_TOL,
                         max_iter: int = DEFAULT_MAX_ITER) -> float:
    """Norm distance between the solution and an independent re-solve.

    The second contour must carry the same multi-index. When it is
    admissible a fresh independent solve runs from zero. When it is merely
    separated beyond the first solution's certified radius, the existing
    solution is refined on the second contour (it already satisfies that
    equation up to quadrature agreement) and the difference is reported
    without claiming uniqueness there.
    """
    if tuple(other.multi_index) != tuple(sol.multi_index):
        raise PairingError(
            f"multi-index mismatch: {other.multi_index} vs {sol.multi_index}")
    cert = solvability_certificate(model, other)
    if cert.admissible:
        resolved = solve_fixed_point(model, other, tol, max_iter)
        return spectral_norm(resolved.correction - sol.correction)
    r0_estimate = sol.certificate.r_min + sol.a_posteriori_bound
    if cert.d0 > r0_estimate:
        x, _, _, _ = _iterate(model, other, cert, 0.0, tol, max_iter,
                              None, stop_abs=tol, x0=sol.correction)
        return spectral_norm(x - sol.correction)
    raise InadmissibleCertificateError(
        cert, "second contour is neither admissible nor separated beyond the "
              "certified solution radius")


def adjoint_equation_residual(model: SpectralModel, sol_l: Solution,
                              sol_minus_l: Solution) -> float:
    """Residual of the adjoint fixed-point equation on the original contour.

    The adjoint of the mirror solution must solve the variant with the
    resolvent on the left of the coupling data, integrated over the original
    contour.
    """
    if not is_mirror_pair(sol_l.contour, sol_minus_l.contour):
        raise PairingError("solutions do not live on mirror contours")
    x_adj = sol_minus_l.correction.conj().T
    rhs = adjoint_self_energy_of_operator(model, sol_l.contour, model.a1 + x_adj)
    return spectral_norm(x_adj - rhs)


def solve_mirror_pair(model: SpectralModel, contour: Contour,
                      tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> tuple[Solution, Solution]:
    """Solve on a contour and on its mirror; returns (solution, mirror)."""
    from .contour import mirrored

    sol = solve_fixed_point(model, contour, tol, max_iter)
    sol_m = solve_fixed_point(model, mirrored(model, contour), tol, max_iter)
    return sol, sol_m
