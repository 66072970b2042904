"""Spectral structure of the effective operators and the proved identities.

Eigenprojections are computed as contour residues of the resolvent
(trapezoidal rule on circles, order-doubled until stable), which stays
robust for defective clusters where eigenvector bases are ill conditioned.
The module also builds the left factor of the transfer-function
factorization, the overlap operator defining the modified inner product,
the resolvent moments of the inverse transfer function, and the Gram
matrices behind the basis statements.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .contour import Contour, is_mirror_pair, keyed_cache, solvability_certificate
from .errors import (
    ClusteringError,
    GeometryError,
    IdentityFailureError,
    InconsistencyError,
    PairingError,
    UnsupportedModelError,
)
from .model import SpectralModel, spectral_norm
from .solver import Solution
from .transfer import (
    _kprime_stack,
    guard_epsilon,
    transfer,
    transfer_many,
)

DEFAULT_NILPOTENT_TOL = 1e-8
_TRAPEZOID_START = 64
_TRAPEZOID_CAP = 16384
_TRAPEZOID_RTOL = 1e-12


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float


def _as_circles(gamma) -> tuple[Circle, ...]:
    if isinstance(gamma, Circle):
        return (gamma,)
    if isinstance(gamma, (tuple, list)) and len(gamma) == 2 and np.isscalar(gamma[1]):
        return (Circle(complex(gamma[0]), float(gamma[1])),)
    return tuple(
        c if isinstance(c, Circle) else Circle(complex(c[0]), float(c[1]))
        for c in gamma
    )


def _trapezoid_residue(f_batch, circles, moment: int = 0,
                       start: int = _TRAPEZOID_START, cap: int = _TRAPEZOID_CAP,
                       rtol: float = _TRAPEZOID_RTOL, atol: float = 0.0):
    """-(1/2 pi i) * contour integral of z^moment * f(z) dz over circles.

    ``f_batch`` maps an array of points to a stacked array of matrices.
    The trapezoidal rule is spectrally accurate on circles; the point count
    doubles until two consecutive results agree. Returns (value, delta,
    points).
    """
    def value(npts: int):
        total = None
        theta = 2.0 * math.pi * (np.arange(npts) + 0.5) / npts
        phase = np.exp(1j * theta)
        for c in circles:
            zs = c.center + c.radius * phase
            vals = f_batch(zs)
            weight = phase * (c.radius / npts)
            if moment:
                weight = weight * zs ** moment
            contrib = -np.einsum("p,pij->ij", weight, vals)
            total = contrib if total is None else total + contrib
        return total

    npts = start
    prev = value(npts)
    while npts < cap:
        npts *= 2
        cur = value(npts)
        delta = spectral_norm(cur - prev)
        if delta <= atol + rtol * max(spectral_norm(cur), 1.0):
            return cur, delta, npts
        prev = cur
    return prev, math.inf, npts


# ---------------------------------------------------------------------------
# Eigen decomposition via residues
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectralDecomposition:
    """Clustered eigenvalues with projections, nilpotents, multiplicities."""

    eigenvalues: tuple[complex, ...]
    projections: tuple[np.ndarray, ...]
    nilpotents: tuple[np.ndarray, ...]
    algebraic: tuple[int, ...]
    geometric: tuple[int, ...]
    pole_orders: tuple[int, ...]
    projector_sum_defect: float
    nilpotent_margins: tuple[float, ...]

    @property
    def count(self) -> int:
        return len(self.eigenvalues)

    def find(self, lam: complex, tol: float) -> int:
        dists = [abs(ev - lam) for ev in self.eigenvalues]
        i = int(np.argmin(dists))
        if dists[i] > tol:
            raise InconsistencyError(
                f"eigenvalue {lam} not present in the decomposition "
                f"(closest is {self.eigenvalues[i]} at distance {dists[i]:.3e})")
        return i


def _cluster(eigs: np.ndarray, tol: float) -> list[list[int]]:
    order = np.lexsort((eigs.imag, eigs.real))
    parent = list(range(eigs.size))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for a in range(eigs.size):
        for b in range(a + 1, eigs.size):
            if abs(eigs[a] - eigs[b]) <= tol:
                ra, rb = find(a), find(b)
                if ra != rb:
                    parent[ra] = rb
    groups: dict[int, list[int]] = {}
    for i in order:
        groups.setdefault(find(i), []).append(int(i))
    out = sorted(groups.values(), key=lambda g: (eigs[g[0]].real, eigs[g[0]].imag))
    return out


def eigen_decompose(h1: np.ndarray, cluster_tol: float | None = None,
                    nilpotent_tol: float = DEFAULT_NILPOTENT_TOL) -> SpectralDecomposition:
    """Cluster the spectrum and compute projections by residue integrals.

    Eigenvalues within ``cluster_tol`` of each other merge into one cluster
    represented by its centroid. Each projection is the residue of the
    resolvent on a circle of radius half the gap to the nearest other
    cluster; the nilpotent is the shifted matrix times the projection, and
    the pole order is the first power whose norm falls below the threshold
    ``nilpotent_tol * max(norm(h1), 1)**k``.
    """
    h1 = np.asarray(h1, dtype=complex)
    n = h1.shape[0]
    scale = max(spectral_norm(h1), 1e-300)
    if cluster_tol is None:
        cluster_tol = 1e-7 * scale
    eigs = np.linalg.eigvals(h1)
    groups = _cluster(eigs, cluster_tol)
    centroids = [complex(np.mean(eigs[g])) for g in groups]

    # inter-cluster separability
    min_gap = math.inf
    for i in range(len(groups)):
        for j in range(i + 1, len(groups)):
            for a in groups[i]:
                for b in groups[j]:
                    min_gap = min(min_gap, abs(eigs[a] - eigs[b]))
    if len(groups) > 1 and min_gap < 4.0 * cluster_tol:
        raise ClusteringError(
            f"inter-cluster gap {min_gap:.3e} < 4 * cluster_tol "
            f"({4.0 * cluster_tol:.3e}); choose a different tolerance")

    eye = np.eye(n)

    def resolvent(zs):
        out = np.empty((zs.size, n, n), dtype=complex)
        for i, z in enumerate(zs):
            out[i] = np.linalg.inv(h1 - z * eye)
        return out

    projections = []
    nilpotents = []
    algebraic = []
    geometric = []
    pole_orders = []
    margins = []
    power_scale = max(scale, 1.0)
    for g, lam in zip(groups, centroids):
        spread = max((abs(eigs[i] - lam) for i in g), default=0.0)
        gap = math.inf
        for h, mu in zip(groups, centroids):
            if h is g:
                continue
            for i in h:
                gap = min(gap, abs(eigs[i] - lam))
        if math.isfinite(gap):
            if spread >= gap * (1.0 - 1e-9):
                raise ClusteringError(
                    f"cluster at {lam} spreads over {spread:.3e} with only "
                    f"{gap:.3e} to the nearest neighbor; choose a different "
                    "tolerance")
            # between the cluster spread and the nearest foreign eigenvalue
            radius = 0.5 * (spread + gap)
        else:
            radius = spread + 0.1 * (1.0 + scale)
        p, _, _ = _trapezoid_residue(resolvent, (Circle(lam, radius),),
                                     atol=1e-13 * (1.0 + scale))
        m_raw = float(np.trace(p).real)
        m = int(round(m_raw))
        if abs(m_raw - m) > 1e-2 or m < 1:
            raise ClusteringError(
                f"projection trace {m_raw:.6f} is not close to an integer; "
                "residue circle geometry is unreliable")
        nil = (h1 - lam * eye) @ p
        sv = np.linalg.svd(nil, compute_uv=False)
        rank = int(np.sum(sv > nilpotent_tol * power_scale))
        order = m
        margin = 0.0
        power = nil.copy()
        for k in range(1, m + 1):
            norm_k = spectral_norm(power)
            thresh = nilpotent_tol * power_scale ** k
            if norm_k <= thresh:
                order = k
                margin = norm_k / thresh
                break
            power = power @ nil
        else:
            margin = spectral_norm(power) / (nilpotent_tol * power_scale ** (m + 1))
        projections.append(p)
        nilpotents.append(nil if order > 1 else np.zeros_like(nil))
        algebraic.append(m)
        geometric.append(m - rank)
        pole_orders.append(order)
        margins.append(margin)

    total = sum(projections)
    defect = spectral_norm(total - eye)
    return SpectralDecomposition(
        eigenvalues=tuple(centroids),
        projections=tuple(projections),
        nilpotents=tuple(nilpotents),
        algebraic=tuple(algebraic),
        geometric=tuple(geometric),
        pole_orders=tuple(pole_orders),
        projector_sum_defect=defect,
        nilpotent_margins=tuple(margins),
    )


# ---------------------------------------------------------------------------
# Factorization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Factorization:
    left_factor: np.ndarray
    residual: float


def _resolvent_stack(model: SpectralModel, contour: Contour, h: np.ndarray,
                     cache: dict | None = None) -> tuple:
    """Inverses of (h - mu) at every node and discrete point, cached."""
    def build():
        n = model.dim
        eye = np.eye(n)
        node_inv = np.empty((contour.nodes.size, n, n), dtype=complex)
        for q, mu in enumerate(contour.nodes):
            node_inv[q] = np.linalg.inv(h - mu * eye)
        disc_inv = tuple(np.linalg.inv(h - p.nu * eye) for p in model.discrete)
        return node_inv, disc_inv

    if cache is None:
        return build()
    return keyed_cache(cache, "resolvent_stack", contour, build)


def factorize(model: SpectralModel, contour: Contour, sol: Solution,
              z: complex, guard: float | None = None) -> Factorization:
    """Left factor of the transfer function at z and the factorization defect.

    The left factor is the identity minus the coupling data integrated
    against the inverse distance to z times the resolvent of the effective
    operator; multiplying it by (effective - z) must reproduce the continued
    transfer function.
    """
    z = complex(z)
    h = sol.effective
    stack = _kprime_stack(model, contour)
    node_inv, disc_inv = _resolvent_stack(model, contour, h, sol._cache)
    coeff = contour.weights / (contour.nodes - z)
    w1 = np.eye(model.dim).astype(complex)
    w1 -= np.einsum("q,qij,qjk->ik", coeff, stack, node_inv)
    for p, inv in zip(model.discrete, disc_inv):
        w1 -= (p.weight @ inv) / (p.nu - z)
    m1 = transfer(model, contour, z, guard).matrix
    residual = spectral_norm(m1 - w1 @ (h - z * np.eye(model.dim)))
    return Factorization(w1, residual)


def left_factor_inverse_bound(cert) -> float:
    """Certified bound for the inverse of the left factor near the spectrum."""
    ratio = cert.v0 / (cert.d0 ** 2 / 4.0)
    if ratio >= 1.0:
        return math.inf
    return 1.0 / (1.0 - ratio)


# ---------------------------------------------------------------------------
# Overlap operator
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OverlapOperator:
    """Positive-type operator defining the modified inner product."""

    matrix: np.ndarray
    norm: float
    norm_bound_check: float  # certified bound, must be < 1

    def metric(self) -> np.ndarray:
        return np.eye(self.matrix.shape[0]) + self.matrix


def overlap_operator(model: SpectralModel, contour: Contour, sol_l: Solution,
                     sol_minus_l: Solution) -> OverlapOperator:
    """Integral of mirror-adjoint resolvent, coupling data, and resolvent.

    Computed over the discrete remainder plus the given contour. The norm
    must stay below the certified bound (variation over the squared half
    separation); a violation beyond one percent slack raises, since it
    signals a bad certificate or quadrature.
    """
    if not is_mirror_pair(sol_l.contour, sol_minus_l.contour):
        raise PairingError("solutions do not live on mirror contours")
    if tuple(contour.multi_index) != tuple(sol_l.multi_index):
        raise PairingError("contour multi-index does not match the solution")
    h = sol_l.effective
    h_adj = sol_minus_l.effective.conj().T
    stack = _kprime_stack(model, contour)
    right_inv, right_disc = _resolvent_stack(model, contour, h, sol_l._cache)
    n = model.dim
    eye = np.eye(n)
    left_inv = np.empty_like(right_inv)
    for q, mu in enumerate(contour.nodes):
        left_inv[q] = np.linalg.inv(h_adj - mu * eye)
    out = np.einsum("q,qij,qjk,qkl->il", contour.weights, left_inv, stack, right_inv)
    for p, rinv in zip(model.discrete, right_disc):
        linv = np.linalg.inv(h_adj - p.nu * eye)
        out += linv @ p.weight @ rinv
    cert = solvability_certificate(model, contour)
    bound = cert.v0 / (cert.d0 / 2.0) ** 2 if cert.d0 > 0 else math.inf
    norm = spectral_norm(out)
    if norm >= bound * 1.01 + 1e-300:
        raise IdentityFailureError(
            f"overlap operator norm {norm:.6e} violates its bound {bound:.6e} "
            "beyond quadrature slack")
    return OverlapOperator(out, norm, bound)


# ---------------------------------------------------------------------------
# Moments and residues of the inverse transfer function
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MomentResult:
    matrix: np.ndarray
    delta: float
    points: int
    circles: tuple[Circle, ...]


def _check_circle_geometry(model: SpectralModel, contour: Contour,
                           circles: tuple[Circle, ...], enclosed: np.ndarray,
                           excluded: np.ndarray = None):
    guard = guard_epsilon(contour)
    for i, c in enumerate(circles):
        for piece in contour.pieces:
            for s in piece.sections:
                dmin, dmax = s.distance_range(c.center)
                if dmin - guard <= c.radius <= dmax + guard:
                    raise GeometryError(
                        f"integration circle {i} intersects the contour")
                if dmax < c.radius:
                    raise GeometryError(
                        f"integration circle {i} encloses part of the contour")
        for p in model.discrete:
            if abs(p.nu - c.center) <= c.radius + guard:
                raise GeometryError(
                    f"integration circle {i} touches or encloses the discrete "
                    f"point nu={p.nu}")
    for lam in np.atleast_1d(enclosed):
        hits = [c for c in circles if abs(lam - c.center) < c.radius * (1.0 - 1e-9)]
        if len(hits) != 1:
            raise GeometryError(
                f"eigenvalue {lam} is enclosed by {len(hits)} circles; "
                "need exactly one")
    if excluded is not None:
        for lam in np.atleast_1d(excluded):
            for c in circles:
                band = abs(abs(lam - c.center) - c.radius)
                if band < 1e-9 * max(1.0, c.radius):
                    raise GeometryError(
                        f"point {lam} lies on an integration circle")
    for i in range(len(circles)):
        for j in range(i + 1, len(circles)):
            a, b = circles[i], circles[j]
            if abs(a.center - b.center) <= a.radius + b.radius:
                raise GeometryError("integration circles overlap")


def _minv_batch(model: SpectralModel, contour: Contour, scale: float):
    def f(zs):
        mats = transfer_many(model, contour, zs)
        out = np.empty_like(mats)
        for i in range(mats.shape[0]):
            inv = np.linalg.inv(mats[i])
            if 1.0 / max(spectral_norm(inv), 1e-300) < 1e-10 * scale:
                raise GeometryError(
                    f"transfer function nearly singular on the circle at "
                    f"z={zs[i]:.6g}")
            out[i] = inv
        return out
    return f


def enclosure_circles(model: SpectralModel, sol: Solution,
                      pad_factor: float = 0.45) -> tuple[Circle, ...]:
    """Circles around the effective spectrum, padded by the separation.

    Groups eigenvalues closer than the separation distance and wraps each
    group in one circle whose pad keeps it inside the certified
    invertibility region but away from the eigenvalues themselves.
    """
    cert = sol.certificate
    eigs = np.linalg.eigvals(sol.effective)
    groups = _cluster(eigs, cert.d0)
    circles = []
    for g in groups:
        pts = eigs[g]
        center = complex(0.5 * (pts.real.min() + pts.real.max()),
                         0.5 * (pts.imag.min() + pts.imag.max()))
        spread = max(abs(pts - center))
        circles.append(Circle(center, spread + pad_factor * cert.d0))
    return tuple(circles)


def contour_moment(model: SpectralModel, contour: Contour, sol_l: Solution,
                   sol_minus_l: Solution, gamma, moment: int = 0) -> MomentResult:
    """Residue-style moment of the inverse transfer function.

    Moment 0 integrates the inverse transfer function around the whole
    effective spectrum; moment 1 weights the integrand by z. The circles
    must enclose every effective eigenvalue exactly once, avoid the contour
    and the discrete remainder, and the trapezoidal rule is doubled until
    stable.
    """
    if moment not in (0, 1):
        raise GeometryError("moment must be 0 or 1")
    circles = _as_circles(gamma)
    eigs = np.linalg.eigvals(sol_l.effective)
    eigs_m = np.conj(np.linalg.eigvals(sol_minus_l.effective))
    _check_circle_geometry(model, contour, circles,
                           np.concatenate([eigs, eigs_m]))
    scale = max(spectral_norm(sol_l.effective), 1.0)
    value, delta, pts = _trapezoid_residue(
        _minv_batch(model, contour, scale), circles, moment,
        atol=1e-13 * (1.0 + scale))
    return MomentResult(value, delta, pts, circles)


@dataclass(frozen=True)
class ResidueResult:
    matrix: np.ndarray
    residual_vs_adjoint_projection: float
    residual_vs_projection: float
    circle: Circle
    delta: float


def transfer_residue(model: SpectralModel, contour: Contour, sol_l: Solution,
                     lam: complex, cluster_tol: float | None = None):
    """Raw residue of the inverse transfer function around one eigenvalue.

    The circle is centered at the matching cluster centroid with radius half
    the gap to the nearest other cluster, capped to stay off the contour by
    the guard band. Returns (matrix, circle, doubling delta).
    """
    lam = complex(lam)
    dec_l = spectral_decomposition_of(sol_l, cluster_tol)
    scale = max(spectral_norm(sol_l.effective), 1.0)
    tol_find = 1e-5 * scale if cluster_tol is None else max(10.0 * cluster_tol, 1e-12)
    i = dec_l.find(lam, tol_find)
    lam_i = dec_l.eigenvalues[i]

    gap = min((abs(lam_i - ev) for k2, ev in enumerate(dec_l.eigenvalues) if k2 != i),
              default=math.inf)
    guard = guard_epsilon(contour)
    dist_curve = contour.distance_to_curve(lam_i)
    for p in model.discrete:
        dist_curve = min(dist_curve, abs(lam_i - p.nu))
    radius = 0.5 * min(gap, dist_curve - guard)
    if not (radius > 0.0):
        raise GeometryError(
            f"no admissible residue circle around {lam_i}: gap {gap:.3e}, "
            f"distance to contour {dist_curve:.3e}")
    circle = Circle(lam_i, radius)
    _check_circle_geometry(model, contour, (circle,), np.array([lam_i]))
    value, delta, _ = _trapezoid_residue(
        _minv_batch(model, contour, scale), (circle,),
        atol=1e-13 * (1.0 + scale))
    return value, circle, delta


def residue_at(model: SpectralModel, contour: Contour, sol_l: Solution,
               sol_minus_l: Solution, lam: complex,
               cluster_tol: float | None = None) -> ResidueResult:
    """Residue of the inverse transfer function at one isolated eigenvalue.

    Also reports the defects of the two product identities relating the
    residue to the eigenprojections of the effective operator and of the
    adjoint mirror operator through the overlap metric.
    """
    lam = complex(lam)
    dec_l = spectral_decomposition_of(sol_l, cluster_tol)
    dec_m = spectral_decomposition_of(sol_minus_l, cluster_tol)
    scale = max(spectral_norm(sol_l.effective), 1.0)
    tol_find = 1e-5 * scale if cluster_tol is None else max(10.0 * cluster_tol, 1e-12)
    i = dec_l.find(lam, tol_find)
    j = dec_m.find(np.conj(lam), tol_find)
    value, circle, delta = transfer_residue(model, contour, sol_l, lam, cluster_tol)

    om = overlap_operator(model, sol_l.contour, sol_l, sol_minus_l)
    metric_inv = np.linalg.inv(om.metric())
    p_l = dec_l.projections[i]
    p_m_adj = dec_m.projections[j].conj().T
    res_left = spectral_norm(value - metric_inv @ p_m_adj)
    res_right = spectral_norm(value - p_l @ metric_inv)
    return ResidueResult(value, res_left, res_right, circle, delta)


def spectral_decomposition_of(sol: Solution,
                              cluster_tol: float | None = None) -> SpectralDecomposition:
    """Decomposition of the effective operator, cached on the solution."""
    key = ("decomposition", cluster_tol)
    if key not in sol._cache:
        sol._cache[key] = eigen_decompose(sol.effective, cluster_tol)
    return sol._cache[key]


# ---------------------------------------------------------------------------
# Projection and nilpotent equations
# ---------------------------------------------------------------------------

def self_energy_derivative(model: SpectralModel, contour: Contour,
                           lam: complex, k: int) -> np.ndarray:
    """k-th derivative of the self-energy at lam via the power-law sums."""
    lam = complex(lam)
    sign = (-1.0) ** k * math.factorial(k)
    stack = _kprime_stack(model, contour)
    coeff = contour.weights / (lam - contour.nodes) ** (k + 1)
    out = sign * np.einsum("q,qij->ij", coeff, stack)
    for p in model.discrete:
        out += sign * p.weight / (lam - p.nu) ** (k + 1)
    return out


@dataclass(frozen=True)
class ProjectionEquationRow:
    eigenvalue: complex
    projection_residual: float
    nilpotent_residuals: tuple[float, ...]


@dataclass(frozen=True)
class ProjectionReport:
    rows: tuple[ProjectionEquationRow, ...]
    reconstruction_error: float
    correction_norm: float
    within_larger_ball: bool

    @property
    def max_residual(self) -> float:
        out = self.reconstruction_error
        for r in self.rows:
            out = max(out, r.projection_residual, *(r.nilpotent_residuals or (0.0,)))
        return out


def verify_projection_equations(model: SpectralModel, contour: Contour,
                                sol: Solution,
                                dec: SpectralDecomposition) -> ProjectionReport:
    """Residuals of the projection and nilpotent equations for every cluster.

    Each cluster is checked against the identity expressing the transfer
    function times the projection through the nilpotent and the self-energy
    derivatives, plus the shifted variants obtained by multiplying with
    nilpotent powers. The decomposition is also reconstructed into a matrix
    and compared with the effective operator, including the ball condition
    that makes the reconstruction unique.
    """
    rows = []
    n = model.dim
    recon = np.zeros((n, n), dtype=complex)
    for i in range(dec.count):
        lam = dec.eigenvalues[i]
        p = dec.projections[i]
        nil = dec.nilpotents[i]
        order = dec.pole_orders[i]
        m1 = transfer(model, contour, lam).matrix
        acc = m1 @ p - nil
        powers = [np.eye(n, dtype=complex)]
        for _ in range(max(order - 1, 0)):
            powers.append(powers[-1] @ nil)
        for k in range(1, order):
            acc += self_energy_derivative(model, contour, lam, k) @ powers[k] / math.factorial(k)
        proj_res = spectral_norm(acc)
        nil_res = []
        for pp in range(1, order):
            acc2 = m1 @ powers[order - pp]
            acc2 -= powers[order - pp] @ nil
            for k in range(1, pp):
                acc2 += (self_energy_derivative(model, contour, lam, k)
                         @ powers[order - pp + k]) / math.factorial(k)
            nil_res.append(spectral_norm(acc2))
        rows.append(ProjectionEquationRow(lam, proj_res, tuple(nil_res)))
        recon += lam * p + nil
    recon_err = spectral_norm(recon - sol.effective)
    corr_norm = spectral_norm(recon - model.a1)
    r_max = sol.certificate.r_max if sol.certificate.r_max is not None else math.inf
    return ProjectionReport(tuple(rows), recon_err, corr_norm, corr_norm < r_max)


# ---------------------------------------------------------------------------
# Gram matrices under the modified inner product
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GramResult:
    gram: np.ndarray
    labels: tuple[tuple[complex, int], ...]
    real_block: np.ndarray
    real_labels: tuple[tuple[float, int], ...]
    overlap_norm: float

    @property
    def gram_defect(self) -> float:
        return spectral_norm(self.gram - np.eye(self.gram.shape[0]))

    @property
    def real_block_defect(self) -> float:
        if self.real_block.size == 0:
            return 0.0
        return spectral_norm(self.real_block - np.eye(self.real_block.shape[0]))


def _range_basis(p: np.ndarray, m: int) -> np.ndarray:
    u, s, _ = np.linalg.svd(p)
    if m > 0 and (s.size < m or s[m - 1] < 0.1):
        raise InconsistencyError(
            "projection rank deficient; cannot extract an eigenvector basis")
    return u[:, :m]


def decomposition_to_json_dict(dec: SpectralDecomposition,
                               residuals: ProjectionReport | None = None) -> dict:
    """JSON-ready view of a decomposition, with optional residual report.

    Matrices are flat row-major lists of [re, im] pairs, matching the model
    schema.
    """
    def pairs(m):
        return [[float(v.real), float(v.imag)]
                for v in np.asarray(m, dtype=complex).reshape(-1)]

    out = {
        "eigenvalues": [
            {
                "re": float(ev.real),
                "im": float(ev.imag),
                "algebraic_multiplicity": dec.algebraic[i],
                "geometric_multiplicity": dec.geometric[i],
                "pole_order": dec.pole_orders[i],
                "projection": pairs(dec.projections[i]),
                "nilpotent": pairs(dec.nilpotents[i]),
            }
            for i, ev in enumerate(dec.eigenvalues)
        ],
        "projector_sum_defect": dec.projector_sum_defect,
        "nilpotent_margins": list(dec.nilpotent_margins),
    }
    if residuals is not None:
        out["residuals"] = {
            "rows": [
                {
                    "eigenvalue": [float(r.eigenvalue.real), float(r.eigenvalue.imag)],
                    "projection_residual": r.projection_residual,
                    "nilpotent_residuals": list(r.nilpotent_residuals),
                }
                for r in residuals.rows
            ],
            "reconstruction_error": residuals.reconstruction_error,
            "correction_norm": residuals.correction_norm,
            "within_larger_ball": residuals.within_larger_ball,
        }
    return out


def riesz_gram(model: SpectralModel, sol_l: Solution, sol_minus_l: Solution,
               real_eigs=(), cluster_tol: float | None = None) -> GramResult:
    """Binormalized Gram matrix of the eigenvector systems under the metric.

    Eigenvector bases of the two mirror solutions are paired by conjugate
    eigenvalues and binormalized so the cross products under the modified
    inner product form the identity; the assembled Gram matrix then tests
    biorthogonality across distinct eigenvalues. Bases at eigenvalues listed
    in ``real_eigs`` are first orthonormalized in the modified inner product
    itself, and the returned real block checks that orthonormality using the
    left system on both sides.
    """
    dec_l = spectral_decomposition_of(sol_l, cluster_tol)
    dec_m = spectral_decomposition_of(sol_minus_l, cluster_tol)
    if any(o != 1 for o in dec_l.pole_orders):
        raise UnsupportedModelError(
            "gram construction requires a semisimple spectrum")
    scale = max(spectral_norm(sol_l.effective), 1.0)
    tol_find = 1e-5 * scale if cluster_tol is None else max(10.0 * cluster_tol, 1e-12)
    for lam in real_eigs:
        dec_l.find(complex(lam), tol_find)
        dec_m.find(complex(np.conj(lam)), tol_find)

    om = overlap_operator(model, sol_l.contour, sol_l, sol_minus_l)
    metric = om.metric()

    real_set = [complex(v) for v in real_eigs]

    left_cols = []
    right_cols = []
    labels = []
    real_cols = []
    real_labels = []
    for i in range(dec_l.count):
        lam = dec_l.eigenvalues[i]
        j = dec_m.find(np.conj(lam), tol_find)
        m_i = dec_l.algebraic[i]
        if dec_m.algebraic[j] != m_i:
            raise InconsistencyError(
                f"multiplicity mismatch at eigenvalue {lam}: "
                f"{m_i} vs {dec_m.algebraic[j]}")
        psi_l = _range_basis(dec_l.projections[i], m_i)
        psi_m = _range_basis(dec_m.projections[j], m_i)
        is_real = any(abs(lam - v) <= tol_find for v in real_set)
        if is_real:
            b = psi_l.conj().T @ metric @ psi_l
            bh = 0.5 * (b + b.conj().T)
            w, u = np.linalg.eigh(bh)
            if w.min() <= 0.0:
                raise InconsistencyError(
                    f"modified inner product not positive on the eigenspace "
                    f"at {lam}")
            psi_l = psi_l @ (u @ np.diag(w ** -0.5) @ u.conj().T)
        a = psi_m.conj().T @ metric @ psi_l
        if np.linalg.cond(a) > 1e8:
            raise InconsistencyError(
                f"cross Gram block at eigenvalue {lam} is nearly singular")
        psi_m = psi_m @ np.linalg.inv(a).conj().T
        left_cols.append(psi_l)
        right_cols.append(psi_m)
        labels.extend((lam, jj) for jj in range(m_i))
        if is_real:
            real_cols.append(psi_l)
            real_labels.extend((float(lam.real), jj) for jj in range(m_i))

    psi_left = np.concatenate(left_cols, axis=1)
    psi_right = np.concatenate(right_cols, axis=1)
    gram = (psi_right.conj().T @ metric @ psi_left).T
    if real_cols:
        pr = np.concatenate(real_cols, axis=1)
        real_block = (pr.conj().T @ metric @ pr).T
    else:
        real_block = np.zeros((0, 0), dtype=complex)
    return GramResult(gram, tuple(labels), real_block, tuple(real_labels), om.norm)
