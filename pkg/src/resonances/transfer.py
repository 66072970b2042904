"""Transfer function evaluation on the physical sheet and its continuations.

The continued transfer function is the internal matrix minus the spectral
parameter plus the self-energy term, where the self-energy integral runs
over the discrete remainder and the deformation contour. Points closer to
the integration set than a guard band are rejected rather than extrapolated
because the quadrature error grows like the inverse distance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contour import Contour, is_mirror_pair, keyed_cache
from .errors import GuardBandError, PairingError
from .model import SpectralModel, spectral_norm

GUARD_FRACTION = 1e-8

LOCATION_INSIDE = "inside"
LOCATION_OUTSIDE = "outside"
LOCATION_GUARD_BAND = "on-contour-guard-band"


def guard_epsilon(contour: Contour, guard: float | None = None) -> float:
    return GUARD_FRACTION * contour.diameter if guard is None else guard


def _kprime_stack(model: SpectralModel, contour: Contour) -> np.ndarray:
    """Coupling density evaluated at every quadrature node, cached."""
    def build():
        n = model.dim
        stack = np.empty((contour.nodes.size, n, n), dtype=complex)
        for q, mu in enumerate(contour.nodes):
            stack[q] = model.coupling(mu)
        stack.setflags(write=False)
        return stack

    return keyed_cache(contour._cache, "kprime_stack", model, build)


def integration_distance(model: SpectralModel, contour: Contour, z: complex) -> float:
    """Distance from z to the discrete remainder and the contour curve."""
    z = complex(z)
    d = contour.distance_to_curve(z)
    for p in model.discrete:
        d = min(d, abs(z - p.nu))
    return d


def locate(model: SpectralModel, contour: Contour, z: complex,
           guard: float | None = None) -> str:
    """Classify z relative to the region bounded by contour and intervals."""
    eps = guard_epsilon(contour, guard)
    if integration_distance(model, contour, z) <= eps:
        return LOCATION_GUARD_BAND
    return LOCATION_INSIDE if contour.region_contains(z) else LOCATION_OUTSIDE


def _check_guard(model, contour, z, guard):
    eps = guard_epsilon(contour, guard)
    d = integration_distance(model, contour, z)
    if d <= eps:
        raise GuardBandError(z, d, eps)


def self_energy(model: SpectralModel, contour: Contour, z: complex,
                guard: float | None = None) -> np.ndarray:
    """Continued self-energy at z: the resolvent-weighted coupling integral."""
    z = complex(z)
    _check_guard(model, contour, z, guard)
    stack = _kprime_stack(model, contour)
    coeff = contour.weights / (z - contour.nodes)
    out = np.einsum("q,qij->ij", coeff, stack)
    for p in model.discrete:
        out += p.weight / (z - p.nu)
    return out


def self_energy_many(model: SpectralModel, contour: Contour, zs: np.ndarray,
                     guard: float | None = None) -> np.ndarray:
    """Vectorized self-energy over a batch of points, shape (P, n, n)."""
    zs = np.asarray(zs, dtype=complex).reshape(-1)
    for z in zs:
        _check_guard(model, contour, z, guard)
    stack = _kprime_stack(model, contour)
    coeff = contour.weights[None, :] / (zs[:, None] - contour.nodes[None, :])
    out = np.einsum("pq,qij->pij", coeff, stack)
    for p in model.discrete:
        out += p.weight[None, :, :] / (zs[:, None, None] - p.nu)
    return out


@dataclass(frozen=True)
class TransferEvaluation:
    """Transfer function value with its sheet bookkeeping."""

    z: complex
    matrix: np.ndarray
    sheet_tag: tuple[int, ...] | str
    location: str

    @property
    def reliable(self) -> bool:
        return self.location != LOCATION_GUARD_BAND


def transfer(model: SpectralModel, contour: Contour, z: complex,
             guard: float | None = None) -> TransferEvaluation:
    """Evaluate the continued transfer function and classify the point.

    Inside the region bounded by the contour and the intervals the value
    lives on the sheet labelled by the contour's multi-index; outside it
    coincides with the physical-sheet transfer function.
    """
    z = complex(z)
    location = locate(model, contour, z, guard)
    if location == LOCATION_GUARD_BAND:
        eps = guard_epsilon(contour, guard)
        raise GuardBandError(z, integration_distance(model, contour, z), eps)
    matrix = model.a1 - z * np.eye(model.dim) + self_energy(model, contour, z, guard)
    tag = contour.multi_index if location == LOCATION_INSIDE else "physical"
    return TransferEvaluation(z, matrix, tag, location)


def transfer_many(model: SpectralModel, contour: Contour, zs: np.ndarray,
                  guard: float | None = None) -> np.ndarray:
    """Vectorized transfer matrices over a batch of points, shape (P, n, n)."""
    zs = np.asarray(zs, dtype=complex).reshape(-1)
    se = self_energy_many(model, contour, zs, guard)
    eye = np.eye(model.dim)
    return model.a1[None, :, :] - zs[:, None, None] * eye[None, :, :] + se


def adjoint_symmetry_residual(model: SpectralModel, contour_l: Contour,
                              contour_minus_l: Contour, z: complex,
                              guard: float | None = None) -> float:
    """Defect of the conjugate-adjoint symmetry between mirror sheets.

    Returns the norm of the difference between the adjoint of the mirror
    transfer function at conj(z) and the transfer function at z; both sides
    are computed independently.
    """
    if not is_mirror_pair(contour_l, contour_minus_l):
        raise PairingError("contours are not a mirror pair")
    z = complex(z)
    left = transfer(model, contour_minus_l, np.conj(z), guard).matrix.conj().T
    right = transfer(model, contour_l, z, guard).matrix
    return spectral_norm(left - right)
