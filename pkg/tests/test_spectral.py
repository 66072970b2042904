"""Spectral structure: decompositions, factorization, moments, Gram."""

import math

import numpy as np
import pytest

from resonances import (
    Circle,
    ClusteringError,
    GeometryError,
    InconsistencyError,
    Semicircle,
    build_contour,
    contour_moment,
    eigen_decompose,
    enclosure_circles,
    factorize,
    left_factor_inverse_bound,
    mirrored,
    overlap_operator,
    residue_at,
    riesz_gram,
    solvability_certificate,
    solve_fixed_point,
    spectral_decomposition_of,
    spectral_norm,
    transfer,
    verify_projection_equations,
)
from resonances.model import coupling_density


def solve_pair(model, spec, l):
    c = build_contour(model, spec, l)
    sol = solve_fixed_point(model, c)
    sol_m = solve_fixed_point(model, mirrored(model, c))
    return c, sol, sol_m


# ---------------------------------------------------------------------------
# eigen_decompose
# ---------------------------------------------------------------------------

def test_decompose_diagonal():
    h = np.diag([1.0, 2.0, 3.5]).astype(complex)
    dec = eigen_decompose(h)
    assert dec.count == 3
    for i, lam in enumerate(dec.eigenvalues):
        e = np.zeros((3, 1)); e[[1.0, 2.0, 3.5].index(lam.real)] = 1.0
        assert spectral_norm(dec.projections[i] - e @ e.T) <= 1e-11
        assert spectral_norm(dec.nilpotents[i]) <= 1e-11
        assert dec.pole_orders[i] == 1
        assert dec.algebraic[i] == dec.geometric[i] == 1
    assert dec.projector_sum_defect <= 1e-11


def test_decompose_jordan_block():
    lam = 0.7 + 0.2j
    h = np.array([[lam, 1.0], [0.0, lam]])
    dec = eigen_decompose(h, cluster_tol=1e-6)
    assert dec.count == 1
    assert dec.algebraic == (2,)
    assert dec.geometric == (1,)
    assert dec.pole_orders == (2,)
    assert spectral_norm(dec.projections[0] - np.eye(2)) <= 1e-9
    assert spectral_norm(dec.nilpotents[0] - np.array([[0, 1], [0, 0]])) <= 1e-9


def test_decompose_similarity_six():
    # 6x6 with blocks: J3(1), J2(2+1j), 1x1 at 4
    j = np.zeros((6, 6), dtype=complex)
    j[0, 0] = j[1, 1] = j[2, 2] = 1.0
    j[0, 1] = j[1, 2] = 1.0
    j[3, 3] = j[4, 4] = 2.0 + 1.0j
    j[3, 4] = 1.0
    j[5, 5] = 4.0
    rng = np.random.default_rng(23)
    s = np.eye(6) + 0.2 * (rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6)))
    h = s @ j @ np.linalg.inv(s)
    dec = eigen_decompose(h, cluster_tol=1e-4)
    assert dec.count == 3
    by_eig = {round(ev.real, 2): i for i, ev in enumerate(dec.eigenvalues)}
    i1, i2, i4 = by_eig[1.0], by_eig[2.0], by_eig[4.0]
    assert dec.algebraic[i1] == 3 and dec.geometric[i1] == 1 and dec.pole_orders[i1] == 3
    assert dec.algebraic[i2] == 2 and dec.geometric[i2] == 1 and dec.pole_orders[i2] == 2
    assert dec.algebraic[i4] == 1 and dec.pole_orders[i4] == 1
    assert dec.projector_sum_defect <= 1e-9
    # projection algebra
    for a in range(3):
        for b in range(3):
            prod = dec.projections[a] @ dec.projections[b]
            ref = dec.projections[a] if a == b else np.zeros((6, 6))
            assert spectral_norm(prod - ref) <= 1e-8


def test_decompose_real_isolated_semisimple(n3_bound_model):
    c = build_contour(n3_bound_model, Semicircle(), [1])
    sol = solve_fixed_point(n3_bound_model, c)
    dec = spectral_decomposition_of(sol)
    real = [i for i, ev in enumerate(dec.eigenvalues) if abs(ev.imag) < 1e-9]
    assert len(real) == 1
    i = real[0]
    assert dec.pole_orders[i] == 1
    assert spectral_norm(dec.nilpotents[i]) <= 1e-10


def test_decompose_cluster_separability_error():
    h = np.diag([0.0, 1e-7, 1.0]).astype(complex)
    with pytest.raises(ClusteringError):
        eigen_decompose(h, cluster_tol=5e-8)


# ---------------------------------------------------------------------------
# factorization
# ---------------------------------------------------------------------------

def test_factorize_zero_coupling(zero_model):
    c = build_contour(zero_model, Semicircle(), [1])
    sol = solve_fixed_point(zero_model, c)
    f = factorize(zero_model, c, sol, 0.45 + 0.21j)
    assert spectral_norm(f.left_factor - np.eye(2)) == 0.0
    assert f.residual <= 1e-14


def test_factorize_random_points(friedrichs_std, poly4_model):
    rng = np.random.default_rng(31)
    for model in (friedrichs_std, poly4_model):
        c = build_contour(model, Semicircle(), [1])
        cert = solvability_certificate(model, c)
        sol = solve_fixed_point(model, c)
        bound = left_factor_inverse_bound(cert)
        eigs = model.a1_eigenvalues()
        count = 0
        while count < 100:
            lam = complex(eigs[rng.integers(0, len(eigs))])
            z = lam + (cert.d0 / 2.0) * rng.random() * np.exp(2j * math.pi * rng.random())
            if c.distance_to_curve(z) < 1e-3:
                continue
            f = factorize(model, c, sol, z)
            assert f.residual <= 1e-8
            assert spectral_norm(np.linalg.inv(f.left_factor)) <= bound * 1.1
            count += 1


def test_factorize_adjoint_identity(poly4_model):
    c, sol, sol_m = solve_pair(poly4_model, Semicircle(), [1])
    cm = sol_m.contour
    rng = np.random.default_rng(37)
    eye = np.eye(4)
    for _ in range(20):
        z = complex(rng.uniform(0.5, 3.5), rng.uniform(-1.6, 1.6))
        if min(c.distance_to_curve(z), cm.distance_to_curve(z)) < 0.1:
            continue
        w = factorize(poly4_model, c, sol, z).left_factor
        w_adj = factorize(poly4_model, cm, sol_m, np.conj(z)).left_factor.conj().T
        left = w @ (sol.effective - z * eye)
        right = (sol_m.effective.conj().T - z * eye) @ w_adj
        assert spectral_norm(left - right) <= 1e-9


# ---------------------------------------------------------------------------
# overlap operator
# ---------------------------------------------------------------------------

def test_overlap_zero_coupling(zero_model):
    c, sol, sol_m = solve_pair(zero_model, Semicircle(), [1])
    om = overlap_operator(zero_model, c, sol, sol_m)
    assert spectral_norm(om.matrix) == 0.0


def test_overlap_norm_bound(friedrichs_std):
    c, sol, sol_m = solve_pair(friedrichs_std, Semicircle(), [1])
    om = overlap_operator(friedrichs_std, c, sol, sol_m)
    cert = sol.certificate
    assert om.norm < cert.v0 / (cert.d0 / 2.0) ** 2 < 1.0
    assert om.norm_bound_check == cert.v0 / (cert.d0 / 2.0) ** 2


def test_overlap_adjoint_mirror(poly4_model):
    c, sol, sol_m = solve_pair(poly4_model, Semicircle(), [1])
    om_l = overlap_operator(poly4_model, c, sol, sol_m)
    om_ml = overlap_operator(poly4_model, sol_m.contour, sol_m, sol)
    assert spectral_norm(om_l.matrix.conj().T - om_ml.matrix) <= 1e-10


def test_overlap_positive_on_real_eigenvectors(n3_bound_model):
    c, sol, sol_m = solve_pair(n3_bound_model, Semicircle(), [1])
    om = overlap_operator(n3_bound_model, c, sol, sol_m)
    dec = spectral_decomposition_of(sol)
    i = [k for k, ev in enumerate(dec.eigenvalues) if abs(ev.imag) < 1e-9][0]
    u, s, _ = np.linalg.svd(dec.projections[i])
    psi = u[:, 0]
    val = np.vdot(psi, om.matrix @ psi)
    assert val.real >= -1e-10
    assert abs(val.imag) <= 1e-10


# ---------------------------------------------------------------------------
# moments and residues
# ---------------------------------------------------------------------------

def test_moments_zero_coupling(zero_model):
    c, sol, sol_m = solve_pair(zero_model, Semicircle(), [1])
    gamma = Circle(0.5 + 0.0j, 0.35)
    m0 = contour_moment(zero_model, c, sol, sol_m, gamma, 0)
    m1 = contour_moment(zero_model, c, sol, sol_m, gamma, 1)
    assert spectral_norm(m0.matrix - np.eye(2)) <= 1e-12
    assert spectral_norm(m1.matrix - zero_model.a1) <= 1e-12


def test_moment_identities(poly4_model):
    c, sol, sol_m = solve_pair(poly4_model, Semicircle(), [1])
    om = overlap_operator(poly4_model, c, sol, sol_m)
    metric_inv = np.linalg.inv(om.metric())
    gamma = enclosure_circles(poly4_model, sol)
    m0 = contour_moment(poly4_model, c, sol, sol_m, gamma, 0)
    assert spectral_norm(m0.matrix - metric_inv) <= 1e-6
    assert m0.delta <= 1e-2 * max(spectral_norm(m0.matrix), 1.0)
    m1 = contour_moment(poly4_model, c, sol, sol_m, gamma, 1)
    r_adj = spectral_norm(m1.matrix - metric_inv @ sol_m.effective.conj().T)
    r_eff = spectral_norm(m1.matrix - sol.effective @ metric_inv)
    assert max(r_adj, r_eff) <= 1e-6


def test_moment_geometry_errors(poly4_model):
    c, sol, sol_m = solve_pair(poly4_model, Semicircle(), [1])
    with pytest.raises(GeometryError):
        # circle crosses the deformation contour
        contour_moment(poly4_model, c, sol, sol_m, Circle(2.0 + 0.0j, 2.5), 0)
    with pytest.raises(GeometryError):
        # circle too small: excludes eigenvalues
        contour_moment(poly4_model, c, sol, sol_m, Circle(1.6 + 0.0j, 0.05), 0)


def test_residue_relations(friedrichs_std, n3_bound_model):
    for model in (friedrichs_std, n3_bound_model):
        c, sol, sol_m = solve_pair(model, Semicircle(), [1])
        dec = spectral_decomposition_of(sol)
        for lam in dec.eigenvalues:
            res = residue_at(model, c, sol, sol_m, lam)
            assert res.residual_vs_adjoint_projection <= 1e-6
            assert res.residual_vs_projection <= 1e-6


def test_residue_zero_coupling_gives_internal_projection(zero_model):
    c, sol, sol_m = solve_pair(zero_model, Semicircle(), [1])
    res = residue_at(zero_model, c, sol, sol_m, 0.3)
    e = np.zeros((2, 2)); e[0, 0] = 1.0
    assert spectral_norm(res.matrix - e) <= 1e-10


def test_residue_sum_inverse_is_metric(n3_bound_model):
    c, sol, sol_m = solve_pair(n3_bound_model, Semicircle(), [1])
    dec = spectral_decomposition_of(sol)
    total = sum(residue_at(n3_bound_model, c, sol, sol_m, ev).matrix
                for ev in dec.eigenvalues)
    om = overlap_operator(n3_bound_model, c, sol, sol_m)
    assert spectral_norm(np.linalg.inv(total) - om.metric()) <= 1e-6


# ---------------------------------------------------------------------------
# projection equations
# ---------------------------------------------------------------------------

def test_projection_equations_zero_coupling(zero_model):
    c, sol, _ = solve_pair(zero_model, Semicircle(), [1])
    dec = spectral_decomposition_of(sol)
    report = verify_projection_equations(zero_model, c, sol, dec)
    assert report.max_residual <= 1e-12
    assert report.within_larger_ball


def test_projection_equations_scalar(friedrichs_std):
    c, sol, _ = solve_pair(friedrichs_std, Semicircle(), [1])
    dec = spectral_decomposition_of(sol)
    report = verify_projection_equations(friedrichs_std, c, sol, dec)
    assert report.rows[0].projection_residual <= 1e-8
    assert report.reconstruction_error <= 1e-9
    assert report.within_larger_ball


def test_projection_equations_defective(defective4):
    from resonances import refine_fixed_point

    model, contour, h, x_exact, j = defective4
    sol = refine_fixed_point(model, contour, x_exact, tol=1e-11)
    assert spectral_norm(sol.effective - h) <= 1e-10
    dec = spectral_decomposition_of(sol, cluster_tol=1e-4)
    orders = sorted(zip(dec.algebraic, dec.geometric, dec.pole_orders))
    assert orders == [(1, 1, 1), (1, 1, 1), (2, 1, 2)]
    report = verify_projection_equations(model, contour, sol, dec)
    assert report.max_residual <= 1e-6
    defective_row = [r for r in report.rows if len(r.nilpotent_residuals) > 0][0]
    assert all(v <= 1e-6 for v in defective_row.nilpotent_residuals)


def test_defective_resolve_recovers_structure(defective4):
    from resonances import refine_fixed_point

    model, contour, h, x_exact, j = defective4
    n = model.dim
    resolved = refine_fixed_point(model, contour, np.zeros((n, n)), tol=1e-12,
                                  max_iter=400)
    assert spectral_norm(resolved.effective - h) <= 1e-8
    dec = spectral_decomposition_of(resolved, cluster_tol=1e-4)
    assert sorted(zip(dec.algebraic, dec.geometric, dec.pole_orders)) == [
        (1, 1, 1), (1, 1, 1), (2, 1, 2)]


# ---------------------------------------------------------------------------
# Gram matrices
# ---------------------------------------------------------------------------

def test_gram_zero_coupling(zero_model):
    c, sol, sol_m = solve_pair(zero_model, Semicircle(), [1])
    g = riesz_gram(zero_model, sol, sol_m, real_eigs=[0.3, 0.7])
    assert g.gram_defect <= 1e-12
    assert g.real_block_defect <= 1e-12
    assert g.real_block.shape == (2, 2)


def test_gram_bound_state_block(n3_bound_model):
    c, sol, sol_m = solve_pair(n3_bound_model, Semicircle(), [1])
    dec = spectral_decomposition_of(sol)
    real = [ev.real for ev in dec.eigenvalues if abs(ev.imag) < 1e-9]
    assert len(real) == 1
    g = riesz_gram(n3_bound_model, sol, sol_m, real_eigs=real)
    assert g.real_block.shape == (1, 1)
    assert abs(g.real_block[0, 0] - 1.0) <= 1e-8
    assert g.gram.shape == (3, 3)
    assert g.gram_defect <= 1e-6


def test_gram_semisimple_complex_pair(poly4_model):
    c, sol, sol_m = solve_pair(poly4_model, Semicircle(), [1])
    g = riesz_gram(poly4_model, sol, sol_m)
    assert g.gram.shape == (4, 4)
    assert g.gram_defect <= 1e-6


def test_gram_missing_real_eig_raises(n3_bound_model):
    c, sol, sol_m = solve_pair(n3_bound_model, Semicircle(), [1])
    with pytest.raises(InconsistencyError):
        riesz_gram(n3_bound_model, sol, sol_m, real_eigs=[10.0])


# ---------------------------------------------------------------------------
# spectral invariants
# ---------------------------------------------------------------------------

def test_spectrum_in_certified_vicinity(poly4_model, m2_model):
    for model, spec, l in ((poly4_model, Semicircle(), [1]),
                           (m2_model, Semicircle(radius=0.4), [1, -1])):
        c = build_contour(model, spec, l)
        sol = solve_fixed_point(model, c)
        eigs_a1 = model.a1_eigenvalues()
        for ev in np.linalg.eigvals(sol.effective):
            dist = min(abs(ev - a) for a in eigs_a1)
            assert dist <= sol.certificate.r_min + sol.a_posteriori_bound + 1e-12


def test_complex_spectrum_half_planes(m2_model):
    for l in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        c = build_contour(m2_model, Semicircle(radius=0.4), list(l))
        sol = solve_fixed_point(m2_model, c)
        for ev in np.linalg.eigvals(sol.effective):
            if abs(ev.imag) <= 1e-9:
                continue
            for k, iv in enumerate(m2_model.intervals):
                if iv.lo < ev.real < iv.hi:
                    assert math.copysign(1, ev.imag) == l[k]


def test_spectra_agree_on_shared_components(m2_model):
    sols = {}
    for l in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        c = build_contour(m2_model, Semicircle(radius=0.4), list(l))
        sols[l] = np.linalg.eigvals(solve_fixed_point(m2_model, c).effective)

    def eig_in_interval(eigs, k):
        iv = m2_model.intervals[k]
        sel = [e for e in eigs if iv.lo < e.real < iv.hi]
        assert len(sel) == 1
        return sel[0]

    # component 0 shared between (1,1) and (1,-1)
    assert abs(eig_in_interval(sols[(1, 1)], 0)
               - eig_in_interval(sols[(1, -1)], 0)) <= 1e-9
    # component 1 shared between (1,1) and (-1,1)
    assert abs(eig_in_interval(sols[(1, 1)], 1)
               - eig_in_interval(sols[(-1, 1)], 1)) <= 1e-9
    # the real outside eigenvalue is common to all four
    reals = []
    for l, eigs in sols.items():
        sel = [e for e in eigs if abs(e.imag) <= 1e-9 and e.real > 3.5]
        assert len(sel) == 1
        reals.append(sel[0].real)
    assert max(reals) - min(reals) <= 1e-9


def test_adjoint_similarity_via_overlap(poly4_model):
    c, sol, sol_m = solve_pair(poly4_model, Semicircle(), [1])
    om_m = overlap_operator(poly4_model, sol_m.contour, sol_m, sol)
    metric = om_m.metric()
    lhs = sol.effective.conj().T
    rhs = metric @ sol_m.effective @ np.linalg.inv(metric)
    assert spectral_norm(lhs - rhs) <= 1e-8


def test_transfer_invertible_on_half_separation_curve(poly4_model):
    c = build_contour(poly4_model, Semicircle(), [1])
    cert = solvability_certificate(poly4_model, c)
    margin = (cert.d0 / 2.0) * (1.0 - cert.v0 / (cert.d0 ** 2 / 4.0))
    eigs = poly4_model.a1_eigenvalues()
    rng = np.random.default_rng(41)
    checked = 0
    while checked < 50:
        lam = complex(eigs[rng.integers(0, len(eigs))])
        z = lam + (cert.d0 / 2.0) * np.exp(2j * math.pi * rng.random())
        if min(abs(z - e) for e in eigs) < cert.d0 / 2.0 - 1e-12:
            continue
        if c.distance_to_curve(z) < 1e-6:
            continue
        m = transfer(poly4_model, c, z).matrix
        smin = np.linalg.svd(m, compute_uv=False)[-1]
        assert smin >= margin * 0.999
        checked += 1


def test_embedded_real_eigenvalue_criterion(embedded_real_model):
    model = embedded_real_model
    c = build_contour(model, Semicircle(), [1])
    cert = solvability_certificate(model, c)
    assert cert.admissible
    sol = solve_fixed_point(model, c)
    dec = spectral_decomposition_of(sol)
    # the engineered level survives inside the interval, exactly real
    i = dec.find(0.5, 1e-9)
    lam = dec.eigenvalues[i]
    assert abs(lam.imag) <= 1e-12
    assert dec.pole_orders[i] == 1
    u, s, _ = np.linalg.svd(dec.projections[i])
    psi = u[:, 0]
    k_at = coupling_density(model, lam.real)
    assert abs(np.vdot(psi, k_at @ psi)) <= 1e-10
    h = 1e-6
    kp = coupling_density(model, lam.real + h)
    km = coupling_density(model, lam.real - h)
    deriv = np.vdot(psi, ((kp - km) / (2 * h)) @ psi)
    assert abs(deriv) <= 1e-8
