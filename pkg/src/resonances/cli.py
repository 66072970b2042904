"""Batch front end: solve, verify, sweep, and oracle pipelines.

Configuration comes from a JSON file; results are written as JSON (and CSV
for sweeps) with fixed field ordering, fixed summation orders, and floats
formatted at 17 significant digits, so identical inputs produce
byte-identical artifacts.

Exit codes: 0 pass, 1 identity failure, 2 inadmissible certificate,
3 nonconvergence, 4 config or model error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import contour as ct
from . import friedrichs as fr
from . import spectral as sp
from .errors import (
    ClusteringError,
    DomainError,
    GeometryError,
    IdentityFailureError,
    InadmissibleCertificateError,
    NonconvergenceError,
    PairingError,
    ResonanceError,
    StructuralModelError,
    UnsupportedModelError,
)
from .model import SpectralModel, model_from_json_dict, spectral_norm, validate_model
from .solver import solve_fixed_point
from .transfer import adjoint_symmetry_residual

EXIT_OK = 0
EXIT_IDENTITY_FAILURE = 1
EXIT_INADMISSIBLE = 2
EXIT_NONCONVERGENCE = 3
EXIT_CONFIG_ERROR = 4

DEFAULT_TOLERANCES = {"quad_tol": 1e-10, "solve_tol": 1e-10, "id_tol": 1e-6}


# ---------------------------------------------------------------------------
# Deterministic JSON rendering (17 significant digits)
# ---------------------------------------------------------------------------

def _fmt_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return '"%s"' % x
    s = format(float(x), ".17g")
    return s


def _render_json(obj, indent: int = 0) -> str:
    pad = "  " * indent
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f'{pad}  {json.dumps(str(k))}: {_render_json(v, indent + 1)}'
            for k, v in obj.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        simple = all(isinstance(v, (int, float, np.integer, np.floating)) for v in obj)
        if simple:
            return "[" + ", ".join(_render_json(v) for v in obj) + "]"
        items = [f"{pad}  {_render_json(v, indent + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    raise TypeError(f"cannot render {type(obj)!r}")


def _complex_pair(z: complex) -> list:
    return [float(np.real(z)), float(np.imag(z))]


def _matrix_pairs(m: np.ndarray) -> list:
    return [_complex_pair(v) for v in np.asarray(m, dtype=complex).reshape(-1)]


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass
class RunConfig:
    command: str | None
    model: SpectralModel
    contour_json: dict | None
    quad_tol: float
    solve_tol: float
    id_tol: float
    sweep: dict | None
    oracle: dict
    json_path: str | None
    csv_path: str | None
    max_iter: int = 200

    @property
    def algebraic_tol(self) -> float:
        return self.id_tol / 100.0


def load_config(path: str) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise StructuralModelError(f"cannot read config {path}: {exc}") from exc
    if "model" in data:
        model = model_from_json_dict(data["model"])
    elif "model_path" in data:
        mp = data["model_path"]
        if not os.path.isabs(mp):
            mp = os.path.join(os.path.dirname(os.path.abspath(path)), mp)
        try:
            with open(mp, "r", encoding="utf-8") as fh:
                model = model_from_json_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise StructuralModelError(f"cannot read model {mp}: {exc}") from exc
    else:
        raise StructuralModelError("config requires 'model' or 'model_path'")
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(data.get("tolerances", {}))
    sweep = data.get("sweep")
    if sweep is not None:
        grid = sweep.get("grid")
        if not grid or not all(math.isfinite(float(g)) for g in grid):
            raise StructuralModelError("sweep grid must be nonempty and finite")
    output = data.get("output", {})
    return RunConfig(
        command=data.get("command"),
        model=model,
        contour_json=data.get("contour", data.get("contour_spec")),
        quad_tol=float(tol["quad_tol"]),
        solve_tol=float(tol["solve_tol"]),
        id_tol=float(tol["id_tol"]),
        sweep=sweep,
        oracle=data.get("oracle", {}),
        json_path=output.get("json_path"),
        csv_path=output.get("csv_path"),
        max_iter=int(data.get("max_iter", 200)),
    )


def _build_contour(config: RunConfig, model: SpectralModel | None = None) -> ct.Contour:
    if config.contour_json is None:
        raise StructuralModelError("config requires a 'contour' spec")
    specs, l, order = ct.contour_spec_from_json(config.contour_json)
    return ct.build_contour(model or config.model, specs, l, order, config.quad_tol)


def _certificate_dict(cert: ct.SolvabilityCertificate) -> dict:
    return {
        "d0": cert.d0,
        "v0": cert.v0,
        "omega": cert.omega,
        "admissible": cert.admissible,
        "r_min": cert.r_min,
        "r_max": cert.r_max,
    }


def _tag_eigenvalues(model: SpectralModel, sol, dec) -> list:
    scale = max(spectral_norm(sol.effective), 1.0)
    real_band = max(10.0 * sol.a_posteriori_bound, 1e-9 * scale)
    rows = []
    for i in range(dec.count):
        lam = dec.eigenvalues[i]
        tag = "real" if abs(lam.imag) <= real_band else "complex"
        interval = None
        for k, iv in enumerate(model.intervals):
            if iv.strip_contains(lam) or (tag == "real" and iv.contains_real(lam.real)):
                interval = k
                break
        rows.append({
            "re": float(lam.real),
            "im": float(lam.imag),
            "tag": tag,
            "half_plane": 0 if tag == "real" else (1 if lam.imag > 0 else -1),
            "interval": interval,
            "algebraic_multiplicity": dec.algebraic[i],
            "pole_order": dec.pole_orders[i],
        })
    return rows


# ---------------------------------------------------------------------------
# Pipelines
# ---------------------------------------------------------------------------

def run_solve(config: RunConfig) -> tuple[int, dict]:
    """Solve once; emit certificate, solution matrices, tagged eigenvalues."""
    model = config.model
    report = validate_model(model)
    if not report.ok:
        return EXIT_CONFIG_ERROR, {
            "status": "invalid-model",
            "violations": [str(v) for v in report.violations],
        }
    contour = _build_contour(config)
    cert = ct.solvability_certificate(model, contour)
    if not cert.admissible:
        return EXIT_INADMISSIBLE, {
            "status": "inadmissible",
            "certificate": _certificate_dict(cert),
        }
    try:
        sol = solve_fixed_point(model, contour, config.solve_tol, config.max_iter)
    except NonconvergenceError as exc:
        return EXIT_NONCONVERGENCE, {
            "status": "nonconvergence",
            "certificate": _certificate_dict(cert),
            "step_norms": [float(v) for v in exc.history],
        }
    dec = sp.spectral_decomposition_of(sol)
    artifact = {
        "status": "ok",
        "certificate": _certificate_dict(cert),
        "solution": {
            "multi_index": list(sol.multi_index),
            "n": model.dim,
            "correction": _matrix_pairs(sol.correction),
            "effective": _matrix_pairs(sol.effective),
            "iterations": sol.iterations,
            "last_step_norm": sol.last_step_norm,
            "a_posteriori_bound": sol.a_posteriori_bound,
        },
        "eigenvalues": _tag_eigenvalues(model, sol, dec),
        "residuals": {
            "fixed_point": sol.fixed_point_residual,
            "projector_sum": dec.projector_sum_defect,
        },
    }
    return EXIT_OK, artifact


def _verify_rows(config: RunConfig) -> list[dict]:
    model = config.model
    base = _build_contour(config)
    base_m = ct.mirrored(model, base)
    fine = ct.double_order(model, base)
    fine_m = ct.mirrored(model, fine)

    sol = solve_fixed_point(model, base, config.solve_tol, config.max_iter)
    sol_m = solve_fixed_point(model, base_m, config.solve_tol, config.max_iter)
    sol2 = solve_fixed_point(model, fine, config.solve_tol, config.max_iter)
    sol2_m = solve_fixed_point(model, fine_m, config.solve_tol, config.max_iter)

    id_tol = config.id_tol
    alg_tol = config.algebraic_tol
    rng = np.random.default_rng(20240801)
    rows: list[dict] = []

    def add(name: str, residual: float, threshold: float, skipped: bool = False):
        rows.append({
            "name": name,
            "residual": float(residual),
            "threshold": float(threshold),
            "pass": bool(skipped or residual <= threshold),
            "skipped": skipped,
        })

    cert = sol.certificate
    eigs_a1 = model.a1_eigenvalues()

    def sample_points(count: int) -> np.ndarray:
        pts = []
        guard = 100.0 * base.quad_tol * base.diameter + 1e-12
        while len(pts) < count:
            lam = complex(eigs_a1[rng.integers(0, len(eigs_a1))])
            r = (0.05 + 0.9 * rng.random()) * cert.d0 / 2.0
            z = lam + r * np.exp(2j * math.pi * rng.random())
            dist = min(base.distance_to_curve(z), fine.distance_to_curve(z))
            for p in model.discrete:
                dist = min(dist, abs(z - p.nu))
            if dist > max(1e-6 * base.diameter, guard):
                pts.append(z)
        return np.array(pts)

    zs = sample_points(20)
    add("factorization",
        max(sp.factorize(model, base, sol, z).residual for z in zs), alg_tol)

    omega2 = sp.overlap_operator(model, fine, sol2, sol2_m)
    metric2_inv = np.linalg.inv(omega2.metric())
    gamma = sp.enclosure_circles(model, sol)
    m0 = sp.contour_moment(model, base, sol, sol_m, gamma, 0)
    add("resolvent-moment-0", spectral_norm(m0.matrix - metric2_inv), id_tol)

    m1 = sp.contour_moment(model, base, sol, sol_m, gamma, 1)
    h2_adj = sol2_m.effective.conj().T
    r1 = spectral_norm(m1.matrix - metric2_inv @ h2_adj)
    r2 = spectral_norm(m1.matrix - sol2.effective @ metric2_inv)
    add("resolvent-moment-1", max(r1, r2), id_tol)

    dec = sp.spectral_decomposition_of(sol)
    dec2 = sp.spectral_decomposition_of(sol2)
    dec2_m = sp.spectral_decomposition_of(sol2_m)
    res_max = 0.0
    for lam in dec.eigenvalues:
        value, _, _ = sp.transfer_residue(model, base, sol, lam)
        j = int(np.argmin([abs(ev - np.conj(lam)) for ev in dec2_m.eigenvalues]))
        i2 = int(np.argmin([abs(ev - lam) for ev in dec2.eigenvalues]))
        p_adj = dec2_m.projections[j].conj().T
        left = spectral_norm(value - metric2_inv @ p_adj)
        right = spectral_norm(value - dec2.projections[i2] @ metric2_inv)
        res_max = max(res_max, left, right)
    add("residue-projection-product", res_max, id_tol)

    pn = sp.verify_projection_equations(model, fine, sol, dec)
    add("projection-equations", pn.max_residual, id_tol)

    add("adjoint-symmetry",
        max(adjoint_symmetry_residual(model, base, base_m, z) for z in zs), alg_tol)

    e_l = np.sort_complex(np.linalg.eigvals(sol.effective))
    e_m = np.sort_complex(np.conj(np.linalg.eigvals(sol_m.effective)))
    add("mirror-spectrum", float(np.max(np.abs(e_l - e_m))), alg_tol)

    try:
        scale = max(spectral_norm(sol.effective), 1.0)
        band = max(10.0 * sol.a_posteriori_bound, 1e-9 * scale)
        real_eigs = [ev.real for ev in dec.eigenvalues if abs(ev.imag) <= band]
        gram = sp.riesz_gram(model, sol, sol_m, real_eigs)
        add("gram-identity", max(gram.gram_defect, gram.real_block_defect), id_tol)
    except UnsupportedModelError:
        add("gram-identity", 0.0, id_tol, skipped=True)
    return rows


def run_verify(config: RunConfig) -> tuple[int, dict]:
    """Run the identity suite; exit 0 iff every row passes its threshold."""
    model = config.model
    report = validate_model(model)
    if not report.ok:
        return EXIT_CONFIG_ERROR, {
            "status": "invalid-model",
            "violations": [str(v) for v in report.violations],
        }
    try:
        rows = _verify_rows(config)
    except InadmissibleCertificateError as exc:
        return EXIT_INADMISSIBLE, {
            "status": "inadmissible",
            "certificate": _certificate_dict(exc.certificate),
        }
    except NonconvergenceError as exc:
        return EXIT_NONCONVERGENCE, {
            "status": "nonconvergence",
            "step_norms": [float(v) for v in exc.history],
        }
    all_pass = all(r["pass"] for r in rows)
    code = EXIT_OK if all_pass else EXIT_IDENTITY_FAILURE
    return code, {"status": "ok" if all_pass else "identity-failure",
                  "identities": rows, "all_pass": all_pass}


def _sweep_model(config: RunConfig, value: float) -> SpectralModel:
    from .model import CouplingFunction

    model = config.model
    parameter = config.sweep.get("parameter", "beta")
    if parameter != "beta":
        raise StructuralModelError(f"unsupported sweep parameter {parameter!r}")
    if model.coupling.kind != "constant-vector":
        raise UnsupportedModelError(
            "beta sweep requires the constant-vector coupling")
    row = np.asarray(model.coupling.row)
    norm = np.linalg.norm(row)
    unit = row / norm if norm > 0 else np.eye(1, row.size)[0]
    coupling = CouplingFunction.constant_vector(unit * value, model.coupling.decay)
    return SpectralModel(model.a1, model.intervals, model.discrete, coupling)


def _sweep_point(config: RunConfig, value: float) -> list[dict]:
    model = _sweep_model(config, value)
    contour = _build_contour(config, model)
    cert = ct.solvability_certificate(model, contour)
    if not cert.admissible:
        return [{"parameter": value, "status": "inadmissible"}]
    try:
        sol = solve_fixed_point(model, contour, config.solve_tol, config.max_iter)
    except NonconvergenceError:
        return [{"parameter": value, "status": "nonconvergence"}]
    dec = sp.spectral_decomposition_of(sol)
    tags = _tag_eigenvalues(model, sol, dec)
    rows = []
    order = sorted(range(dec.count), key=lambda i: (tags[i]["re"], tags[i]["im"]))
    for rank, i in enumerate(order):
        rows.append({
            "parameter": value,
            "status": "ok",
            "eig_index": rank,
            "re": tags[i]["re"],
            "im": tags[i]["im"],
            "tag": tags[i]["tag"],
            "r_min": cert.r_min,
            "iterations": sol.iterations,
        })
    return rows


def run_sweep(config: RunConfig) -> tuple[int, dict, str]:
    """Re-solve across the parameter grid; rows ordered by grid index."""
    if config.sweep is None:
        raise StructuralModelError("sweep command requires a 'sweep' config block")
    grid = [float(g) for g in config.sweep["grid"]]
    threads = int(os.environ.get("RESONANCE_THREADS", "0") or 0)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda v: _sweep_point(config, v), grid))
    else:
        results = [_sweep_point(config, v) for v in grid]
    rows = [r for point in results for r in point]
    header = ["parameter", "eig_index", "re_lambda", "im_lambda", "tag",
              "r_min", "iterations", "status"]
    lines = [",".join(header)]
    for r in rows:
        if r["status"] != "ok":
            lines.append(",".join([
                format(r["parameter"], ".17g"), "", "", "", "", "", "", r["status"]]))
        else:
            lines.append(",".join([
                format(r["parameter"], ".17g"),
                str(r["eig_index"]),
                format(r["re"], ".17g"),
                format(r["im"], ".17g"),
                r["tag"],
                format(r["r_min"], ".17g"),
                str(r["iterations"]),
                "ok",
            ]))
    csv_text = "\n".join(lines) + "\n"
    return EXIT_OK, {"status": "ok", "rows": rows}, csv_text


def run_oracle(config: RunConfig) -> tuple[int, dict]:
    """Closed-form roots, bound states, asymptotics, and solver comparison."""
    model = config.model
    try:
        params = fr.params_from_model(model)
    except UnsupportedModelError as exc:
        return EXIT_CONFIG_ERROR, {"status": "unsupported-model", "reason": str(exc)}
    nus = [int(v) for v in config.oracle.get("nu", [1, -1])]
    roots = []
    for nu in nus:
        if nu == 0:
            continue
        root = fr.resonance_root(params.with_sheet(nu))
        roots.append({
            "nu": nu,
            "z": _complex_pair(root.z),
            "abs_f": root.residual,
            "iterations": root.iterations,
            "angle_residual": root.angle_residual,
        })
    bound = None
    if 0.0 < params.lambda1 < params.a:
        bs = fr.bound_states(params)
        bound = {
            "z0": bs.z0,
            "za": bs.za,
            "abs_f0": bs.residual0,
            "abs_fa": bs.residual_a,
            "z0_asymptote": bs.z0_asymptote(params),
            "za_asymptote": bs.za_asymptote(params),
            "z0_ratio": bs.z0 / bs.z0_asymptote(params),
            "za_gap_ratio": bs.za_offset / bs.za_gap_asymptote(params),
        }
    comparison = None
    if config.contour_json is not None:
        contour = _build_contour(config)
        cert = ct.solvability_certificate(model, contour)
        if not cert.admissible:
            return EXIT_INADMISSIBLE, {
                "status": "inadmissible",
                "certificate": _certificate_dict(cert),
            }
        sol = solve_fixed_point(model, contour, config.solve_tol, config.max_iter)
        nu_match = contour.multi_index[0]
        root = fr.resonance_root(params.with_sheet(nu_match))
        solver_root = complex(sol.effective[0, 0])
        comparison = {
            "nu": nu_match,
            "solver": _complex_pair(solver_root),
            "oracle": _complex_pair(root.z),
            "difference": abs(solver_root - root.z),
        }
    return EXIT_OK, {
        "status": "ok",
        "parameters": {"a": params.a, "lambda1": params.lambda1, "beta": params.beta},
        "resonances": roots,
        "bound_states": bound,
        "solver_comparison": comparison,
    }


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _write_outputs(artifact: dict, json_path: str | None, csv_text: str | None,
                   csv_path: str | None, quiet: bool):
    text = _render_json(artifact) + "\n"
    if json_path:
        with open(json_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    if csv_text is not None and csv_path:
        with open(csv_path, "w", encoding="utf-8") as fh:
            fh.write(csv_text)
    if not quiet and not json_path:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="resonances",
        description="Resonances of 2x2 operator matrices via continued "
                    "transfer functions")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("solve", "verify", "sweep", "oracle"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--csv", default=None)
        p.add_argument("--quiet", action="store_true")
    args = parser.parse_args(argv)

    try:
        config = load_config(args.config)
        if config.command is not None and config.command != args.command:
            raise StructuralModelError(
                f"config command {config.command!r} does not match {args.command!r}")
        csv_text = None
        if args.command == "solve":
            code, artifact = run_solve(config)
        elif args.command == "verify":
            code, artifact = run_verify(config)
        elif args.command == "sweep":
            code, artifact, csv_text = run_sweep(config)
        else:
            code, artifact = run_oracle(config)
    except InadmissibleCertificateError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INADMISSIBLE
    except NonconvergenceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NONCONVERGENCE
    except IdentityFailureError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_IDENTITY_FAILURE
    except (StructuralModelError, UnsupportedModelError, DomainError,
            GeometryError, ClusteringError, PairingError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG_ERROR
    except ResonanceError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_CONFIG_ERROR

    json_path = args.out or config.json_path
    csv_path = args.csv or config.csv_path
    _write_outputs(artifact, json_path, csv_text, csv_path, args.quiet)
    if artifact.get("status") not in ("ok",) and code == EXIT_OK:
        code = EXIT_CONFIG_ERROR
    if code != EXIT_OK:
        sys.stderr.write(f"status: {artifact.get('status', 'error')}\n")
    return code


if __name__ == "__main__":
    sys.exit(main())
