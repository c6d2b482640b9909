"""Command-line front end: ``kreinlab {solve,nodal,green,validate,diminf,plot}``.

Exit codes: 0 success, 1 a verdict failed, 2 invalid configuration,
3 eigensolver did not converge.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from contextlib import nullcontext
from pathlib import Path

import numpy as np

from . import fem, green, nodal, spectral, validate
from .config import ConfigError, RunConfig, load_config
from .measure import DEFAULT_ORDER, DEFAULT_PANELS, MeasureError, estimate_dim_inf
from .plot import render

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

PASS, FAIL, SKIPPED = "PASS", "FAIL", "SKIPPED"

# what each verdict checks, quoted in its reason string
CLAIMS = {
    "residual": "discrete eigen-equation K u = lambda M u (backward error bound)",
    "simple": "simplicity of the first eigenvalue",
    "courant": "Courant-type nodal bound: u_1 sign-definite, 2 <= m <= n + r - 1 beyond it",
    "diminf": "dimension hypothesis dim_inf(mu) > d - 2 of the nodal and continuity theorems",
    "route": "G_mu inverts -Delta_mu, so lambda = 1/nu on the Green route",
    "condition": "Green boundedness condition sup_x int G(x, y) dmu(y) < infinity",
    "symmetry": "symmetry of the Green operator on L^2(mu)",
    "decay": "boundary decay lim_{x -> z} G_mu f(x) = 0 for z on the boundary",
    "modulus": "continuity of eigenfunctions through u = lambda G_mu u",
    "weak": "weak eigen-equation int grad u . grad v dx = lambda int u v dmu",
    "boundary": "Dirichlet condition u = 0 on the boundary",
    "count": "closed-form nodal domain count",
    "galerkin": "closed form is the computed eigenfunction",
    "orthogonal": "eigenfunctions of distinct eigenvalues are L^2(mu)-orthogonal",
    "minimum": "minimum principle for mu-superharmonic functions",
    "mean": "monotone circle averages of mu-sub/superharmonic functions",
    "mollify": "uniform convergence of mollifications of continuous functions",
}


class RunError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def verdict(name: str, check: str, ok: bool | None, detail: str = "") -> dict:
    status = SKIPPED if ok is None else (PASS if ok else FAIL)
    reason = CLAIMS[check] + (f"; {detail}" if detail else "")
    return {"name": name, "status": status, "reason": reason}


# -- persistence ---------------------------------------------------------------------

def _f(x) -> str:
    return repr(float(x))


def write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    return obj


def write_json(path: Path, payload: dict) -> None:
    text = json.dumps(_clean(payload), sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="ascii")


# -- pipeline stages -------------------------------------------------------------------

class Run:
    """State shared by the stages of one command."""

    def __init__(self, cfg: RunConfig, out: Path):
        self.cfg = cfg
        self.out = out
        self.timings: dict[str, float] = {}
        self.verdicts: list[dict] = []
        self.measure = cfg.measure()
        self._mesh = None
        self._spectrum = None
        self._system = None
        self._KM = None

    def timed(self, key, fn, *a, **kw):
        t = time.perf_counter()
        try:
            return fn(*a, **kw)
        finally:
            self.timings[key] = round(time.perf_counter() - t, 4)

    @property
    def mesh(self) -> fem.Mesh:
        if self._mesh is None:
            try:
                self._mesh = self.timed("mesh", fem.build_mesh, self.cfg.domain, self.cfg.resolution,
                                        self.measure)
            except fem.MeshError as exc:
                raise RunError(EXIT_CONFIG, f"invalid config: {exc}") from None
        return self._mesh

    def matrices(self):
        if self._KM is None:
            K = self.timed("assemble_stiffness", fem.assemble_stiffness, self.mesh)
            M = self.timed("assemble_mass", fem.assemble_measure_mass, self.mesh)
            self._KM = (K, M)
        return self._KM

    @property
    def spectrum(self) -> spectral.Spectrum:
        if self._spectrum is None:
            K, M = self.matrices()
            c = self.cfg
            try:
                self._spectrum = self.timed("solve", spectral.solve, K, M, c.k, c.tol, c.max_iter,
                                            c.cluster_tol, "auto", c.seed)
            except spectral.ConvergenceError as exc:
                raise RunError(EXIT_SOLVER, f"solver did not converge: {exc}") from None
        return self._spectrum

    def kernel(self):
        return green.kernel_for(self.cfg.domain, self.cfg.green_order)

    @property
    def system(self) -> green.NystromSystem:
        if self._system is None:
            self._system = self.timed("discretize", green.discretize, self.kernel(), self.measure,
                                      self.cfg.nodes_per_unit, self.cfg.cells_per_axis)
        return self._system

    def green_supported(self) -> str | None:
        """``None`` when the Green route applies, else the reason it does not."""
        if not self.cfg.green_enable:
            return "disabled in config"
        if self.measure.dim == 2 and self.measure.atoms[0].shape[0]:
            return "planar point masses sit on the logarithmic singularity of G"
        return None

    def base_report(self, command: str) -> dict:
        return {
            "command": command,
            "config_hash": self.cfg.digest(),
            "config": self.cfg.as_dict(),
            "quadrature": {"gauss_order": DEFAULT_ORDER, "panels": DEFAULT_PANELS},
        }


def spectrum_summary(s: spectral.Spectrum) -> dict:
    return {
        "requested": s.requested,
        "returned": len(s),
        "excluded_kernel_dofs": s.n_excluded,
        "truncated": s.truncated,
        "method": s.method,
        "lambdas": [p.lam for p in s.pairs],
        "residuals": [p.residual for p in s.pairs],
        "clusters": [{"start": c.start + 1, "size": c.size, "value": c.value} for c in s.clusters],
        "conventions": {
            "cluster_rule": f"consecutive eigenvalues with relative gap <= {s.info.get('cluster_tol')}",
            "sign": "first DOF with |u| > 1e-8 max|u| is positive",
            "normalization": "u^T M u = 1",
            "nu_floor": s.info.get("nu_floor"),
        },
    }


def write_spectrum(run: Run) -> None:
    s, mesh = run.spectrum, run.mesh
    rows = []
    for i, p in enumerate(s.pairs):
        cl = s.cluster_of(i)
        rows.append([i + 1, _f(p.lam), _f(p.residual), p.cluster_id, cl.size])
    write_csv(run.out / "spectrum.csv", ["index", "lambda", "residual", "cluster_id", "cluster_size"], rows)
    pts = mesh.dof_points
    header = ["dof", "x", "value"] if mesh.dim == 1 else ["dof", "x", "y", "value"]
    for i, p in enumerate(s.pairs):
        rows = [[j, *(_f(c) for c in pts[j]), _f(v)] for j, v in enumerate(p.vector)]
        write_csv(run.out / f"eigvec_{i + 1}.csv", header, rows)


def spectrum_verdicts(run: Run) -> list[dict]:
    s = run.spectrum
    worst = max(p.residual for p in s.pairs)
    out = [verdict("residuals", "residual", worst <= run.cfg.tol, f"worst {worst:.3e} vs tol {run.cfg.tol:g}")]
    if len(s) < 2:
        out.append(verdict("lambda1_simple", "simple", None, "fewer than two eigenpairs"))
    else:
        gap = (s.pairs[1].lam - s.pairs[0].lam) / s.pairs[0].lam
        ok = s.clusters[0].size == 1 and gap > run.cfg.cluster_tol
        out.append(verdict("lambda1_simple", "simple", ok, f"relative gap {gap:.4g}"))
    return out


def diminf_section(run: Run) -> tuple[dict, dict]:
    est = run.timed("diminf", estimate_dim_inf, run.measure)
    sec = {"estimate": est.dimension, "fit_residual": est.fit_residual, "deltas": est.deltas,
           "sup_masses": est.sup_masses, "ambient_dim": est.ambient_dim,
           "hypothesis_ok": est.hypothesis_ok, "warning": est.warning}
    v = verdict("dim_inf", "diminf", est.hypothesis_ok, f"estimate {est.dimension:.4f}, d = {est.ambient_dim}")
    return sec, v


# -- commands ----------------------------------------------------------------------

def cmd_solve(run: Run) -> int:
    rep = run.base_report("solve")
    rep["spectrum"] = spectrum_summary(run.spectrum)
    write_spectrum(run)
    rep["dim_inf"], _ = diminf_section(run)
    rep["verdicts"] = spectrum_verdicts(run)
    rep["timings"] = run.timings
    write_json(run.out / "report.json", rep)
    return EXIT_OK


def cmd_nodal(run: Run) -> int:
    rep = run.base_report("nodal")
    s = run.spectrum
    write_spectrum(run)
    rep["spectrum"] = spectrum_summary(s)
    reps = run.timed("nodal", nodal.nodal_reports, run.mesh, s, run.cfg.tol_rel)
    cv = nodal.verify_courant(s, reps)
    rows = [[r.index, _f(r.lam), r.m, r.r, str(r.courant_lower_ok).lower(), str(r.courant_upper_ok).lower()]
            for r in cv.reports]
    write_csv(run.out / "nodal.csv", ["index", "lambda", "m", "r", "lower_ok", "upper_ok"], rows)
    rep["nodal"] = [{"index": r.index, "lambda": r.lam, "m": r.m, "positive": r.positive,
                     "negative": r.negative, "r": r.r, "bound": r.bound,
                     "unsigned_fraction": r.unsigned_fraction, "lower_ok": r.courant_lower_ok,
                     "upper_ok": r.courant_upper_ok} for r in cv.reports]
    rep["dim_inf"], dv = diminf_section(run)
    vs = spectrum_verdicts(run)
    for r in cv.reports:
        vs.append(verdict(f"courant_{r.index}", "courant", r.ok, f"index {r.index}: m = {r.m}, bound {r.bound}"))
    if not rep["dim_inf"]["hypothesis_ok"]:
        vs.append(verdict("dim_inf", "diminf", None, "hypothesis fails, bounds reported without guarantee"))
    rep["verdicts"] = vs
    rep["timings"] = run.timings
    write_json(run.out / "report.json", rep)
    return EXIT_FAIL if any(v["status"] == FAIL for v in vs) else EXIT_OK


DECAY_DISTANCES = tuple(2.0 ** -k for k in range(2, 9))


def _decay_point(cfg: RunConfig) -> np.ndarray:
    lo, hi = np.asarray(cfg.lower), np.asarray(cfg.upper)
    z = 0.5 * (lo + hi)
    z[0] = hi[0]
    return z


def cmd_green(run: Run) -> int:
    rep = run.base_report("green")
    vs: list[dict] = []
    why = run.green_supported()
    kern = run.kernel()
    cond = run.timed("condition", green.check_green_condition, kern, run.measure, None,
                     run.cfg.nodes_per_unit, run.cfg.cells_per_axis)
    rep["condition"] = {"sup": cond.sup, "sup_refined": cond.sup_refined, "rel_change": cond.rel_change,
                        "argmax": cond.argmax, "infinite": cond.infinite, "diverging": cond.diverging}
    vs.append(verdict("green_condition", "condition", not (cond.infinite or cond.diverging),
                      "infinite at a sample point" if cond.infinite else f"refinement change {cond.rel_change:.3g}"))
    names = ["route_agreement", "operator_symmetry", "boundary_decay", "continuity_modulus"]
    checks = ["route", "symmetry", "decay", "modulus"]
    if why is not None:
        vs += [verdict(n, c, None, why) for n, c in zip(names, checks)]
        rep.update(verdicts=vs, timings=run.timings)
        write_json(run.out / "green_report.json", rep)
        return EXIT_FAIL if any(v["status"] == FAIL for v in vs) else EXIT_OK

    s = run.spectrum
    k = min(5, len(s))
    res = run.timed("nystrom", green.nystrom_solve, kern, run.measure, k, run.cfg.cluster_tol,
                    system=run.system)
    table = []
    for i in range(k):
        a, b = s.pairs[i].lam, res.spectrum.pairs[i].lam
        table.append({"index": i + 1, "galerkin": a, "green": b, "rel_diff": abs(a - b) / a})
    worst = max(r["rel_diff"] for r in table)
    rep["route_agreement"] = table
    rep["nystrom"] = {"nodes": run.system.size, "asymmetry": res.asymmetry}
    vs.append(verdict("route_agreement", "route", worst <= 0.02, f"worst relative difference {worst:.3e}"))

    rng = np.random.default_rng(run.cfg.seed)
    fv, gv = rng.standard_normal((2, run.system.size))
    sym = green.operator_symmetry(run.system, fv, gv)
    rep["operator_symmetry"] = sym
    vs.append(verdict("operator_symmetry", "symmetry", sym <= 5e-3, f"relative gap {sym:.3e}"))

    u1 = res.spectrum.pairs[0].vector
    z = _decay_point(run.cfg)
    dec = run.timed("decay", green.boundary_decay_check, run.system, u1, z, DECAY_DISTANCES)
    rep["decay"] = {"z": z, "distances": dec.distances, "values": dec.values,
                    "interior_max": dec.interior_max, "threshold": dec.threshold, "monotone": dec.monotone}
    vs.append(verdict("boundary_decay", "decay", dec.passed,
                      f"final {dec.values[-1]:.3e} vs {dec.threshold} x {dec.interior_max:.3e}"))

    h0 = float(min(run.cfg.domain.widths)) / 8
    spacings = (h0, h0 / 2, h0 / 4)
    mod = run.timed("modulus", green.continuity_modulus_check, run.system, u1, res.spectrum.pairs[0].lam,
                    spacings)
    rep["modulus"] = {"spacings": mod.spacings, "moduli": mod.moduli, "ratios": mod.ratios}
    vs.append(verdict("continuity_modulus", "modulus", mod.passed,
                      "ratios " + ", ".join(f"{r:.3f}" for r in mod.ratios)))
    rep.update(verdicts=vs, timings=run.timings)
    write_json(run.out / "green_report.json", rep)
    return EXIT_FAIL if any(v["status"] == FAIL for v in vs) else EXIT_OK


def _example_fixtures(run: Run, ex: validate.ClosedFormExample, rep: dict, vs: list) -> None:
    cfg = run.cfg
    bumps = validate.make_bumps(ex, cfg.bumps, cfg.seed)
    r2 = run.timed("weak_residual", validate.weak_residual, ex, ex.lam, bumps)
    r21 = validate.weak_residual(ex, ex.lam + 0.1, bumps)
    rep["weak_residual"] = {"lambda": ex.lam, "max": r2.max_residual, "per_bump": r2.residuals,
                            "lambda_wrong": ex.lam + 0.1, "max_wrong": r21.max_residual}
    vs.append(verdict("weak_residual", "weak", r2.max_residual <= 1e-6, f"max {r2.max_residual:.3e}"))
    vs.append(verdict("weak_residual_detects_wrong_lambda", "weak", r21.max_residual >= 10 * r2.max_residual,
                      f"ratio {r21.max_residual / max(r2.max_residual, 1e-300):.3g}"))

    ring = validate.boundary_ring(ex.domain, 64)
    bmax = float(np.max(np.abs(ex.u(ring))))
    vs.append(verdict("closed_form_boundary", "boundary", bmax <= 1e-12, f"max |u| on boundary {bmax:.2e}"))

    mesh = run.mesh
    uI = fem.interpolate(mesh, ex.u)
    cnt = nodal.count_nodal_domains(mesh, uI, cfg.tol_rel)
    rep["closed_form_count"] = {"m": cnt.m, "expected": ex.expected_count}
    vs.append(verdict("closed_form_count", "count", cnt.m == ex.expected_count,
                      f"m = {cnt.m}, expected {ex.expected_count}"))

    s = run.spectrum
    K, M = run.matrices()
    j = int(np.argmin(np.abs(s.lambdas - ex.lam)))
    uh = s.pairs[j].vector
    ue = uI / np.sqrt(float(uI @ (M @ uI)))
    if float(ue @ (M @ uh)) < 0:
        ue = -ue
    supp = np.flatnonzero(np.asarray(abs(M).sum(axis=1)).ravel() > 0)
    err = float(np.max(np.abs(ue[supp] - uh[supp])) / np.max(np.abs(ue[supp])))
    rep["galerkin_match"] = {"index": j + 1, "lambda": s.pairs[j].lam, "sup_rel_error": err,
                             "cluster_size": s.cluster_of(j).size}
    vs.append(verdict("galerkin_match", "galerkin", err <= 0.02 and s.cluster_of(j).size == 1,
                      f"eigen index {j + 1}, sup relative error {err:.3e}"))
    if j > 0:
        u1 = s.pairs[0].vector
        ip = abs(float(ue @ (M @ u1)))
        rep["orthogonality"] = ip
        vs.append(verdict("orthogonal_to_u1", "orthogonal", ip <= 1e-2, f"|(u, u_1)| = {ip:.2e}"))

    if ex.expected_count == 1:
        # u > 0 with -Delta_mu u = 2u >= 0: superharmonic, minimum on the boundary
        interior = validate.interior_grid(ex.domain, 41)
        mp = validate.maximum_principle_check(ex.u, interior, ring, "super")
        vs.append(verdict("closed_form_minimum", "minimum", mp.passed and mp.interior >= -1e-8,
                          f"interior min {mp.interior:.3e}, boundary min {mp.ring:.3e}"))
        c = 0.5 * (np.asarray(ex.domain.lo) + np.asarray(ex.domain.hi))
        radii = np.linspace(0.1, 0.8, 6) * float(ex.domain.distance_to_boundary(c)[0])
        prof = validate.average_profile(ex.u, c, radii, 256, ex.domain)
        rep["closed_form_averages"] = {"center": prof.center, "radii": prof.radii, "values": prof.values}
        vs.append(verdict("closed_form_averages", "mean", prof.monotone(increasing=False)
                          and prof.values[0] <= prof.center_value + 1e-12, "nonincreasing in r"))

    # mollification: uniform error should shrink with eps
    n = 128
    X, shape = green.sample_grid(ex.domain, float(min(ex.domain.widths)) / n)
    vals = ex.u(X).reshape(shape)
    hgrid = float(min(ex.domain.widths)) / n
    errs, masses = [], []
    for eps in (0.2, 0.1, 0.05):
        sm, mass = validate.mollify(vals, hgrid, eps, ex.domain)
        errs.append(float(np.max(np.abs(sm - vals))))
        masses.append(mass)
    ratios = [b / a for a, b in zip(errs[:-1], errs[1:])]
    rep["mollify"] = {"eps": [0.2, 0.1, 0.05], "sup_error": errs, "ratios": ratios, "mass": masses}
    vs.append(verdict("mollifier_mass", "mollify", max(abs(m - 1) for m in masses) <= 1e-12, "discrete mass 1"))
    vs.append(verdict("mollify_uniform", "mollify", all(r <= 0.75 for r in ratios),
                      "error ratios " + ", ".join(f"{r:.3f}" for r in ratios)))


def _subharmonic_fixtures(run: Run, rep: dict, vs: list, n_fields: int = 10) -> None:
    why = run.green_supported()
    if why is not None:
        vs.append(verdict("green_minimum_principle", "minimum", None, why))
        vs.append(verdict("subharmonic_averages", "mean", None, why))
        return
    dom = run.cfg.domain
    sysm = run.system
    rng = np.random.default_rng(run.cfg.seed)
    ring = validate.boundary_ring(dom, 64)
    interior = validate.interior_grid(dom, 33)
    margin = 0.1 * float(min(dom.widths))
    centres = rng.uniform(np.asarray(dom.lo) + 2 * margin, np.asarray(dom.hi) - 2 * margin, size=(5, dom.dim))
    pot = validate.GreenPotential(sysm)
    mins, monos = [], []
    ok_min = ok_avg = True
    for i in range(n_fields):
        f = validate.nonnegative_field(run.cfg.seed * 1000 + i, dom)
        fv = f(sysm.nodes)
        mp = validate.maximum_principle_check(pot.field(fv), interior, ring, "super")
        mins.append({"interior_min": mp.interior, "ring_min": mp.ring})
        ok_min &= mp.passed
        if dom.dim == 2:
            w = pot.field(fv, -1.0)
            for c in centres:
                rmax = 0.9 * float(dom.distance_to_boundary(c)[0])
                prof = validate.average_profile(w, c, np.linspace(rmax / 6, rmax, 6), 128, dom)
                good = prof.monotone(True) and prof.values[0] >= prof.center_value - prof.errors[0] - 1e-12
                monos.append(bool(good))
                ok_avg &= good
    rep["green_minimum_principle"] = mins
    vs.append(verdict("green_minimum_principle", "minimum", ok_min,
                      f"{n_fields} seeded f >= 0, u = G_mu f"))
    if dom.dim == 2:
        rep["subharmonic_averages"] = {"centres": centres, "monotone": monos}
        vs.append(verdict("subharmonic_averages", "mean", ok_avg,
                          f"-G_mu f at {len(centres)} centres, 6 radii"))
    else:
        vs.append(verdict("subharmonic_averages", "mean", None, "circle averages need a planar domain"))


def cmd_validate(run: Run) -> int:
    rep = run.base_report("validate")
    vs: list[dict] = []
    if run.cfg.example:
        try:
            ex = validate.example_by_id(run.cfg.example)
        except ValueError as exc:
            raise RunError(EXIT_CONFIG, f"invalid config: {exc}") from None
        if set(ex.measure.components) != set(run.measure.components) or ex.domain != run.cfg.domain:
            raise RunError(EXIT_CONFIG, f"invalid config: measure does not match example {ex.id}")
        rep["example"] = ex.id
        run.timed("example", _example_fixtures, run, ex, rep, vs)
    run.timed("subharmonic", _subharmonic_fixtures, run, rep, vs)
    rep["provenance"] = "subharmonic instances are -G_mu f with seeded nonnegative Gaussian sums f"
    rep.update(verdicts=vs, timings=run.timings)
    write_json(run.out / "validate_report.json", rep)
    return EXIT_FAIL if any(v["status"] == FAIL for v in vs) else EXIT_OK


def cmd_diminf(run: Run) -> int:
    rep = run.base_report("diminf")
    rep["dim_inf"], v = diminf_section(run)
    rep.update(verdicts=[v], timings=run.timings)
    write_json(run.out / "report.json", rep)
    return EXIT_OK if v["status"] == PASS else EXIT_FAIL


def cmd_plot(out: Path, index: int) -> int:
    rep_path = out / "report.json"
    vec_path = out / f"eigvec_{index}.csv"
    if not vec_path.exists():
        raise RunError(EXIT_FAIL, f"missing eigenvector file {vec_path}")
    if not rep_path.exists():
        raise RunError(EXIT_FAIL, f"missing {rep_path}; run solve first")
    cfg = RunConfig.from_dict(json.loads(rep_path.read_text())["config"])
    m = cfg.measure()
    mesh = fem.build_mesh(cfg.domain, cfg.resolution, m)
    data = np.loadtxt(vec_path, delimiter=",", skiprows=1, ndmin=2)
    svg = render(mesh, data[:, -1], mesh.measure, f"eigenfunction {index}")
    (out / f"plot_{index}.svg").write_text(svg, encoding="ascii")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "nodal": cmd_nodal, "green": cmd_green, "validate": cmd_validate,
            "diminf": cmd_diminf}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kreinlab", description="Spectral laboratory for measure Laplacians.")
    sub = p.add_subparsers(dest="command", required=True)
    for name in [*COMMANDS, "plot"]:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name != "plot", help="run configuration (INI)")
        sp.add_argument("--out", help="output directory (defaults to [output] directory)")
        sp.add_argument("--seed", type=int, help="override [run] seed")
        sp.add_argument("--threads", type=int, help="cap BLAS/LAPACK threads")
        if name == "plot":
            sp.add_argument("--index", type=int, default=1, help="eigen index (1-based)")
    return p


def _limits(threads):
    if not threads:
        return nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=threads)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with _limits(args.threads):
            if args.command == "plot":
                if args.out is None and args.config is None:
                    raise RunError(EXIT_CONFIG, "plot needs --out (run directory) or --config")
                out = Path(args.out) if args.out else Path(load_config(args.config).output)
                return cmd_plot(out, args.index)
            cfg = load_config(args.config).with_overrides(args.seed, args.out)
            out = Path(cfg.output)
            out.mkdir(parents=True, exist_ok=True)
            code = COMMANDS[args.command](Run(cfg, out))
    except (ConfigError, MeasureError) as exc:
        print(f"kreinlab: invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except RunError as exc:
        print(f"kreinlab: {exc}", file=sys.stderr)
        return exc.code
    print(f"kreinlab {args.command}: {'ok' if code == EXIT_OK else 'FAIL'} -> {out}")
    return code


if __name__ == "__main__":
    sys.exit(main())
