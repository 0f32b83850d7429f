"""Task orchestration: one validated RunConfig in, one JSON-ready RunReport out."""

from __future__ import annotations

import csv
import io as _io
import math
import time
from datetime import datetime, timezone
from importlib import metadata

import numpy as np

from .config import RunConfig, parse_config
from .energy import StatePair, eval_energies, nehari_identities
from .errors import BNLSError, DegenerateThreshold, FellToSemitrivial, NonConvergence, TaskFailed
from .fibering import admissibility, scalar_profile, system_profile
from .io import _atomic_write, write_field, write_json
from .parallel import pmap
from .scalar import BASE_TOL, SolveOptions, residual_scale, scalar_nehari_defect, solve_scalar_ground_state, tail_fit
from .spectral import clamped_spectrum, thresholds
from .system import (
    SystemOptions,
    classify_semitrivial,
    residual_check,
    semitrivial_states,
    solve_global_min,
    solve_mountain_pass,
)
from .verify import VerifySettings, run_all


def artifact_version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


def _check(name: str, value: float, tol: float, kind: str = "<") -> dict:
    ok = math.isfinite(value) and {"<": value < tol, ">": value > tol, "==": value == tol}[kind]
    return {"name": name, "value": value, "tolerance": tol, "test": kind, "pass": bool(ok)}


def _scalar_opts(cfg: RunConfig) -> SolveOptions:
    s = cfg.solver
    return SolveOptions(tol=s.tol, max_iter=s.max_iter, seed=s.seed)


def _system_opts(cfg: RunConfig, allow_semitrivial: bool = True) -> SystemOptions:
    s = cfg.solver
    return SystemOptions(
        tol=s.tol,
        max_iter=s.max_iter,
        seed=s.seed or 0,
        allow_semitrivial=allow_semitrivial,
        beads=s.beads,
        reparam_every=s.reparam_every,
        string_sweeps=s.string_sweeps,
        gtol=s.gtol,
    )


def _classify(which, p, consts) -> dict:
    try:
        return classify_semitrivial(which, p, consts).to_json()
    except DegenerateThreshold as exc:
        return {"state": f"u{which}-semitrivial", "verdict": "degenerate", "detail": str(exc)}


def _identity_checks(u: StatePair, p) -> list:
    return [_check(f"nehari {k}", v, 1e-8) for k, v in nehari_identities(u, p).items()]


# -- tasks -------------------------------------------------------------------


def task_solve_scalar(cfg: RunConfig) -> tuple[dict, list]:
    g, q = cfg.build_grid(), cfg.params
    r = solve_scalar_ground_state(q.lambda1, q.mu1, g, _scalar_opts(cfg))
    if cfg.output.field:
        write_field(cfg.output.field, r.state)
    defect = abs(scalar_nehari_defect(r.state, q.lambda1, q.mu1))
    out = {"solve": r.summary(), "nehari_defect": defect}
    try:
        out["tail"] = tail_fit(r.state).to_json()
    except BNLSError as exc:
        out["tail"] = {"error": str(exc)}
    checks = [
        _check("strong residual", r.residual, r.diagnostics["tol"]),
        _check("scalar Nehari defect", defect, 1e-6),
    ]
    return out, checks


def task_spectrum(cfg: RunConfig) -> tuple[dict, list]:
    g = cfg.build_grid()
    s = clamped_spectrum(g, cfg.count, shift=cfg.params.lambda1)
    gram = np.array([[g.weights @ (a.values * b.values) for b in s.fields] for a in s.fields])
    checks = [_check("min alpha", float(s.alphas.min()), 0.0, ">")]
    checks.append(_check("orthonormality defect", float(np.abs(gram - np.eye(len(s.fields))).max()), 1e-8))
    for k, (a, res, fl) in enumerate(zip(s.alphas, s.residuals, s.residual_floors), 1):
        checks.append(_check(f"eigen-residual k={k}", float(res), float(max(1e-6 * a, fl))))
    return s.to_json(), checks


def _constants(cfg: RunConfig):
    g, p = cfg.build_grid(), cfg.model_params()
    u1, u2 = semitrivial_states(p, g)
    return g, p, u1, u2, thresholds(p, u1.u1, u2.u2)


def task_sobolev(cfg: RunConfig) -> tuple[dict, list]:
    _, p, _, _, c = _constants(cfg)
    checks = [
        _check("S1^2 eigen-residual", c.residuals[0], 1e-6 * c.S1sq),
        _check("S2^2 eigen-residual", c.residuals[1], 1e-6 * c.S2sq),
    ]
    return c.to_json(), checks


def task_classify(cfg: RunConfig) -> tuple[dict, list]:
    g, p, u1, u2, c = _constants(cfg)
    out = {
        "thresholds": c.to_json(),
        "classification": [_classify(1, p, c), _classify(2, p, c)],
        "semitrivial_energies": [eval_energies(u, p).J for u in (u1, u2)],
    }
    checks = [
        _check(f"u{j} residual", max(residual_check(u, p)), BASE_TOL * max(1.0, residual_scale(p.lam[j - 1], p.mu[j - 1], p.N)))
        for j, u in ((1, u1), (2, u2))
    ]
    return out, checks


def task_solve_system(cfg: RunConfig) -> tuple[dict, list]:
    g, p, u1, u2, c = _constants(cfg)
    ends = [eval_energies(u, p).J for u in (u1, u2)]
    out = {
        "thresholds": c.to_json(),
        "classification": [_classify(1, p, c), _classify(2, p, c)],
        "semitrivial_energies": ends,
        "mode": cfg.mode,
    }
    if cfg.mode == "min":
        r = solve_global_min(p, g, _system_opts(cfg), constants=c)
        state = r.state
        out["result"] = r.summary()
        checks = [_check("strong residual", r.residual, r.diagnostics["tol"])]
    else:
        mp = solve_mountain_pass(p, g, _system_opts(cfg), constants=c)
        state = mp.saddle.state
        out["result"] = mp.summary()
        checks = [
            _check("constrained gradient norm", mp.saddle.diagnostics["constrained_gradient_norm"], cfg.solver.gtol),
            _check("level above endpoints", mp.level - max(ends), 0.0, ">"),
        ]
    out["nehari_identities"] = nehari_identities(state, p)
    out["residuals"] = list(residual_check(state, p))
    if cfg.output.field:
        write_field(cfg.output.field, state)
    return out, checks + _identity_checks(state, p)


def _profile_rows(name, prof):
    return [(name, r, f, d) for r, f, d in zip(prof.r, prof.phi, prof.dphi)]


def task_fibering_scan(cfg: RunConfig) -> tuple[dict, list]:
    """Profiles along ``U1`` (scalar) and ``(U1, U2)`` (system); CSV of samples plus a summary."""
    g, p = cfg.build_grid(), cfg.model_params()
    u1, u2 = semitrivial_states(p, g)
    scal = scalar_profile(u1.u1, p.lam1, p.mu1)
    rows = _profile_rows("scalar", scal)
    out = {"admissible": admissibility(p), "scalar": scal.summary()}
    checks = [
        _check("scalar r_crit - 1 at ground state", abs(scal.r_crit - 1.0), 1e-6),
        _check("scalar slope sign changes", scal.sign_changes_of_slope(), 1, "=="),
    ]
    if out["admissible"]:
        prof = system_profile(StatePair(u1.u1, u2.u2), p)
        rows += _profile_rows("system", prof)
        out["system"] = prof.summary()
        checks.append(_check("system slope sign changes", prof.sign_changes_of_slope(), 1, "=="))
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["profile", "r", "phi", "dphi"])
    w.writerows((n, repr(float(r)), repr(float(f)), repr(float(d))) for n, r, f, d in rows)
    out["csv"] = buf.getvalue()
    if cfg.output.csv:
        _atomic_write(cfg.output.csv, out["csv"])
    return out, checks


SWEEP_COLUMNS = [
    "value", "status", "J_u1", "J_u2", "J_min", "min_tag", "S1sq", "S2sq", "Lambda", "Lambda_prime",
    "verdict_u1", "verdict_u2", "alpha1_R4", "error",
]


def _with_axis(cfg: RunConfig, axis: str, value: float) -> RunConfig:
    data = cfg.model_dump()
    if axis in ("R", "M"):
        data["grid"][axis] = int(value) if axis == "M" else float(value)
    else:
        data["params"][axis] = float(value)
    data["task"] = "classify"
    return parse_config(data)


def sweep_row(cfg: RunConfig, axis: str, value: float) -> dict:
    row = dict.fromkeys(SWEEP_COLUMNS, "")
    row["value"] = value
    try:
        c = _with_axis(cfg, axis, value)
        g, p, u1, u2, consts = _constants(c)
        row.update(
            J_u1=eval_energies(u1, p).J,
            J_u2=eval_energies(u2, p).J,
            S1sq=consts.S1sq,
            S2sq=consts.S2sq,
            Lambda=consts.Lambda,
            Lambda_prime=consts.Lambda_prime,
            verdict_u1=_classify(1, p, consts)["verdict"],
            verdict_u2=_classify(2, p, consts)["verdict"],
            alpha1_R4=float(clamped_spectrum(g, 1).alphas[0]) * g.R**4,
        )
        if admissibility(p):
            r = solve_global_min(p, g, _system_opts(c), constants=consts)
            row.update(J_min=r.J, min_tag=r.tag)
        row["status"] = "ok"
    except Exception as exc:  # a failed row is recorded and the sweep continues
        row.update(status="failed", error=f"{type(exc).__name__}: {exc}")
    return row


def sweep(cfg: RunConfig, axis: str, values) -> str:
    """CSV text, one independently computed row per value."""
    rows = pmap(lambda v: sweep_row(cfg, axis, v), list(values))
    buf = _io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def task_sweep(cfg: RunConfig) -> tuple[dict, list]:
    text = sweep(cfg, cfg.axis, cfg.values)
    if cfg.output.csv:
        _atomic_write(cfg.output.csv, text)
    rows = list(csv.DictReader(_io.StringIO(text)))
    failed = sum(r["status"] != "ok" for r in rows)
    return {"axis": cfg.axis, "rows": rows, "csv": text}, [_check("failed rows", failed, 0, "==")]


def task_verify(cfg: RunConfig) -> tuple[dict, list]:
    settings = VerifySettings(N=cfg.grid.N, R=cfg.grid.R, M=cfg.grid.M, seed=cfg.solver.seed or 0)
    results = run_all(settings)
    checks = []
    for r in results:
        if r.error:
            checks.append({"name": f"criterion {r.number}", "pass": False, "error": r.error})
        checks += [{**m.to_json(), "name": f"criterion {r.number}: {m.name}"} for m in r.measures]
    return {"criteria": [r.to_json() for r in results], "lines": [r.line() for r in results]}, checks


TASKS = {
    "solve-scalar": task_solve_scalar,
    "spectrum": task_spectrum,
    "sobolev": task_sobolev,
    "classify": task_classify,
    "solve-system": task_solve_system,
    "fibering-scan": task_fibering_scan,
    "sweep": task_sweep,
    "verify": task_verify,
}


def run(cfg: RunConfig) -> dict:
    """Execute the selected task; the report carries every check with its tolerance."""
    t0 = time.perf_counter()
    report = {
        "header": {"started": datetime.now(timezone.utc).isoformat(timespec="seconds")},
        "version": artifact_version(),
        "config": cfg.model_dump(),
        "task": cfg.task,
    }
    try:
        results, checks = TASKS[cfg.task](cfg)
    except (NonConvergence, FellToSemitrivial) as exc:
        partial = exc.result.summary() if hasattr(exc.result, "summary") else None
        report.update(results={"partial": partial}, checks=[], passed=False, error=str(exc))
        report["header"]["wall_time_s"] = time.perf_counter() - t0
        raise TaskFailed(f"{cfg.task}: {exc}", report) from exc
    except BNLSError as exc:
        report.update(results={}, checks=[], passed=False, error=f"{type(exc).__name__}: {exc}")
        report["header"]["wall_time_s"] = time.perf_counter() - t0
        raise TaskFailed(f"{cfg.task}: {exc}", report) from exc
    report["results"] = results
    report["checks"] = checks
    report["passed"] = all(c["pass"] for c in checks)
    report["header"]["wall_time_s"] = time.perf_counter() - t0
    if cfg.output.report:
        write_json(cfg.output.report, report)
    return report
