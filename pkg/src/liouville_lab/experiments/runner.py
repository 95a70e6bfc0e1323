"""Execute scenarios point by point and assemble run artifacts.

Layout of a run directory::

    <root>/<scenario name>/
        manifest.json        config hash, versions, per-point status
        summary.csv          one row per parameter point (deterministic formatting)
        <point label>/       fields (VTK + CSV), trajectories, reports
"""
from __future__ import annotations

import csv
import json
import math
import os
import platform
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import __version__
from ..energy import BallExitError, build_v0, minimize_local, stability_probe, to_solution
from ..geometry import (
    CounterexampleParams,
    GeometryError,
    boundary_distance_C0,
    boundary_distance_C1,
    is_directionally_convex,
    is_star_shaped,
    make_comb,
    make_counterexample,
    make_disk,
    make_family,
    rasterize,
)
from ..profiles1d import radialize, shoot_omega, shoot_omega_delta, solve_traveling_wave
from ..solver import (
    Field2D,
    check_subsolution_order,
    classify_solution,
    disk_region,
    run_invasion,
    shadow_region,
    solve_steady,
    steady_residual,
)
from .config import Point, Scenario, load_scenario

OUTPUT_ENV = "LIOUVILLE_LAB_OUTPUT_ROOT"
OK, FAILED = "OK", "FAILED"

COLUMNS = [
    "point", "family", "eps", "eta", "h", "status", "verdict", "min_value", "argmin_x", "argmin_y",
    "residual", "order_gap", "probe_late_max", "speed", "J_value", "J_initial", "H1_distance",
    "energy_status", "stable", "d_C0", "d_C1", "star_shaped", "dir_convex_e1", "dir_convex_e2",
    "n_active", "message",
]


class RunError(RuntimeError):
    pass


@dataclass
class RunResult:
    run_dir: Path
    rows: list[dict]

    @property
    def n_failed(self) -> int:
        return sum(r["status"] == FAILED for r in self.rows)

    @property
    def exit_code(self) -> int:
        return 0 if self.n_failed == 0 else 1


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        return f"{v:.10g}"
    return str(v).replace("\n", " ")


def output_root(scenario: Scenario, override: str | Path | None = None) -> Path:
    if override is not None:
        return Path(override)
    env = os.environ.get(OUTPUT_ENV)
    return Path(env) if env else Path(scenario.output)


# obstacle construction ---------------------------------------------------------


def _counterexample_params(s: Scenario, pt: Point) -> CounterexampleParams:
    return CounterexampleParams(eps=pt.eps, eta=pt.eta, **s.params)


def _obstacle(s: Scenario, pt: Point):
    if s.family == "counterexample":
        return make_counterexample(_counterexample_params(s, pt), pt.h)
    return make_family(s.family, pt.eps, s.params, pt.h)


def _limit_body(s: Scenario, pt: Point):
    if s.family == "counterexample":
        return make_disk(s.params.get("R0", 1.0), pt.h)
    if s.family == "comb":
        return make_comb(0.0, s.params.get("width", 2.0), s.params.get("height", 1.0),
                         int(s.params.get("n_teeth", 5)), pt.h)
    return make_family(s.family, 0.0, s.params, pt.h)


def _predicates(b) -> dict:
    out = {}
    if b.is_empty:
        return {"star_shaped": True, "dir_convex_e1": True, "dir_convex_e2": True}
    try:
        out["star_shaped"] = is_star_shaped(b).verdict
    except GeometryError:
        out["star_shaped"] = None
    out["dir_convex_e1"] = is_directionally_convex(b, (1.0, 0.0)).verdict
    out["dir_convex_e2"] = is_directionally_convex(b, (0.0, 1.0)).verdict
    return out


def _mask(s: Scenario, pt: Point, b):
    return rasterize(b, pt.h, s.R_outer, decay_length=s.nonlinearity.decay_length)


def _write_field(field: Field2D, d: Path, name: str, snapshots: bool) -> None:
    if snapshots:
        field.to_vtk(d / f"{name}.vtk", name)
        field.to_csv(d / f"{name}.csv", name)


def _cavity(s: Scenario, pt: Point, mask):
    sc = _counterexample_params(s, pt).scaled()
    return disk_region(mask, sc["center"], sc["R1"])


def _shadow(b, mask):
    r = b.max_radius() if not b.is_empty else 1.0
    return shadow_region(mask, r, r + 2.0, r)


# point kinds ---------------------------------------------------------------


def _run_steady(s: Scenario, pt: Point, d: Path) -> dict:
    nl = s.nonlinearity
    b = _obstacle(s, pt)
    mask = _mask(s, pt, b)
    init = s.steady.get("init", "auto")
    if init == "auto":
        init = "v0" if s.family == "counterexample" else "radial"
    R0 = b.max_radius()
    if init == "radial":
        u0 = radialize(shoot_omega(nl), R0, mask, 1.0)
    elif init == "v0":
        if s.family != "counterexample":
            raise RunError("steady.init = v0 needs the counterexample family")
        v0 = build_v0(mask, _counterexample_params(s, pt))
        u0 = to_solution(mask, v0)
    else:
        u0 = Field2D.constant(mask, 1.0)
    u = solve_steady(mask, nl, u0, s.solver)
    rep = classify_solution(u, nl, s.steady.get("tol_liouville", 1e-2))
    delta = s.steady.get("delta", 0.1)
    order = check_subsolution_order(u, shoot_omega_delta(nl.truncated(delta)), R0)
    _write_field(u, d, "u", s.snapshots)
    row = {**rep.to_dict(), "order_gap": order.worst_gap, "n_active": mask.n_active}
    row.update(_predicates(b))
    (d / "report.json").write_text(json.dumps(
        {"classification": rep.to_dict(), "order_check": vars(order), "iterations": u.iterations,
         "newton_history": u.meta.get("newton_history", []), "symmetry_defect": u.symmetry_defect()},
        indent=2, sort_keys=True, default=str))
    return row


def _run_invasion(s: Scenario, pt: Point, d: Path) -> dict:
    nl = s.nonlinearity
    b = _obstacle(s, pt)
    mask = _mask(s, pt, b)
    wave = solve_traveling_wave(nl)
    probe_kind = s.invasion.get("probe", "auto")
    if probe_kind == "auto":
        probe_kind = "cavity" if s.family == "counterexample" else ("shadow" if not b.is_empty else "all")
    if probe_kind == "cavity":
        if s.family != "counterexample":
            raise RunError("invasion.probe = cavity needs the counterexample family")
        probe = _cavity(s, pt, mask)
    elif probe_kind == "shadow":
        probe = _shadow(b, mask)
    else:
        probe = None
    res = run_invasion(
        mask, nl, wave, float(s.invasion.get("t_end", 40.0)), s.solver, dt=float(s.invasion.get("dt", 0.05)),
        probe=probe, record_every=int(s.invasion.get("record_every", 10)),
        tol_liouville=s.invasion.get("tol_liouville", 1e-2),
    )
    res.to_csv(d / "trajectory.csv")
    _write_field(res.final, d, "u", s.snapshots)
    late = res.times >= 0.5 * res.times[-1]
    row = {**res.report.to_dict(), "probe_late_max": float(res.probe_min[late].max()), "speed": res.speed,
           "n_active": mask.n_active}
    row.update(_predicates(b))
    (d / "report.json").write_text(json.dumps(
        {"classification": res.report.to_dict(), "stalled": res.stalled(nl.theta), "wave_speed": wave.speed,
         "measured_speed": res.speed, "probe": probe_kind}, indent=2, sort_keys=True))
    return row


def _run_energy(s: Scenario, pt: Point, d: Path) -> dict:
    if s.family != "counterexample":
        raise RunError("energy_min needs the counterexample family")
    nl = s.nonlinearity
    p = _counterexample_params(s, pt)
    b = _obstacle(s, pt)
    mask = _mask(s, pt, b)
    v0 = build_v0(mask, p)
    sc = p.scaled()
    region = disk_region(mask, sc["center"], sc["R2"])
    row = {"n_active": mask.n_active}
    try:
        v, rep = minimize_local(mask, nl, v0, s.energy.get("delta_ball"), s.minimize, region=region)
    except BallExitError as exc:
        rep = exc.report
        row.update({"verdict": "NO_MINIMIZER", "energy_status": rep.status, "J_value": rep.J_value,
                    "J_initial": rep.J_initial, "H1_distance": rep.H1_distance_to_v0,
                    "message": str(exc)})
        (d / "energy_report.json").write_text(rep.to_json())
        return row
    if not rep.strictly_decreasing:
        raise RunError("energy did not decrease strictly along the descent")
    rep.stable = stability_probe(mask, nl, v, int(s.energy.get("n_probes", 8)),
                                 s.energy.get("probe_magnitude"), seed=s.seed, region=region)
    u = to_solution(mask, v)
    u.residual = float(np.max(np.abs(steady_residual(mask, nl, u))))
    if s.energy.get("cross_check", True):
        us = solve_steady(mask, nl, u, s.solver)
        row["message"] = f"steady cross-check max|du|={np.max(np.abs(us.values - u.values)):.3e}"
        u = us
    cls = classify_solution(u, nl)
    _write_field(v, d, "v", s.snapshots)
    _write_field(u, d, "u", s.snapshots)
    (d / "energy_report.json").write_text(rep.to_json())
    row.update(cls.to_dict())
    row.update({"energy_status": rep.status, "J_value": rep.J_value, "J_initial": rep.J_initial,
                "H1_distance": rep.H1_distance_to_v0, "stable": rep.stable})
    if rep.status != "SUCCESS":
        row["verdict"] = rep.status
    return row


def _run_metrics(s: Scenario, pt: Point, d: Path) -> dict:
    b = _obstacle(s, pt)
    lim = _limit_body(s, pt)
    spacing = pt.h / 4.0
    row = {"d_C0": boundary_distance_C0(b, lim, spacing), "d_C1": boundary_distance_C1(b, lim, spacing)}
    row.update(_predicates(b))
    if s.snapshots:
        b.to_csv(d / "boundary.csv")
    return row


def _run_profiles(s: Scenario, pt: Point, d: Path) -> dict:
    nl = s.nonlinearity
    om = shoot_omega(nl)
    delta = s.steady.get("delta", 0.1)
    od = shoot_omega_delta(nl.truncated(delta))
    wave = solve_traveling_wave(nl)
    om.to_csv(d / "omega.csv")
    od.to_csv(d / "omega_delta.csv")
    wave.to_csv(d / "wave.csv")
    exact = math.sqrt(nl.amplitude / 2.0) * (1.0 - 2.0 * nl.theta)
    return {"speed": wave.speed, "residual": wave.residual,
            "message": f"exact speed {exact:.10g}; omega drift {om.hamiltonian_drift:.3e}"}


RUNNERS = {
    "steady": _run_steady,
    "invasion": _run_invasion,
    "energy_min": _run_energy,
    "geometry_metrics": _run_metrics,
    "profiles": _run_profiles,
}


def run_point(s: Scenario, pt: Point, run_dir: Path) -> dict:
    """Run one parameter point; any exception becomes a FAILED row."""
    d = run_dir / pt.label
    d.mkdir(parents=True, exist_ok=True)
    row = {"point": pt.label, "family": s.family, "eps": pt.eps, "eta": pt.eta, "h": pt.h}
    try:
        row.update(RUNNERS[s.kind](s, pt, d))
        row["status"] = OK
    except Exception as exc:  # noqa: BLE001 - sweep isolation
        row["status"] = FAILED
        row["message"] = f"{type(exc).__name__}: {exc}"
        (d / "error.txt").write_text(traceback.format_exc())
    return row


def _run_point_star(args):
    return run_point(*args)


def run_scenario(s: Scenario, out_root: str | Path | None = None, workers: int | None = None) -> RunResult:
    run_dir = output_root(s, out_root) / s.name
    run_dir.mkdir(parents=True, exist_ok=True)
    pts = s.points()
    workers = workers or s.workers
    t0 = time.perf_counter()
    jobs = [(s, pt, run_dir) for pt in pts]
    if workers > 1 and len(pts) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_point_star, jobs))
    else:
        rows = [_run_point_star(j) for j in jobs]
    write_summary(run_dir / "summary.csv", rows)
    write_manifest(run_dir / "manifest.json", s, rows, time.perf_counter() - t0)
    return RunResult(run_dir, rows)


def write_summary(path: Path, rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for r in rows:
            w.writerow([_fmt(r.get(c)) for c in COLUMNS])


def _versions() -> dict:
    import scipy
    import shapely

    return {"liouville_lab": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "shapely": shapely.__version__}


def write_manifest(path: Path, s: Scenario, rows: list[dict], seconds: float) -> None:
    doc = {
        "scenario": s.name,
        "kind": s.kind,
        "config_sha256": s.config_hash(),
        "config": s.raw,
        "seed": s.seed,
        "versions": _versions(),
        "points": [{"point": r["point"], "status": r["status"]} for r in rows],
        "n_failed": sum(r["status"] == FAILED for r in rows),
        "wall_seconds": round(seconds, 3),
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def read_summary(run_dir: str | Path) -> list[dict]:
    with open(Path(run_dir) / "summary.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def _num(x: str) -> float:
    try:
        return float(x)
    except ValueError:
        return -math.inf


REPORT_COLUMNS = ["point", "status", "verdict", "min_value", "residual", "order_gap", "probe_late_max",
                  "speed", "J_value", "H1_distance", "stable", "d_C0", "d_C1", "star_shaped",
                  "dir_convex_e1", "dir_convex_e2", "message"]


def report_summary(run_dir: str | Path) -> str:
    """Markdown table of a finished run, rows sorted by (eps, eta, h)."""
    run_dir = Path(run_dir)
    if not (run_dir / "manifest.json").is_file():
        raise RunError(f"{run_dir} has no manifest.json; not a completed run directory")
    manifest = json.loads((run_dir / "manifest.json").read_text())
    rows = sorted(read_summary(run_dir), key=lambda r: (_num(r["eps"]), _num(r["eta"]), _num(r["h"])))
    cols = [c for c in REPORT_COLUMNS if any(r.get(c) for r in rows)]
    lines = [f"## {manifest['scenario']} ({manifest['kind']})", "",
             "| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
    for r in rows:
        lines.append("| " + " | ".join(r.get(c, "") for c in cols) + " |")
    lines += ["", f"{len(rows)} points, {manifest['n_failed']} failed; config sha256 {manifest['config_sha256'][:12]}"]
    return "\n".join(lines)


def run_config(path: str | Path, out_root=None, workers=None) -> RunResult:
    return run_scenario(load_scenario(path), out_root, workers)


__all__ = ["COLUMNS", "OUTPUT_ENV", "RunError", "RunResult", "report_summary", "run_config", "run_point",
           "run_scenario"]
