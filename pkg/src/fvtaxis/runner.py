"""Single runs, sweeps and their on-disk artifacts."""
from __future__ import annotations

import concurrent.futures
import csv
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import InvariantViolation, NonConvergence, SolverFailure
from .field import integral, write_snapshot
from .monitors import Accumulators, boundedness_verdict, observe, reports_to_csv
from .motility import compute_bounds
from .stepper import State, advance

MASS_TOL = 1e-12
ENERGY_TOL = 1e-10
MAXPRINCIPLE_SLACK = 1e-14


@dataclass
class InvariantLog:
    """Worst observed defects of the exactly-provable discrete invariants."""

    mass_drift: float = 0.0           # max relative |M(t) - M(0)| / M(0)
    vmax_increase: float = 0.0        # max over steps of max v' - max v
    vmin: float = math.inf            # min over steps of min v
    energy_excess: float = -math.inf  # max of 1/2|v|^2 + cum - 1/2|v0|^2
    kappa_ok: bool = True

    def violations(self):
        out = []
        if self.mass_drift > MASS_TOL:
            out.append(f"mass drift {self.mass_drift:.3e} > {MASS_TOL:.0e}")
        if self.vmax_increase > MAXPRINCIPLE_SLACK:
            out.append(f"max v increased by {self.vmax_increase:.3e}")
        if self.vmin < 0:
            out.append(f"min v = {self.vmin:.3e} < 0")
        if self.energy_excess > ENERGY_TOL:
            out.append(f"energy inequality violated by {self.energy_excess:.3e}")
        if not self.kappa_ok:
            out.append("phi(v) left [kappa1, kappa2] or |phi'(v)| exceeded kappa3")
        return out


@dataclass
class SimResult:
    config: object
    trajectory: object
    reports: list
    verdict: dict
    bounds: object
    invariants: InvariantLog
    p_list: list = field(default_factory=list)
    alpha_list: list = field(default_factory=list)

    def monitor_csv(self):
        return reports_to_csv(self.reports, self.p_list, self.alpha_list)


def simulate(cfg, keep_fields=False, strict=False, t_end=None, extra_snapshot=None):
    """Advance ``cfg`` to its horizon with monitors and invariant checks.

    ``extra_snapshot(state)`` is called after the monitors at every output time.
    """
    grid, params, phi = cfg.grid, cfg.params, cfg.phi
    u0, v0 = cfg.initial_data()
    bounds = compute_bounds(phi, float(v0.max()))
    acc = Accumulators(grid, params, phi, bounds, list(cfg.alpha_list))
    inv = InvariantLog()
    mass0 = integral(u0, grid)
    half_v0 = 0.5 * float(np.dot(v0.ravel(), v0.ravel())) * grid.cell_volume
    reports = []
    p_list = list(cfg.p_list)

    def on_step(old, new, dt):
        acc.step(old, new, dt)
        inv.vmax_increase = max(inv.vmax_increase, float(new.v.max() - old.v.max()))
        inv.vmin = min(inv.vmin, float(new.v.min()))

    def on_snapshot(s):
        rep = observe(s, grid, params, phi, bounds, acc, p_list, cfg.q)
        reports.append(rep)
        scale = mass0 if mass0 > 0 else 1.0
        inv.mass_drift = max(inv.mass_drift, abs(rep.mass_u - mass0) / scale)
        half_v = 0.5 * float(np.dot(s.v.ravel(), s.v.ravel())) * grid.cell_volume
        inv.energy_excess = max(inv.energy_excess, half_v + acc.cum_grad_v - half_v0)
        inv.kappa_ok = inv.kappa_ok and rep.kappa_check
        if extra_snapshot is not None:
            extra_snapshot(s)

    traj = advance(State(u0, v0, 0.0), grid, params, phi, cfg.control(),
                   cfg.T if t_end is None else t_end, dt_out=cfg.dt_out,
                   on_step=on_step, on_snapshot=on_snapshot, keep_fields=keep_fields)
    verdict = boundedness_verdict(reports, cfg.horizon_split)
    verdict["m_gt_half_d"] = params.boundedness_regime
    res = SimResult(cfg, traj, reports, verdict, bounds, inv, p_list, list(cfg.alpha_list))
    if strict and inv.violations():
        raise InvariantViolation("; ".join(inv.violations()))
    return res


# -- artifacts ----------------------------------------------------------------

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_INVARIANT = 0, 2, 3, 4


def _now():
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _write_diagnostics(path, traj):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "t", "dt", "cg_iterations", "cg_residual", "rejections"])
        for i, (t, dt, it, res, rej) in enumerate(traj.steps):
            w.writerow([i + 1, f"{t:.17g}", f"{dt:.17g}", it, f"{res:.17g}", rej])


def run(cfg, out_dir, snapshot_every=None):
    """Run one config and write its artifacts into ``out_dir``.

    Files: config.json, monitor.csv, diagnostics.csv, verdict.json,
    snapshots/{u,v}_NNNNN.csv, manifest.json.  Returns the manifest dict; its
    ``exit_status`` maps to the CLI exit code.
    """
    out = Path(out_dir)
    (out / "snapshots").mkdir(parents=True, exist_ok=True)
    manifest = {"config_hash": cfg.hash(), "label": cfg.label, "start": _now(),
                "config": cfg.to_dict(), "artifacts": [], "exit_status": EXIT_OK, "status": "ok"}
    t_wall = time.perf_counter()

    def emit(name, data):
        p = out / name
        p.write_text(data) if isinstance(data, str) else p.write_bytes(data)
        manifest["artifacts"].append(name)

    emit("config.json", cfg.emit())
    cadence = snapshot_every if snapshot_every is not None else cfg.snapshot_every
    grid = cfg.grid
    snap_count = [0]
    next_dump = [0.0]
    snap_last = [-1.0]

    def dump(s, force=False):
        if not force and (cadence is None or s.t + 1e-12 < next_dump[0]):
            return
        k = snap_count[0]
        for name, f in (("u", s.u), ("v", s.v)):
            rel = f"snapshots/{name}_{k:05d}.csv"
            write_snapshot(out / rel, f, grid, t=s.t, field=name)
            manifest["artifacts"].append(rel)
        snap_count[0] += 1
        snap_last[0] = s.t
        if cadence is not None:
            next_dump[0] = s.t + cadence

    try:
        res = simulate(cfg, extra_snapshot=lambda s: dump(s, force=s.t == 0.0))
    except (NonConvergence, SolverFailure) as exc:
        manifest.update(exit_status=EXIT_NONCONVERGENCE, status="nonconvergence", error=str(exc))
        res = None
    if res is not None:
        if cadence is None or snap_last[0] < res.trajectory.final.t:
            dump(res.trajectory.final, force=True)
        emit("monitor.csv", res.monitor_csv())
        diag = out / "diagnostics.csv"
        _write_diagnostics(diag, res.trajectory)
        manifest["artifacts"].append("diagnostics.csv")
        verdict = dict(res.verdict)
        verdict.update(res.trajectory.dt_stats())
        verdict["invariants"] = {
            "mass_drift": res.invariants.mass_drift,
            "vmax_increase": res.invariants.vmax_increase,
            "vmin": res.invariants.vmin,
            "energy_excess": res.invariants.energy_excess,
            "kappa_ok": res.invariants.kappa_ok,
        }
        verdict["kappa"] = [res.bounds.kappa1, res.bounds.kappa2, res.bounds.kappa3]
        emit("verdict.json", json.dumps(verdict, indent=2, sort_keys=True) + "\n")
        bad = res.invariants.violations()
        if bad:
            manifest.update(exit_status=EXIT_INVARIANT, status="invariant_violation", error="; ".join(bad))
    manifest["end"] = _now()
    manifest["wall_seconds"] = round(time.perf_counter() - t_wall, 3)
    manifest["artifacts"].append("manifest.json")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return manifest


# -- sweeps -------------------------------------------------------------------

def _sweep_member(args):
    i, cfg_dict, out_dir = args
    from .config import validate
    row = {"member": i}
    try:
        cfg = validate(cfg_dict)
        row.update(m=cfg.m, dim=cfg.dim, m_gt_half_d=cfg.params.boundedness_regime)
        manifest = run(cfg, Path(out_dir) / f"member_{i:03d}")
        row["status"] = manifest["status"]
        row["exit_status"] = manifest["exit_status"]
        vpath = Path(out_dir) / f"member_{i:03d}" / "verdict.json"
        if vpath.exists():
            v = json.loads(vpath.read_text())
            for k in ("sup_u", "sup_u_late", "growth_ratio", "bounded_flag",
                      "n_steps", "dt_min", "dt_mean", "dt_max"):
                row[k] = v[k]
        if "error" in manifest:
            row["error"] = manifest["error"]
    except Exception as exc:  # one member failing must not stop the sweep
        row.update(status="failed", exit_status=EXIT_CONFIG if "config" in type(exc).__name__.lower() else 1,
                   error=f"{type(exc).__name__}: {exc}")
    return row


SUMMARY_COLUMNS = ["member", "m", "dim", "m_gt_half_d", "status", "exit_status", "sup_u",
                   "sup_u_late", "growth_ratio", "bounded_flag", "n_steps", "dt_min",
                   "dt_mean", "dt_max", "error"]


def sweep(base, overrides, out_dir, workers=1):
    """Run ``base`` once per override dict; write summary.csv at the end."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    members = []
    for i, ov in enumerate(overrides):
        d = base.to_dict()
        d.update(ov)
        members.append((i, d, str(out)))
    if workers > 1 and len(members) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_sweep_member, members))
    else:
        rows = [_sweep_member(mb) for mb in members]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n", extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: (f"{v:.17g}" if isinstance(v, float) else v) for k, v in r.items()})
    return rows


def sweep_m(base, m_list, out_dir, workers=1):
    for m in m_list:
        if not m > 1:
            raise ValueError(f"every m must exceed 1, got {m}")
    return sweep(base, [{"m": float(m), "alpha_list": None, "p_list": None} for m in m_list],
                 out_dir, workers)
