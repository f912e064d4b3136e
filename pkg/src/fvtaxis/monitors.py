"""Discrete a priori estimate monitors along a trajectory.

Per-step accumulators (time integrals of gradient energies) are updated from
``advance``'s ``on_step`` hook; :func:`observe` produces one
:class:`MonitorReport` per snapshot.
"""
from __future__ import annotations

import csv
import io
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .errors import HypothesisViolation
from .field import gradient_energy, gradient_magnitude, integral, lp_norm


def default_p_list(m):
    return [2.0, m + 1.0, 4.0]


def default_alpha_list(m):
    return [m / 2 + 0.25, m, m + 1.0]


@dataclass
class MonitorReport:
    t: float
    mass_u: float
    sup_u: float
    sup_v: float
    min_v: float
    lp_u: dict
    grad_v_energy: float
    cum_grad_v: float
    window_Lm1: float
    grad_v_lq: float
    grad_alpha_cum: dict
    kappa_check: bool


def alpha_dissipation(old, new, grid, params, dt, alpha):
    """dt * integral |grad (u + eps)^alpha|^2 at the new state; requires alpha > m/2."""
    if not alpha > params.m / 2:
        raise HypothesisViolation(f"alpha={alpha} must exceed m/2={params.m / 2}")
    return dt * gradient_energy((np.maximum(new.u, 0.0) + params.eps) ** alpha, grid)


@dataclass
class Accumulators:
    """Running time integrals and the trailing-window buffer of one trajectory."""

    grid: object
    params: object
    phi: object
    bounds: object
    alphas: list
    cum_grad_v: float = 0.0
    grad_alpha: dict = field(default_factory=dict)
    kappa_ok: bool = True
    # (t, integral of u^(m+1)) at snapshots inside the trailing unit window
    window: deque = field(default_factory=deque)

    def __post_init__(self):
        for a in self.alphas:
            if not a > self.params.m / 2:
                raise HypothesisViolation(f"alpha={a} must exceed m/2={self.params.m / 2}")
        self.grad_alpha = {a: 0.0 for a in self.alphas}

    def step(self, old, new, dt):
        self.cum_grad_v += dt * gradient_energy(new.v, self.grid)
        for a in self.alphas:
            self.grad_alpha[a] += alpha_dissipation(old, new, self.grid, self.params, dt, a)
        if self.kappa_ok:
            self.kappa_ok = self.bounds.contains(self.phi.eval(new.v), self.phi.deriv(new.v))

    def push_window(self, t, value):
        self.window.append((t, value))
        while len(self.window) > 2 and self.window[1][0] <= t - 1.0:
            self.window.popleft()

    def window_integral(self, t):
        """Trapezoid over [max(t - 1, t0), t], linear interpolation at the left end."""
        pts = list(self.window)
        if len(pts) < 2:
            return 0.0
        start = t - 1.0
        if pts[0][0] < start:
            (t0, f0), (t1, f1) = pts[0], pts[1]
            pts[0] = (start, f0 + (f1 - f0) * (start - t0) / (t1 - t0))
        total = 0.0
        for (ta, fa), (tb, fb) in zip(pts, pts[1:]):
            total += 0.5 * (tb - ta) * (fa + fb)
        return total


def observe(state, grid, params, phi, bounds, acc, p_list, q):
    """Build the report at ``state.t`` and record the window sample."""
    u, v = state.u, state.v
    up = np.maximum(u, 0.0)
    acc.push_window(state.t, integral(up ** (params.m + 1), grid))
    kappa = acc.kappa_ok and bounds.contains(phi.eval(v), phi.deriv(v))
    acc.kappa_ok = kappa
    return MonitorReport(
        t=state.t,
        mass_u=lp_norm(u, grid, 1),
        sup_u=float(np.max(np.abs(u))),
        sup_v=float(v.max()),
        min_v=float(v.min()),
        lp_u={p: lp_norm(u, grid, p) for p in p_list},
        grad_v_energy=gradient_energy(v, grid),
        cum_grad_v=acc.cum_grad_v,
        window_Lm1=acc.window_integral(state.t),
        grad_v_lq=lp_norm(gradient_magnitude(v, grid), grid, q),
        grad_alpha_cum=dict(acc.grad_alpha),
        kappa_check=kappa,
    )


def boundedness_verdict(reports, horizon_split=0.5):
    """Compare sup ||u||_inf over the late window [split T, T] to the early part."""
    if not reports:
        raise ValueError("no monitor reports")
    if not 0 < horizon_split < 1:
        raise ValueError(f"horizon_split must lie in (0, 1), got {horizon_split}")
    t0, T = reports[0].t, reports[-1].t
    cut = t0 + horizon_split * (T - t0)
    sups = np.array([r.sup_u for r in reports])
    ts = np.array([r.t for r in reports])
    early = float(sups[ts <= cut].max())
    late = float(sups[ts >= cut].max())
    if early > 0:
        ratio = late / early
    else:
        ratio = 1.0 if late == 0 else math.inf
    return {
        "sup_u": float(sups.max()),
        "sup_u_early": early,
        "sup_u_late": late,
        "growth_ratio": ratio,
        "bounded_flag": bool(ratio <= 1.01),
        "T": T,
        "horizon_split": horizon_split,
    }


def csv_columns(p_list, alpha_list):
    return (["t", "mass_u", "sup_u", "sup_v", "min_v"]
            + [f"lp_u@{p:g}" for p in p_list]
            + ["grad_v_energy", "cum_grad_v", "window_Lm1", "grad_v_lq"]
            + [f"grad_alpha_cum@{a:g}" for a in alpha_list]
            + ["kappa_ok"])


def _fmt(x):
    return f"{x:.17g}"


def report_row(r):
    return ([_fmt(r.t), _fmt(r.mass_u), _fmt(r.sup_u), _fmt(r.sup_v), _fmt(r.min_v)]
            + [_fmt(x) for x in r.lp_u.values()]
            + [_fmt(r.grad_v_energy), _fmt(r.cum_grad_v), _fmt(r.window_Lm1), _fmt(r.grad_v_lq)]
            + [_fmt(x) for x in r.grad_alpha_cum.values()]
            + [str(int(r.kappa_check))])


def reports_to_csv(reports, p_list, alpha_list):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(csv_columns(p_list, alpha_list))
    for r in reports:
        w.writerow(report_row(r))
    return buf.getvalue()


def read_monitor_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
