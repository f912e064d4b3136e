"""Time integration of the regularised system

    u_t = Lap((u + eps)^m phi(v)),   v_t = Lap v - u v / (1 + eps u)

with zero-flux faces.  u is advanced explicitly in flux form (exact mass
conservation), v by backward Euler with a CG solve of an SPD M-matrix system
(discrete maximum principle).  Both sub-steps read time-n data.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import HypothesisViolation, NonConvergence, SolverFailure, StepRejected
from .field import as3d, check_field

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModelParams:
    m: float
    eps: float
    dim: int

    def __post_init__(self):
        if not self.m > 1:
            raise HypothesisViolation(f"m must exceed 1, got {self.m}")
        if not 0 <= self.eps < 1:
            raise HypothesisViolation(f"eps must lie in [0, 1), got {self.eps}")

    @property
    def boundedness_regime(self):
        """True when m > d/2, where solutions are expected to stay uniformly bounded."""
        return self.m > self.dim / 2


@dataclass
class State:
    u: np.ndarray
    v: np.ndarray
    t: float = 0.0

    def copy(self):
        return State(self.u.copy(), self.v.copy(), self.t)


@dataclass
class StepControl:
    dt_max: float = 1e-2
    dt_min: float = 1e-12
    cfl_safety: float = 0.9
    dt_current: float | None = None
    # relative undershoot threshold: tol_neg = tol_neg_rel * max(u0)
    tol_neg_rel: float = 1e-10
    cg_tol: float = 1e-10
    cg_maxiter: int | None = None
    # when set, every step uses this dt (clipped to output times) and
    # rejections are fatal instead of halving
    dt_fixed: float | None = None

    def __post_init__(self):
        if not 0 < self.cfl_safety <= 1:
            raise ValueError(f"cfl_safety must lie in (0, 1], got {self.cfl_safety}")
        if not 0 < self.dt_min <= self.dt_max:
            raise ValueError(f"need 0 < dt_min <= dt_max, got {self.dt_min}, {self.dt_max}")


def _phi_checked(phi, v):
    pv = phi.eval(v)
    if not np.all(pv > 0):
        raise HypothesisViolation(f"motility {phi.name} is not positive at some v (min {pv.min():.3g})")
    return pv


def mobility_field(u, v, params, phi):
    """w = (max(u, 0) + eps)^m phi(v)."""
    pv = _phi_checked(phi, v)
    return (np.maximum(u, 0.0) + params.eps) ** params.m * pv


def _diffusivity_max(u, v, params, phi):
    base = np.maximum(u, 0.0) + params.eps
    return float(np.max(params.m * base ** (params.m - 1) * phi.eval(v)))


def stable_dt(state, grid, params, phi, control):
    """cfl_safety * min h^2 / (2 d D_max), D_max = max m (u+eps)^(m-1) phi(v),
    clipped to [dt_min, dt_max]."""
    dmax = _diffusivity_max(state.u, state.v, params, phi)
    if dmax <= 0.0:
        return control.dt_max
    dt = control.cfl_safety * min(grid.spacing) ** 2 / (2 * grid.dim * dmax)
    return float(min(max(dt, control.dt_min), control.dt_max))


def step_u_explicit(state, grid, params, phi, dt, tol_neg=0.0):
    """u' = u + dt L_h w.  Raises StepRejected when min u' < -tol_neg."""
    w = mobility_field(state.u, state.v, params, phi)
    out = np.empty(grid.shape)
    kernels.flux_update(as3d(state.u), as3d(w), dt, *grid.inv_h2(), as3d(out))
    umin = float(out.min())
    if umin < -tol_neg:
        raise StepRejected(umin, tol_neg)
    return out


@dataclass
class CGInfo:
    iterations: int = 0
    residual: float = 0.0
    clipped: float = 0.0


def step_v_implicit(state, grid, params, dt, cg_tol=1e-10, cg_maxiter=None, info=None):
    """Solve (I - dt L_h + dt R) v' = v with R = u / (1 + eps u) by CG.

    The matrix is a symmetric M-matrix, so the exact solution satisfies
    0 <= v' <= max v.  CG stops at a relative residual of ``cg_tol``; the
    result is then projected onto [0, max v], which moves it by at most the
    solver error (reported in ``info.clipped``).
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    u = np.maximum(state.u, 0.0)
    r = u / (1.0 + params.eps * u)
    b = np.ascontiguousarray(state.v, dtype=np.float64)
    x = b.copy()
    maxiter = cg_maxiter if cg_maxiter is not None else 10 * grid.n_cells
    it, res = kernels.cg_v(as3d(b), as3d(r), dt, *grid.inv_h2(), as3d(x), cg_tol, maxiter)
    if not res <= cg_tol:
        raise SolverFailure(it, res, cg_tol)
    vmax = float(b.max())
    clipped = max(0.0, -float(x.min()), float(x.max()) - vmax)
    np.clip(x, 0.0, vmax, out=x)
    if info is not None:
        info.iterations, info.residual, info.clipped = it, res, clipped
    return x


@dataclass
class Trajectory:
    """Snapshots at the output times plus per-step solver diagnostics."""

    grid: object
    times: list = field(default_factory=list)
    u: list = field(default_factory=list)
    v: list = field(default_factory=list)
    # per accepted step: (t_new, dt, cg_iterations, cg_residual, rejections)
    steps: list = field(default_factory=list)
    final: State | None = None

    @property
    def u0(self):
        return self.u[0]

    @property
    def v0(self):
        return self.v[0]

    def dt_stats(self):
        if not self.steps:
            return {"n_steps": 0, "dt_min": 0.0, "dt_mean": 0.0, "dt_max": 0.0}
        dts = np.array([s[1] for s in self.steps])
        return {"n_steps": len(dts), "dt_min": float(dts.min()),
                "dt_mean": float(dts.mean()), "dt_max": float(dts.max())}


def output_times(t0, t_end, dt_out):
    n = int(math.floor((t_end - t0) / dt_out + 1e-9))
    ts = [t0 + k * dt_out for k in range(1, n + 1)]
    if not ts or t_end - ts[-1] > 1e-12 * max(1.0, t_end):
        ts.append(t_end)
    else:
        ts[-1] = t_end
    return ts


def advance(state, grid, params, phi, control, t_end, dt_out=None, on_step=None,
            on_snapshot=None, keep_fields=True):
    """Integrate from ``state.t`` to ``t_end``.

    Each step takes dt from :func:`stable_dt` (or ``control.dt_fixed``),
    clipped to land on the output times ``state.t + k * dt_out``.  A u-undershoot
    halves dt and retries; dt below ``dt_min`` raises :class:`NonConvergence`.

    ``on_step(old, new, dt)`` runs after every accepted step and
    ``on_snapshot(state)`` at t0 and every output time.  Returns a
    :class:`Trajectory` (fields stored only if ``keep_fields``).
    """
    if not t_end > state.t:
        raise ValueError(f"t_end={t_end} must exceed the current time {state.t}")
    check_field(state.u, grid, "u")
    check_field(state.v, grid, "v")
    state = State(np.ascontiguousarray(state.u, dtype=np.float64),
                  np.ascontiguousarray(state.v, dtype=np.float64), float(state.t))
    tol_neg = control.tol_neg_rel * float(np.max(np.abs(state.u)))
    traj = Trajectory(grid)

    def snapshot(s):
        traj.times.append(s.t)
        if keep_fields:
            traj.u.append(s.u.copy())
            traj.v.append(s.v.copy())
        if on_snapshot is not None:
            on_snapshot(s)

    snapshot(state)
    targets = output_times(state.t, t_end, dt_out if dt_out else t_end - state.t)
    info = CGInfo()
    cap = None  # after a rejection dt may at most double per step
    for target in targets:
        while state.t < target:
            if control.dt_fixed is not None:
                dt = control.dt_fixed
            else:
                dt_stable = stable_dt(state, grid, params, phi, control)
                dt = dt_stable if cap is None else min(dt_stable, 2.0 * cap)
            remaining = target - state.t
            # absorb round-off remainders instead of taking a sliver step
            last = remaining <= dt * (1 + 1e-9)
            if last:
                dt = remaining
            rejections = 0
            while True:
                try:
                    u_new = step_u_explicit(state, grid, params, phi, dt, tol_neg)
                    break
                except StepRejected as exc:
                    if control.dt_fixed is not None:
                        raise NonConvergence(f"fixed dt={dt:.3e} rejected at t={state.t:.6g}: {exc}") from exc
                    rejections += 1
                    dt *= 0.5
                    last = False
                    if dt < control.dt_min:
                        raise NonConvergence(
                            f"dt underflow below dt_min={control.dt_min:.1e} at t={state.t:.6g} "
                            f"({exc}); possible blow-up or stiffness (m={params.m}, d={params.dim})"
                        ) from exc
            v_new = step_v_implicit(state, grid, params, dt, control.cg_tol, control.cg_maxiter, info)
            new = State(u_new, v_new, target if last else state.t + dt)
            if on_step is not None:
                on_step(state, new, dt)
            traj.steps.append((new.t, dt, info.iterations, info.residual, rejections))
            if rejections:
                log.debug("t=%.6g: %d rejection(s), dt=%.3e", new.t, rejections, dt)
                cap = dt
            elif cap is not None and not last:
                cap = dt if dt < dt_stable else None
            state = new
        snapshot(state)
    if traj.steps:
        control.dt_current = traj.steps[-1][1]
    traj.final = state
    return traj
