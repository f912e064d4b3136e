"""Structural checks on computed trajectories.

* weak-form residuals of both equations against closed-form test functions,
* the (p, vphi)-testing identity for d/dt of integral (u+eps)^p vphi,
* the eps -> 0 Cauchy study and Richardson self-convergence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .field import face_centers, face_means, integral, lp_norm, restrict
from .stepper import State, stable_dt


def wendland(r):
    """C^2 quintic bump (1 - r)^4 (1 + 4 r) on [0, 1), zero beyond."""
    r = np.abs(r)
    return np.where(r < 1, (1 - r) ** 4 * (1 + 4 * r), 0.0)


def wendland_slope(r):
    """d/dr of :func:`wendland` for signed r (odd in r)."""
    a = np.abs(r)
    return np.where(a < 1, -20 * r * (1 - a) ** 3, 0.0)


@dataclass(frozen=True)
class TestFunction:
    """psi(x, t) = s(t / t_support) * prod_k b((x_k - c_k) / R_k), b = s = wendland.

    Supported in the box around ``center`` and in time on [0, t_support).
    """

    __test__ = False  # not a pytest class

    center: tuple
    radius: tuple
    t_support: float

    def __post_init__(self):
        if len(self.center) != len(self.radius):
            raise ValueError("center and radius must have the same length")
        if not self.t_support > 0 or any(r <= 0 for r in self.radius):
            raise ValueError("radii and t_support must be positive")

    def fits(self, grid):
        return all(c - r >= 0 and c + r <= L
                   for c, r, L in zip(self.center, self.radius, grid.lengths))

    def time(self, t):
        tau = t / self.t_support
        return float(wendland(tau)), float(wendland_slope(tau)) / self.t_support

    def spatial(self, coords):
        """Values of the spatial factor at ``coords`` (list of arrays)."""
        out = 1.0
        for x, c, r in zip(coords, self.center, self.radius):
            out = out * wendland((x - c) / r)
        return out

    def spatial_grad(self, coords, axis):
        out = 1.0
        for k, (x, c, r) in enumerate(zip(coords, self.center, self.radius)):
            z = (x - c) / r
            out = out * (wendland_slope(z) / r if k == axis else wendland(z))
        return out

    def psi(self, coords, t):
        return self.time(t)[0] * self.spatial(coords)

    def psi_t(self, coords, t):
        return self.time(t)[1] * self.spatial(coords)


def _trapezoid_weights(times):
    t = np.asarray(times, dtype=float)
    w = np.zeros_like(t)
    if t.size > 1:
        dt = np.diff(t)
        w[:-1] += 0.5 * dt
        w[1:] += 0.5 * dt
    return w


def _face_dot(grid, diff_of, coef_faces, psi, t):
    """Sum over interior faces of (face difference of ``diff_of``) * coef *
    d_k psi(face centre) * cell volume."""
    total = 0.0
    for k, h in enumerate(grid.spacing):
        d = np.diff(diff_of, axis=k) / h
        g = psi.spatial_grad(face_centers(grid, k), k)
        c = 1.0 if coef_faces is None else coef_faces[k]
        total += float(np.sum(d * c * g))
    return psi.time(t)[0] * total * grid.cell_volume


def _check_horizon(traj, psi):
    if psi.t_support > traj.times[-1] * (1 + 1e-12):
        raise ValueError(f"test function support {psi.t_support} exceeds trajectory horizon {traj.times[-1]}")
    if not traj.u:
        raise ValueError("trajectory has no stored fields (run with keep_fields=True)")


def weak_terms_u(traj, psi, phi, m):
    """The four integrals of the u identity:
    (-int int u psi_t, -int u0 psi(0), -int int phi(v) grad u^m . grad psi,
     -int int phi'(v) u^m grad v . grad psi)."""
    _check_horizon(traj, psi)
    grid = traj.grid
    X = grid.mesh()
    w = _trapezoid_weights(traj.times)
    a = b = c = 0.0
    for wt, t, u, v in zip(w, traj.times, traj.u, traj.v):
        if t >= psi.t_support or wt == 0.0:
            continue
        up = np.maximum(u, 0.0)
        um = up ** m
        a -= wt * integral(u * psi.psi_t(X, t), grid)
        b -= wt * _face_dot(grid, um, face_means(phi.eval(v), grid), psi, t)
        c -= wt * _face_dot(grid, v, face_means(phi.deriv(v) * um, grid), psi, t)
    init = -integral(traj.u[0] * psi.psi(X, traj.times[0]), grid)
    return a, init, b, c


def weak_terms_v(traj, psi):
    """(-int int v psi_t, -int v0 psi(0), -int int grad v . grad psi, -int int u v psi)."""
    _check_horizon(traj, psi)
    grid = traj.grid
    X = grid.mesh()
    w = _trapezoid_weights(traj.times)
    a = b = c = 0.0
    for wt, t, u, v in zip(w, traj.times, traj.u, traj.v):
        if t >= psi.t_support or wt == 0.0:
            continue
        a -= wt * integral(v * psi.psi_t(X, t), grid)
        b -= wt * _face_dot(grid, v, None, psi, t)
        c -= wt * integral(u * v * psi.psi(X, t), grid)
    init = -integral(traj.v[0] * psi.psi(X, traj.times[0]), grid)
    return a, init, b, c


def weak_residual_u(traj, psi, phi, m):
    a, init, b, c = weak_terms_u(traj, psi, phi, m)
    return abs((a + init) - (b + c))


def weak_residual_v(traj, psi):
    """Residual of the v identity with the limit consumption term u v (eps runs
    carry an O(eps) defect from u v / (1 + eps u))."""
    a, init, b, c = weak_terms_v(traj, psi)
    return abs((a + init) - (b + c))


@dataclass
class ResidualReport:
    r_u: float
    r_v: float
    norm_u: float
    norm_v: float
    cells: tuple
    n_snapshots: int
    # u^m grad v stays finite (integrability requirement, flag only)
    flux_finite: bool = True

    @property
    def normalized_u(self):
        return self.r_u / self.norm_u if self.norm_u > 0 else 0.0

    @property
    def normalized_v(self):
        return self.r_v / self.norm_v if self.norm_v > 0 else 0.0


def residual_report(traj, psi, phi, m):
    tu = weak_terms_u(traj, psi, phi, m)
    tv = weak_terms_v(traj, psi)
    finite = all(np.all(np.isfinite(np.maximum(u, 0) ** m)) for u in traj.u)
    return ResidualReport(
        r_u=abs((tu[0] + tu[1]) - (tu[2] + tu[3])),
        r_v=abs((tv[0] + tv[1]) - (tv[2] + tv[3])),
        norm_u=sum(abs(x) for x in tu),
        norm_v=sum(abs(x) for x in tv),
        cells=traj.grid.cells,
        n_snapshots=len(traj.times),
        flux_finite=bool(finite and all(np.isfinite(tu)) and all(np.isfinite(tv))),
    )


# -- testing identity -----------------------------------------------------------

@dataclass
class IdentityResidual:
    absolute: float
    scale: float
    terms: tuple

    @property
    def relative(self):
        return self.absolute / self.scale if self.scale > 0 else 0.0


def _face_pairs(f, k):
    lo = [slice(None)] * f.ndim
    hi = [slice(None)] * f.ndim
    lo[k] = slice(None, -1)
    hi[k] = slice(1, None)
    return f[tuple(lo)], f[tuple(hi)]


def moment_identity_residual(old, new, grid, params, phi, p, vphi):
    """Residual of (1/p) d/dt int (u+eps)^p vphi = T1 + T2 + T3 + T4 between two
    consecutive accepted states.

    The left side is the forward difference over ``new.t - old.t``.  The four
    integrals are assembled at ``old`` on interior faces with the discrete
    product rule  D(FG) = mean(F) DG + mean(G) DF,  where F = (u+eps)^m,
    G = phi(v), H = (u+eps)^(p-1):

        T1 ~ -m(p-1) int (u+eps)^(m+p-3) phi(v) |grad u|^2 vphi   ->  -G DF vphi DH
        T2 ~ -(p-1) int (u+eps)^(m+p-2) phi'(v) vphi grad u.grad v -> -F DG vphi DH
        T3 ~ -m int (u+eps)^(m+p-2) phi(v) grad u.grad vphi          -> -G DF H Dvphi
        T4 ~ -int (u+eps)^(m+p-1) phi'(v) grad v.grad vphi           -> -F DG H Dvphi

    (bars omitted).  Their sum is exactly the summation-by-parts form of the
    scheme, so the residual measures only the time discretisation.
    ``vphi`` is an array of cell values.
    """
    if not p > 0:
        raise ValueError(f"p must be positive, got {p}")
    dt = new.t - old.t
    if not dt > 0:
        raise ValueError("states must be consecutive in time")
    eps, m = params.eps, params.m
    vphi = np.broadcast_to(np.asarray(vphi, dtype=float), grid.shape)
    base0 = np.maximum(old.u, 0.0) + eps
    base1 = np.maximum(new.u, 0.0) + eps
    vol = grid.cell_volume
    lhs = math.fsum(((base1 ** p - base0 ** p) * vphi).ravel()) * vol / (p * dt)
    a0 = abs(math.fsum((base0 ** p * vphi).ravel())) * vol
    a1 = abs(math.fsum((base1 ** p * vphi).ravel())) * vol

    F = base0 ** m
    G = phi.eval(old.v)
    H = base0 ** (p - 1)
    terms = [0.0, 0.0, 0.0, 0.0]
    for k, h in enumerate(grid.spacing):
        pairs = [_face_pairs(x, k) for x in (F, G, H, vphi)]
        (F0, F1), (G0, G1), (H0, H1), (P0, P1) = pairs
        dF, dG, dH, dP = F1 - F0, G1 - G0, H1 - H0, P1 - P0
        mF, mG, mH, mP = 0.5 * (F0 + F1), 0.5 * (G0 + G1), 0.5 * (H0 + H1), 0.5 * (P0 + P1)
        c = vol / h ** 2
        terms[0] -= float(np.sum(mG * dF * mP * dH)) * c
        terms[1] -= float(np.sum(mF * dG * mP * dH)) * c
        terms[2] -= float(np.sum(mG * dF * mH * dP)) * c
        terms[3] -= float(np.sum(mF * dG * mH * dP)) * c
    rhs = math.fsum(terms)
    scale = max(a0, a1) / (p * dt) + sum(abs(x) for x in terms)
    return IdentityResidual(abs(lhs - rhs), scale, tuple(terms))


# -- studies --------------------------------------------------------------------

def space_time_l2(grid, times, a_list, b_list):
    """sqrt(int_0^T int (a - b)^2) with trapezoid weights in time."""
    w = _trapezoid_weights(times)
    s = 0.0
    for wt, a, b in zip(w, a_list, b_list):
        d = a - b
        s += wt * float(np.dot(d.ravel(), d.ravel())) * grid.cell_volume
    return math.sqrt(s)


def eps_limit_study(base, eps_list, with_limit=True):
    """Pairwise space-time L2 distances between runs at consecutive eps.

    Returns ``{"rows": [{"eps": e_j, "eps_next": e_j+1, "delta": d_j}, ...],
    "delta_to_limit": ||u_{eps_last} - u_0|| or None, "strictly_decreasing": bool}``.
    """
    from .runner import simulate

    eps_list = [float(e) for e in eps_list]
    if len(eps_list) < 3:
        raise ValueError("need at least three eps values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_list must be strictly decreasing")
    runs = []
    for e in eps_list + ([0.0] if with_limit else []):
        res = simulate(base.replace(eps=e), keep_fields=True)
        if abs(res.trajectory.times[-1] - base.T) > 1e-9 * base.T:
            raise RuntimeError(f"run with eps={e} stopped at t={res.trajectory.times[-1]}")
        runs.append(res.trajectory)
    times = runs[0].times
    for tr in runs[1:]:
        if len(tr.times) != len(times) or not np.allclose(tr.times, times, rtol=0, atol=1e-12):
            raise RuntimeError("snapshot times differ between eps runs")
    grid = base.grid
    rows = []
    for j in range(len(eps_list) - 1):
        d = space_time_l2(grid, times, runs[j].u, runs[j + 1].u)
        rows.append({"eps": eps_list[j], "eps_next": eps_list[j + 1], "delta": d})
    deltas = [r["delta"] for r in rows]
    out = {
        "rows": rows,
        "strictly_decreasing": all(b < a for a, b in zip(deltas, deltas[1:])),
        "delta_to_limit": None,
    }
    if with_limit:
        out["delta_to_limit"] = space_time_l2(grid, times, runs[len(eps_list) - 1].u, runs[-1].u)
    return out


def _initial_stable_dt(cfg):
    u0, v0 = cfg.initial_data()
    return stable_dt(State(u0, v0), cfg.grid, cfg.params, cfg.phi, cfg.control())


def self_convergence(base, levels=3, mode="space", field="u", exact=None, dt0=None):
    """Order estimates from ``levels`` runs.

    mode="space": level k has ``2^k`` times the cells and dt0 / 4^k.
    mode="time":  same grid, dt0 / 2^k.
    With ``exact(grid, t) -> array`` errors are measured against it; otherwise
    Richardson differences of consecutive levels (fine restricted to coarse).
    Each level uses a fixed dt; dt0 defaults to the stable dt of the initial
    data and is rounded down so the horizon holds a whole number of steps.
    """
    from .runner import simulate

    if mode not in ("space", "time"):
        raise ValueError("mode must be 'space' or 'time'")
    need = 2 if exact is not None else 3
    if levels < need:
        raise ValueError(f"need at least {need} levels")
    if dt0 is None:
        dt0 = base.dt_fixed or _initial_stable_dt(base)
    # whole number of steps per horizon so refinement halves dt exactly
    n0 = math.ceil(base.T / dt0 - 1e-9)
    dt0 = base.T / n0
    finals, grids, dts = [], [], []
    for k in range(levels):
        if mode == "space":
            cells = [n * 2 ** k for n in base.cells]
            dt = dt0 / 4 ** k
        else:
            cells = list(base.cells)
            dt = dt0 / 2 ** k
        cfg = base.replace(cells=cells, dt_fixed=dt, dt_out=base.T)
        res = simulate(cfg)
        finals.append(getattr(res.trajectory.final, field))
        grids.append(cfg.grid)
        dts.append(dt)
    T = base.T
    if exact is not None:
        errors = [lp_norm(f - exact(g, T), g, 2) for f, g in zip(finals, grids)]
    else:
        errors = []
        for k in range(levels - 1):
            fine = finals[k + 1]
            if mode == "space":
                fine = restrict(fine, grids[k], grids[k + 1])
            errors.append(lp_norm(fine - finals[k], grids[k], 2))
    orders = [math.log(a / b) / math.log(2) if a > 0 and b > 0 else math.nan
              for a, b in zip(errors, errors[1:])]
    monotone = all(b < a for a, b in zip(errors, errors[1:]))
    return {
        "mode": mode, "field": field, "levels": levels,
        "cells": [list(g.cells) for g in grids], "dt": dts,
        "errors": errors, "orders": orders,
        "order": orders[-1] if orders else math.nan,
        "inconclusive": not monotone,
    }
