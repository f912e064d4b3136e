"""Signal-dependent motility functions and their bounds on [0, vbar]."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import HypothesisViolation


@dataclass(frozen=True)
class Motility:
    """phi(xi) > 0 on xi >= 0 together with its first derivative.

    ``eval`` and ``deriv`` must accept numpy arrays.
    """

    name: str
    eval: Callable
    deriv: Callable
    params: tuple = ()

    def __call__(self, xi):
        return self.eval(xi)

    def to_dict(self):
        return {"name": self.name, "params": list(self.params)}


def _constant(c):
    if not c > 0:
        raise HypothesisViolation(f"constant motility needs c > 0, got {c}")
    return (lambda x: np.full_like(np.asarray(x, dtype=float), c),
            lambda x: np.zeros_like(np.asarray(x, dtype=float)))


def _exp_decay(a):
    return (lambda x: np.exp(-a * np.asarray(x, dtype=float)),
            lambda x: -a * np.exp(-a * np.asarray(x, dtype=float)))


def _rational(a):
    if not a >= 0:
        raise HypothesisViolation(f"rational motility 1/(1+a*xi) needs a >= 0, got {a}")
    return (lambda x: 1.0 / (1.0 + a * np.asarray(x, dtype=float)),
            lambda x: -a / (1.0 + a * np.asarray(x, dtype=float)) ** 2)


def _affine(a, b):
    if not (a > 0 and b >= 0):
        raise HypothesisViolation(f"affine motility a + b*xi needs a > 0, b >= 0, got {a}, {b}")
    return (lambda x: a + b * np.asarray(x, dtype=float),
            lambda x: np.full_like(np.asarray(x, dtype=float), b))


BUILTINS = {
    "constant": (_constant, 1),
    "exp_decay": (_exp_decay, 1),
    "rational": (_rational, 1),
    "affine": (_affine, 2),
}


def builtin_motility(name, params):
    try:
        factory, nparams = BUILTINS[name]
    except KeyError:
        raise ValueError(f"unknown motility {name!r}; choose from {sorted(BUILTINS)}") from None
    params = tuple(float(p) for p in params)
    if len(params) != nparams:
        raise ValueError(f"motility {name!r} takes {nparams} parameter(s), got {len(params)}")
    if not all(math.isfinite(p) for p in params):
        raise ValueError(f"motility parameters must be finite, got {params}")
    ev, dv = factory(*params)
    return Motility(name, ev, dv, params)


@dataclass(frozen=True)
class MotilityBounds:
    kappa1: float
    kappa2: float
    kappa3: float
    vbar: float

    def __post_init__(self):
        if not (0 < self.kappa1 <= self.kappa2 and self.kappa3 >= 0):
            raise HypothesisViolation(f"inconsistent motility bounds {self}")

    def contains(self, phi_vals, dphi_vals=None):
        ok = bool(np.all(phi_vals >= self.kappa1) and np.all(phi_vals <= self.kappa2))
        if dphi_vals is not None:
            ok = ok and bool(np.all(np.abs(dphi_vals) <= self.kappa3))
        return ok


def _refine(fun, grid, idx, xtol):
    """Brent refinement of ``min fun`` in the bracket around sample ``idx``."""
    lo = grid[max(idx - 1, 0)]
    hi = grid[min(idx + 1, grid.size - 1)]
    if hi <= lo:
        return grid[idx], float(fun(grid[idx]))
    res = minimize_scalar(lambda s: float(fun(s)), bounds=(lo, hi), method="bounded",
                          options={"xatol": xtol})
    return float(res.x), float(res.fun)


def compute_bounds(phi, vbar, samples=4096):
    """kappa1 = min phi, kappa2 = max phi, kappa3 = max |phi'| over [0, vbar].

    Dense sampling, then a bounded Brent search around each sampled extremum.
    Each bound is padded by |slope at the extremum| times the search
    resolution, which is zero for interior extrema and tiny otherwise.
    """
    vbar = float(vbar)
    if not (vbar >= 0 and math.isfinite(vbar)):
        raise ValueError(f"vbar must be a finite nonnegative number, got {vbar}")
    xs = np.linspace(0.0, vbar, samples) if vbar > 0 else np.zeros(1)
    f = np.asarray(phi.eval(xs), dtype=float)
    g = np.abs(np.asarray(phi.deriv(xs), dtype=float))
    if not np.all(np.isfinite(f)) or not np.all(np.isfinite(g)):
        raise HypothesisViolation(f"motility {phi.name} is not finite on [0, {vbar}]")
    if np.any(f <= 0):
        bad = xs[np.argmin(f)]
        raise HypothesisViolation(f"motility {phi.name} is not positive: phi({bad:.6g}) = {f.min():.6g}")

    xtol = 1e-12 * max(1.0, vbar)
    step = xs[1] - xs[0] if xs.size > 1 else 0.0

    def dd(s):
        # derivative of |phi'| by central difference, used only for padding
        e = max(step, 1e-6)
        a = np.abs(phi.deriv(np.array([max(s - e, 0.0), min(s + e, vbar)])))
        return abs(a[1] - a[0]) / (2 * e)

    if xs.size == 1:
        k1 = k2 = float(f[0])
        k3 = float(g[0])
    else:
        x1, v1 = _refine(lambda s: phi.eval(s), xs, int(np.argmin(f)), xtol)
        x2, v2 = _refine(lambda s: -phi.eval(s), xs, int(np.argmax(f)), xtol)
        x3, v3 = _refine(lambda s: -abs(phi.deriv(s)), xs, int(np.argmax(g)), xtol)
        k1 = min(float(f.min()), v1) - abs(float(phi.deriv(x1))) * xtol
        k2 = max(float(f.max()), -v2) + abs(float(phi.deriv(x2))) * xtol
        k3 = max(float(g.max()), -v3) + dd(x3) * xtol
    if not k1 > 0:
        raise HypothesisViolation(f"motility {phi.name} has min {k1:.6g} <= 0 on [0, {vbar}]")
    return MotilityBounds(k1, k2, k3, vbar)
