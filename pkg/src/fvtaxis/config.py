"""Run configuration: parsing, defaulting and validation.

A config is a flat JSON object.  Only ``cells``, ``m``, ``T``, ``u0`` and ``v0``
are required; everything else has a documented default (see ``DEFAULTS``).
Initial data are lists of additive profiles, e.g.::

    "u0": [{"profile": "constant", "value": 0.1},
           {"profile": "gaussian", "center": [1.5, 2.0], "width": 0.3, "amplitude": 1.0}]
"""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import HypothesisViolation
from .field import Grid, read_snapshot
from .monitors import default_alpha_list, default_p_list
from .motility import builtin_motility
from .stepper import ModelParams, StepControl

DEFAULTS = {
    "lengths": None,        # [1.0] * dim
    "eps": 1e-3,
    "motility": {"name": "constant", "params": [1.0]},
    "dt_out": None,         # T / 100
    "cfl_safety": 0.9,
    "tol_neg": 1e-10,       # relative to max u0
    "cg_tol": 1e-10,
    "cg_maxiter": None,     # 10 * cell count
    "dt_max": 1e-2,
    "dt_min": 1e-12,
    "dt_fixed": None,
    "p_list": None,         # [2, m + 1, 4]
    "q": None,              # dim + 1
    "alpha_list": None,     # [m/2 + 1/4, m, m + 1]
    "seed": 0,
    "snapshot_every": None,  # field dump cadence (time); None = first and last only
    "horizon_split": 0.5,
    "label": "",
}
REQUIRED = ("cells", "m", "T", "u0", "v0")
KNOWN = set(DEFAULTS) | set(REQUIRED) | {"dim"}

PROFILE_KEYS = {
    "constant": {"value"},
    "gaussian": {"center", "width", "amplitude"},
    "checkerboard": {"amplitude", "block"},
    "random": {"amplitude"},
    "cosine": {"amplitude", "modes"},
    "barenblatt": {"center", "C", "t0"},
    "file": {"path"},
}


class ConfigError(ValueError):
    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("invalid config:\n  " + "\n  ".join(self.errors))


@dataclass(frozen=True)
class SimConfig:
    dim: int
    cells: tuple
    lengths: tuple
    m: float
    eps: float
    motility: dict
    u0: tuple
    v0: tuple
    T: float
    dt_out: float
    cfl_safety: float
    tol_neg: float
    cg_tol: float
    cg_maxiter: int | None
    dt_max: float
    dt_min: float
    dt_fixed: float | None
    p_list: tuple
    q: float
    alpha_list: tuple
    seed: int
    snapshot_every: float | None
    horizon_split: float
    label: str

    # -- derived objects ---------------------------------------------------
    @property
    def grid(self):
        return Grid(self.cells, self.lengths)

    @property
    def params(self):
        return ModelParams(self.m, self.eps, self.dim)

    @property
    def phi(self):
        return builtin_motility(self.motility["name"], self.motility["params"])

    def control(self):
        return StepControl(dt_max=self.dt_max, dt_min=self.dt_min, cfl_safety=self.cfl_safety,
                           tol_neg_rel=self.tol_neg, cg_tol=self.cg_tol,
                           cg_maxiter=self.cg_maxiter, dt_fixed=self.dt_fixed)

    def initial_data(self):
        g = self.grid
        u = build_profile(self.u0, g, self.m, self.seed, base=Path("."))
        v = build_profile(self.v0, g, self.m, self.seed + 1, base=Path("."))
        return u, v

    # -- serialisation ----------------------------------------------------
    def to_dict(self):
        d = asdict(self)
        for k, val in d.items():
            if isinstance(val, tuple):
                d[k] = list(val)
        d["u0"] = [dict(p) for p in self.u0]
        d["v0"] = [dict(p) for p in self.v0]
        return d

    def emit(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def hash(self):
        canon = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()[:16]

    def replace(self, **overrides):
        d = self.to_dict()
        if "cells" in overrides and "dim" not in overrides:
            d.pop("dim")  # re-derive from the new cells
        d.update(overrides)
        return validate(d)


def _profile_field(p, grid, m, rng, base):
    kind = p["profile"]
    X = grid.mesh()
    if kind == "constant":
        return np.full(grid.shape, float(p["value"]))
    if kind == "gaussian":
        c = _vec(p["center"], grid.dim)
        r2 = sum((X[k] - c[k]) ** 2 for k in range(grid.dim))
        return float(p["amplitude"]) * np.exp(-r2 / (2 * float(p["width"]) ** 2))
    if kind == "checkerboard":
        block = int(p.get("block", 1))
        idx = np.indices(grid.shape)
        parity = sum(i // block for i in idx) % 2
        return float(p["amplitude"]) * parity.astype(float)
    if kind == "random":
        return float(p["amplitude"]) * rng.random(grid.shape)
    if kind == "cosine":
        modes = _vec(p["modes"], grid.dim)
        out = np.full(grid.shape, float(p["amplitude"]))
        for k in range(grid.dim):
            out = out * np.cos(modes[k] * math.pi * X[k] / grid.lengths[k])
        return out
    if kind == "barenblatt":
        return barenblatt(grid, m, float(p["t0"]), float(p["C"]), _vec(p["center"], grid.dim))
    if kind == "file":
        g2, vals, _ = read_snapshot(base / p["path"])
        if g2 != grid:
            raise ValueError(f"snapshot {p['path']} grid {g2} does not match {grid}")
        return vals
    raise ValueError(f"unknown profile {kind!r}")


def build_profile(profiles, grid, m, seed, base=Path(".")):
    rng = np.random.default_rng(seed)
    out = np.zeros(grid.shape)
    for p in profiles:
        out += _profile_field(p, grid, m, rng, base)
    return out


def barenblatt(grid, m, t, C, center):
    """Source-type self-similar solution of u_t = Lap(u^m) at time t > 0."""
    n = grid.dim
    alpha = n / (n * (m - 1) + 2)
    beta = alpha / n
    k = alpha * (m - 1) / (2 * m * n)
    X = grid.mesh()
    r2 = sum((X[i] - center[i]) ** 2 for i in range(n))
    core = np.maximum(C - k * r2 * t ** (-2 * beta), 0.0)
    return t ** (-alpha) * core ** (1.0 / (m - 1))


def _vec(x, dim):
    if isinstance(x, (int, float)):
        return [float(x)] * dim
    return [float(a) for a in x]


def _num(raw, key, errors, cond=None, msg=None, allow_none=False):
    val = raw.get(key)
    if val is None and allow_none:
        return None
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        errors.append(f"{key}: expected a finite number, got {val!r}")
        return None
    if cond is not None and not cond(val):
        errors.append(f"{key}: {msg} (got {val!r})")
        return None
    return val


def _check_profiles(key, profiles, dim, errors):
    if not isinstance(profiles, list) or not profiles:
        errors.append(f"{key}: expected a non-empty list of profiles")
        return
    for i, p in enumerate(profiles):
        where = f"{key}[{i}]"
        if not isinstance(p, dict) or p.get("profile") not in PROFILE_KEYS:
            errors.append(f"{where}: profile must be one of {sorted(PROFILE_KEYS)}")
            continue
        kind = p["profile"]
        allowed = PROFILE_KEYS[kind] | {"profile"}
        for extra in sorted(set(p) - allowed):
            errors.append(f"{where}: unknown key {extra!r} for profile {kind!r}")
        missing = PROFILE_KEYS[kind] - set(p) - ({"block"} if kind == "checkerboard" else set())
        for k in sorted(missing):
            errors.append(f"{where}: missing {k!r}")
        if missing:
            continue
        if "amplitude" in p and kind != "cosine":
            if not isinstance(p["amplitude"], (int, float)) or not p["amplitude"] >= 0:
                errors.append(f"{where}: amplitude must be >= 0; initial data must be "
                              f"non-negative (got {p['amplitude']!r})")
        if kind == "constant" and not (isinstance(p["value"], (int, float)) and p["value"] >= 0):
            errors.append(f"{where}: value must be >= 0; initial data must be non-negative")
        if kind == "gaussian" and not (isinstance(p["width"], (int, float)) and p["width"] > 0):
            errors.append(f"{where}: width must be > 0")
        if kind in ("gaussian", "barenblatt"):
            c = p["center"]
            if not (isinstance(c, (int, float)) or (isinstance(c, list) and len(c) == dim)):
                errors.append(f"{where}: center must be a number or a list of length {dim}")
        if kind == "cosine":
            md = p["modes"]
            if not (isinstance(md, int) or (isinstance(md, list) and len(md) == dim)):
                errors.append(f"{where}: modes must be an int or a list of length {dim}")
        if kind == "barenblatt":
            if not (isinstance(p["t0"], (int, float)) and p["t0"] > 0):
                errors.append(f"{where}: t0 must be > 0")
            if not (isinstance(p["C"], (int, float)) and p["C"] > 0):
                errors.append(f"{where}: C must be > 0")
        if kind == "checkerboard" and "block" in p:
            if not (isinstance(p["block"], int) and p["block"] >= 1):
                errors.append(f"{where}: block must be a positive integer")


def validate(raw):
    """Parse and check a config; ``raw`` may be JSON text, a path or a dict.

    Raises :class:`ConfigError` listing every problem found.
    """
    if isinstance(raw, Path):
        raw = raw.read_text()
    if isinstance(raw, str):
        try:
            raw = json.loads(raw)
        except json.JSONDecodeError as exc:
            raise ConfigError([f"not valid JSON: {exc}"]) from None
    if not isinstance(raw, dict):
        raise ConfigError(["config must be a JSON object"])
    errors = []
    for k in sorted(set(raw) - KNOWN):
        errors.append(f"unknown key {k!r}")
    for k in REQUIRED:
        if k not in raw:
            errors.append(f"missing required key {k!r}")
    if errors and any(k not in raw for k in REQUIRED):
        raise ConfigError(errors)

    d = {k: raw.get(k, v) for k, v in DEFAULTS.items()}
    d.update({k: raw[k] for k in REQUIRED})

    cells = raw["cells"]
    dim = raw.get("dim", len(cells) if isinstance(cells, list) else None)
    if dim not in (1, 2, 3):
        errors.append(f"dim: must be 1, 2 or 3 (got {dim!r})")
        dim = 1
    if isinstance(cells, int) and not isinstance(cells, bool):
        cells = [cells] * dim
    if not (isinstance(cells, list) and len(cells) == dim
            and all(isinstance(n, int) and not isinstance(n, bool) and n >= 2 for n in cells)):
        errors.append(f"cells: expected {dim} integer(s) >= 2, got {raw['cells']!r}")
        cells = [2] * dim
    lengths = d["lengths"] if d["lengths"] is not None else [1.0] * dim
    if isinstance(lengths, (int, float)):
        lengths = [float(lengths)] * dim
    if not (isinstance(lengths, list) and len(lengths) == dim
            and all(isinstance(x, (int, float)) and x > 0 for x in lengths)):
        errors.append(f"lengths: expected {dim} positive number(s), got {d['lengths']!r}")
        lengths = [1.0] * dim

    m = _num(raw, "m", errors, lambda x: x > 1, "m must exceed 1")
    eps = _num(d, "eps", errors, lambda x: 0 <= x < 1, "eps must lie in [0, 1)")
    T = _num(raw, "T", errors, lambda x: x > 0, "T must be > 0")
    if d["dt_out"] is None and T is not None:
        d["dt_out"] = T / 100
    dt_out = _num(d, "dt_out", errors, lambda x: x > 0, "dt_out must be > 0")
    cfl = _num(d, "cfl_safety", errors, lambda x: 0 < x <= 1, "cfl_safety must lie in (0, 1]")
    tol_neg = _num(d, "tol_neg", errors, lambda x: x >= 0, "tol_neg must be >= 0")
    cg_tol = _num(d, "cg_tol", errors, lambda x: 0 < x < 1, "cg_tol must lie in (0, 1)")
    dt_max = _num(d, "dt_max", errors, lambda x: x > 0, "dt_max must be > 0")
    dt_min = _num(d, "dt_min", errors, lambda x: x > 0, "dt_min must be > 0")
    if dt_max is not None and dt_min is not None and dt_min > dt_max:
        errors.append("dt_min must not exceed dt_max")
    dt_fixed = _num(d, "dt_fixed", errors, lambda x: x > 0, "dt_fixed must be > 0", allow_none=True)
    cg_maxiter = d["cg_maxiter"]
    if cg_maxiter is not None and not (isinstance(cg_maxiter, int) and cg_maxiter > 0):
        errors.append("cg_maxiter: must be a positive integer or null")
    seed = d["seed"]
    if not (isinstance(seed, int) and not isinstance(seed, bool) and seed >= 0):
        errors.append("seed: must be a non-negative integer")
    snap = _num(d, "snapshot_every", errors, lambda x: x > 0, "snapshot_every must be > 0",
                allow_none=True)
    split = _num(d, "horizon_split", errors, lambda x: 0 < x < 1, "horizon_split must lie in (0, 1)")
    if not isinstance(d["label"], str):
        errors.append("label: must be a string")

    mot = d["motility"]
    if not (isinstance(mot, dict) and set(mot) == {"name", "params"}
            and isinstance(mot["params"], list)):
        errors.append("motility: expected {name: string, params: [numbers]}")
    else:
        try:
            builtin_motility(mot["name"], mot["params"])
        except (ValueError, TypeError) as exc:
            errors.append(f"motility: {exc}")
        mot = {"name": mot["name"], "params": [float(x) for x in mot["params"]]
               if all(isinstance(x, (int, float)) for x in mot["params"]) else mot["params"]}

    p_list = d["p_list"] if d["p_list"] is not None else (default_p_list(m) if m else [2.0])
    if not (isinstance(p_list, list) and p_list and all(isinstance(p, (int, float)) and p >= 1 for p in p_list)):
        errors.append(f"p_list: expected numbers >= 1, got {p_list!r}")
        p_list = [2.0]
    q = d["q"] if d["q"] is not None else dim + 1
    if not (isinstance(q, (int, float)) and q >= 1):
        errors.append(f"q: expected a number >= 1, got {q!r}")
        q = dim + 1
    alpha_list = d["alpha_list"]
    if alpha_list is None:
        alpha_list = default_alpha_list(m) if m else []
    if not (isinstance(alpha_list, list) and all(isinstance(a, (int, float)) for a in alpha_list)):
        errors.append(f"alpha_list: expected a list of numbers, got {alpha_list!r}")
        alpha_list = []
    elif m is not None:
        for a in alpha_list:
            if not a > m / 2:
                errors.append(f"alpha_list: alpha={a} must exceed m/2={m / 2}")

    _check_profiles("u0", raw["u0"], dim, errors)
    _check_profiles("v0", raw["v0"], dim, errors)

    if errors:
        raise ConfigError(errors)

    cfg = SimConfig(
        dim=dim, cells=tuple(cells), lengths=tuple(float(x) for x in lengths),
        m=float(m), eps=float(eps), motility=mot,
        u0=tuple(_freeze(p) for p in raw["u0"]), v0=tuple(_freeze(p) for p in raw["v0"]),
        T=float(T), dt_out=float(dt_out), cfl_safety=float(cfl), tol_neg=float(tol_neg),
        cg_tol=float(cg_tol), cg_maxiter=cg_maxiter, dt_max=float(dt_max), dt_min=float(dt_min),
        dt_fixed=None if dt_fixed is None else float(dt_fixed),
        p_list=tuple(float(p) for p in p_list), q=float(q),
        alpha_list=tuple(float(a) for a in alpha_list), seed=seed,
        snapshot_every=None if snap is None else float(snap),
        horizon_split=float(split), label=d["label"],
    )
    # the data themselves must be non-negative and finite (cosine sums, files)
    try:
        u, v = cfg.initial_data()
    except (ValueError, OSError) as exc:
        raise ConfigError([f"initial data: {exc}"]) from None
    for name, f in (("u0", u), ("v0", v)):
        if not np.all(np.isfinite(f)):
            errors.append(f"{name}: initial data must be finite")
        elif f.min() < 0:
            errors.append(f"{name}: initial data must be non-negative (min {f.min():.3g})")
    if not errors:
        try:
            from .motility import compute_bounds
            compute_bounds(cfg.phi, float(v.max()))
        except HypothesisViolation as exc:
            errors.append(f"motility: {exc}")
    if errors:
        raise ConfigError(errors)
    return cfg


def _freeze(p):
    out = {}
    for k, v in sorted(p.items()):
        if isinstance(v, list):
            v = [float(x) if isinstance(x, (int, float)) and k != "modes" else x for x in v]
        elif isinstance(v, (int, float)) and not isinstance(v, bool) and k not in ("block", "modes"):
            v = float(v)
        out[k] = v
    return out


def load(path):
    return validate(Path(path).read_text())
