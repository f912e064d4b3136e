"""Cell-centred grids on boxes, no-flux stencils and discrete functionals.

Fields are plain float64 arrays of shape ``grid.shape``.  Neumann boundaries
are realised by giving boundary faces zero flux (equivalently, mirrored ghost
cells), which makes every flux-form operator exactly conservative.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import kernels


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred mesh of the box ``[0, L_1] x ... x [0, L_d]``."""

    cells: tuple[int, ...]
    lengths: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))
        object.__setattr__(self, "lengths", tuple(float(x) for x in self.lengths))
        if len(self.cells) not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {len(self.cells)}")
        if len(self.lengths) != len(self.cells):
            raise ValueError("cells and lengths must have the same length")
        if any(n < 2 for n in self.cells):
            raise ValueError(f"need at least 2 cells per axis, got {self.cells}")
        if any(not (x > 0 and math.isfinite(x)) for x in self.lengths):
            raise ValueError(f"lengths must be positive, got {self.lengths}")

    @classmethod
    def uniform(cls, dim, n, length=1.0):
        return cls((n,) * dim, (length,) * dim)

    @property
    def dim(self):
        return len(self.cells)

    @property
    def shape(self):
        return self.cells

    @property
    def spacing(self):
        return tuple(L / n for L, n in zip(self.lengths, self.cells))

    @property
    def cell_volume(self):
        return math.prod(self.spacing)

    @property
    def n_cells(self):
        return math.prod(self.cells)

    @property
    def volume(self):
        return math.prod(self.lengths)

    def centers(self, axis):
        h = self.spacing[axis]
        return (np.arange(self.cells[axis]) + 0.5) * h

    def mesh(self):
        """Cell-centre coordinate arrays, one per axis, each of ``shape``."""
        return np.meshgrid(*(self.centers(k) for k in range(self.dim)), indexing="ij")

    def refine(self, factor=2):
        return Grid(tuple(n * factor for n in self.cells), self.lengths)

    def inv_h2(self):
        """Inverse squared spacings padded to three axes (for the kernels)."""
        c = [1.0 / h**2 for h in self.spacing]
        return tuple(c + [0.0] * (3 - len(c)))


def as3d(f):
    """C-contiguous float64 view of ``f`` with singleton trailing axes."""
    f = np.ascontiguousarray(f, dtype=np.float64)
    return f.reshape(f.shape + (1,) * (3 - f.ndim))


def check_field(f, grid, name="field"):
    f = np.asarray(f, dtype=np.float64)
    if f.shape != grid.shape:
        raise ValueError(f"{name} has shape {f.shape}, grid expects {grid.shape}")
    return f


def laplacian_noflux(f, grid):
    """Divergence-form discrete Laplacian with zero flux through the boundary."""
    f = check_field(f, grid)
    out = np.empty(grid.shape)
    kernels.laplacian(as3d(f), as3d(out), *grid.inv_h2())
    return out


def lp_norm(f, grid, p):
    """Discrete L^p norm with midpoint quadrature; ``p`` may be ``math.inf``."""
    f = check_field(f, grid)
    if not p >= 1:
        raise ValueError(f"p must be >= 1 or inf, got {p}")
    a = np.abs(f).ravel()
    if math.isinf(p):
        return float(a.max()) if a.size else 0.0
    if p == 1:
        return math.fsum(a) * grid.cell_volume
    top = a.max()
    if top == 0.0:
        return 0.0
    # scale first so large p does not overflow
    s = math.fsum((a / top) ** p) * grid.cell_volume
    return float(top * s ** (1.0 / p))


def gradient_energy(f, grid):
    """Sum over interior faces of (difference quotient)^2 times face measure times h,
    i.e. the midpoint rule for the integral of |grad f|^2."""
    f = check_field(f, grid)
    return kernels.gradient_energy(as3d(f), *grid.inv_h2(), grid.cell_volume)


def inner_product(f, g, grid):
    f = check_field(f, grid, "f")
    g = check_field(g, grid, "g")
    return math.fsum((f * g).ravel()) * grid.cell_volume


def integral(f, grid):
    return math.fsum(check_field(f, grid).ravel()) * grid.cell_volume


def face_differences(f, grid):
    """Interior-face difference quotients, one array per axis.

    Along axis k the array has ``N_k + 1`` entries; the two boundary faces carry
    zero (homogeneous Neumann).
    """
    f = check_field(f, grid)
    out = []
    for k, h in enumerate(grid.spacing):
        pad = [(0, 0)] * grid.dim
        pad[k] = (1, 1)
        out.append(np.pad(np.diff(f, axis=k) / h, pad))
    return out


def face_means(f, grid):
    """Arithmetic means of the two adjacent cells on interior faces (per axis),
    shaped like the interior part of :func:`face_differences`."""
    f = check_field(f, grid)
    out = []
    for k in range(grid.dim):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[k] = slice(None, -1)
        hi[k] = slice(1, None)
        out.append(0.5 * (f[tuple(lo)] + f[tuple(hi)]))
    return out


def face_centers(grid, axis):
    """Coordinates (meshgrid, ij) of interior face centres normal to ``axis``."""
    axes = []
    for k in range(grid.dim):
        c = grid.centers(k)
        if k == axis:
            c = np.arange(1, grid.cells[k]) * grid.spacing[k]
        axes.append(c)
    return np.meshgrid(*axes, indexing="ij")


def gradient_magnitude(f, grid):
    """|grad f| at cell centres from the average of the two adjacent face
    differences on each axis (boundary faces contribute zero)."""
    sq = np.zeros(grid.shape)
    for k, d in enumerate(face_differences(f, grid)):
        lo = [slice(None)] * grid.dim
        hi = [slice(None)] * grid.dim
        lo[k] = slice(None, -1)
        hi[k] = slice(1, None)
        sq += (0.5 * (d[tuple(lo)] + d[tuple(hi)])) ** 2
    return np.sqrt(sq)


def restrict(f, coarse, fine):
    """Average blocks of a field on ``fine`` down to ``coarse``."""
    f = check_field(f, fine)
    factors = []
    for nc, nf in zip(coarse.cells, fine.cells):
        if nf % nc:
            raise ValueError(f"{fine.cells} is not a refinement of {coarse.cells}")
        factors.append(nf // nc)
    shape = []
    for nc, r in zip(coarse.cells, factors):
        shape += [nc, r]
    return f.reshape(shape).mean(axis=tuple(range(1, 2 * coarse.dim, 2)))


# -- snapshot files ---------------------------------------------------------
#
# Line 1 is a JSON header {"dim", "N", "L", "format", ...}; the body follows in
# row-major (C) order, either one value per line with 17 significant digits
# ("csv") or raw little-endian float64 ("f8le").


def write_snapshot(path, f, grid, fmt=None, **meta):
    path = Path(path)
    f = check_field(f, grid)
    if fmt is None:
        fmt = "f8le" if path.suffix == ".bin" else "csv"
    header = {"dim": grid.dim, "N": list(grid.cells), "L": list(grid.lengths), "format": fmt}
    header.update(meta)
    head = (json.dumps(header, sort_keys=True) + "\n").encode()
    if fmt == "csv":
        body = "".join(f"{x:.17g}\n" for x in f.ravel()).encode()
    elif fmt == "f8le":
        body = f.astype("<f8").tobytes()
    else:
        raise ValueError(f"unknown snapshot format {fmt!r}")
    path.write_bytes(head + body)
    return path


def read_snapshot(path):
    """Return ``(grid, values, header)``."""
    raw = Path(path).read_bytes()
    nl = raw.index(b"\n")
    header = json.loads(raw[:nl])
    grid = Grid(tuple(header["N"]), tuple(header["L"]))
    if grid.dim != header["dim"]:
        raise ValueError("snapshot header dim disagrees with N")
    body = raw[nl + 1:]
    if header.get("format", "csv") == "f8le":
        values = np.frombuffer(body, dtype="<f8").astype(np.float64)
    else:
        values = np.array([float(x) for x in body.split()], dtype=np.float64)
    if values.size != grid.n_cells:
        raise ValueError(f"snapshot holds {values.size} values, header expects {grid.n_cells}")
    return grid, values.reshape(grid.shape), header
