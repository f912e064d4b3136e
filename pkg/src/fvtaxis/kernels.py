"""Backend selection for the hot kernels.

The compiled Cython core is used when importable.  Set ``FVTAXIS_BACKEND`` to
``python`` to force the numpy fallback, or to ``cython`` to make a missing
extension an error instead of a silent fallback.
"""
import importlib
import os

from . import _kernels_py

_choice = os.environ.get("FVTAXIS_BACKEND", "").strip().lower()


def load(name):
    """Return the kernel module for backend ``name`` ('cython' or 'python')."""
    if name == "python":
        return _kernels_py
    if name == "cython":
        return importlib.import_module("fvtaxis._ckernels")
    raise ValueError(f"unknown backend {name!r}")


def available():
    names = ["python"]
    try:
        load("cython")
        names.insert(0, "cython")
    except ImportError:
        pass
    return names


if _choice == "python":
    impl = _kernels_py
    BACKEND = "python"
else:
    try:
        impl = load("cython")
        BACKEND = "cython"
    except ImportError:
        if _choice == "cython":
            raise
        impl = _kernels_py
        BACKEND = "python"

laplacian = impl.laplacian
flux_update = impl.flux_update
gradient_energy = impl.gradient_energy
v_operator = impl.v_operator
cg_v = impl.cg_v
