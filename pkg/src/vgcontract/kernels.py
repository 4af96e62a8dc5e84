"""Backend selection for the simulation kernels.

The compiled extension is used when it imports; otherwise, or when the
environment variable ``VGCONTRACT_BACKEND=python`` is set, the numpy
implementation is used.  Both expose ``run_single``, ``run_pair``,
``run_network``, ``run_network_pair`` and ``run_chaos``.
"""

import os
import warnings

from . import _pykernels

python_backend = _pykernels
compiled_backend = None

try:
    from . import _ckernels as compiled_backend
except ImportError:  # pragma: no cover - depends on the build
    compiled_backend = None

_requested = os.environ.get("VGCONTRACT_BACKEND", "auto").lower()

if _requested == "python" or compiled_backend is None:
    if _requested == "compiled":
        warnings.warn("compiled kernels requested but not built; using numpy fallback")
    backend = python_backend
    BACKEND = "python"
else:
    backend = compiled_backend
    BACKEND = "compiled"

run_single = backend.run_single
run_pair = backend.run_pair
run_network = backend.run_network
run_network_pair = backend.run_network_pair
run_chaos = backend.run_chaos


def get_backend(name=None):
    """Return a backend module by name (``"python"``/``"compiled"``) or the active one."""
    if name is None:
        return backend
    if name == "python":
        return python_backend
    if name == "compiled":
        if compiled_backend is None:
            raise RuntimeError("compiled kernels are not available; run `pip install -e .`")
        return compiled_backend
    raise ValueError(f"unknown backend {name!r}")
