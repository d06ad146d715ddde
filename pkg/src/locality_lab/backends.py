"""Backend selection for the hot Langevin kernels.

The compiled extension is used when importable; otherwise the pure-numpy
reference implementation. LOCALITY_LAB_BACKEND=python|compiled forces one
side (forcing "compiled" raises if the extension was not built).
"""

import os

_requested = os.environ.get("LOCALITY_LAB_BACKEND", "").strip().lower()

if _requested == "python":
    from . import _kernels_py as kernels
elif _requested == "compiled":
    from . import _kernels as kernels
elif _requested:
    raise ValueError(
        f"LOCALITY_LAB_BACKEND={_requested!r} (expected 'python' or 'compiled')"
    )
else:
    try:
        from . import _kernels as kernels
    except ImportError:
        from . import _kernels_py as kernels

BACKEND = kernels.BACKEND
gl_sample_chunk = kernels.gl_sample_chunk
gl_jacobian_chunk = kernels.gl_jacobian_chunk


def get_kernels(name):
    """Fetch a specific backend module ('python' or 'compiled') for benchmarks."""
    if name == "python":
        from . import _kernels_py

        return _kernels_py
    if name == "compiled":
        from . import _kernels

        return _kernels
    raise ValueError(f"unknown backend {name!r}")
