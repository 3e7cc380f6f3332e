"""Backend selection for the traversal kernels.

The compiled extension is used when it imports; ``GEOCL_PURE_PYTHON=1`` forces
the pure-Python fallback.
"""

import os

from . import _pykernels

BACKENDS = {"python": _pykernels}
try:
    from . import _ckernels
    BACKENDS["cython"] = _ckernels
except ImportError:  # extension not built
    pass

if os.environ.get("GEOCL_PURE_PYTHON", "") not in ("", "0") or "cython" not in BACKENDS:
    BACKEND = "python"
else:
    BACKEND = "cython"

_impl = BACKENDS[BACKEND]
betweenness = _impl.betweenness
closeness = _impl.closeness
triangles_per_vertex = _impl.triangles_per_vertex
