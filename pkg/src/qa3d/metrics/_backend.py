"""Kernel backend selection.

The compiled extension is preferred when it built; set ``QA3D_PURE=1`` to
force the pure-Python fallback (used by the parity tests and benchmarks).
"""

import os

from . import _pure

if os.environ.get("QA3D_PURE") == "1":
    impl = _pure
else:
    try:
        from . import _kernels as impl  # type: ignore[no-redef]
    except ImportError:
        impl = _pure

BACKEND = impl.BACKEND


def available_backends():
    backends = [("pure", _pure)]
    try:
        from . import _kernels

        backends.append(("compiled", _kernels))
    except ImportError:
        pass
    return backends
