"""Select the compiled kernels when available, the pure Python ones otherwise.

Set ``EMDFLOW_PURE_PYTHON=1`` to force the fallback.
"""

import os

from . import _fallback

kernels = _fallback

if os.environ.get("EMDFLOW_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as kernels  # noqa: F811
    except ImportError:
        pass


def use(name: str):
    """Switch backend at runtime: ``"compiled"`` or ``"python"``."""
    global kernels
    if name == "python":
        kernels = _fallback
    elif name == "compiled":
        from . import _kernels

        kernels = _kernels
    else:
        raise ValueError(f"unknown backend {name!r}")
    return kernels


def compiled_available() -> bool:
    try:
        from . import _kernels  # noqa: F401
    except ImportError:
        return False
    return True
