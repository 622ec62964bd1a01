"""Kernel selection: the compiled extension if it was built, else pure Python."""

from __future__ import annotations

import os

BACKEND = "python"
if os.environ.get("CONFLUENCE_PURE_PYTHON") != "1":
    try:
        from ._kernels import iterate_poly, trace  # noqa: F401

        BACKEND = "cython"
    except ImportError:
        pass
if BACKEND == "python":
    from ._kernels_py import iterate_poly, trace  # noqa: F401

__all__ = ["BACKEND", "iterate_poly", "trace"]
