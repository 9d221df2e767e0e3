"""Selects the JSON boundary scanner implementation at import time.

Prefers the compiled Cython kernel and falls back to the pure-Python version
when the extension was not built. BACKEND names the one in use.
"""

try:
    from ._scanner import scan_json_boundaries

    BACKEND = "compiled"
except ImportError:  # pragma: no cover - depends on build environment
    from ._scanner_py import scan_json_boundaries

    BACKEND = "python"

__all__ = ["scan_json_boundaries", "BACKEND"]
