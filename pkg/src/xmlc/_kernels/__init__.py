"""Scoring kernels: compiled core with a pure NumPy fallback.

The compiled extension is preferred when the build produced it; import
failures fall back silently.  ``set_backend`` exists for benchmarks and
for asserting the two implementations agree.
"""

from __future__ import annotations

from . import pure as _pure

try:
    from . import _scoring_c as _compiled
except ImportError:  # pragma: no cover - depends on the build
    _compiled = None

_impl = _compiled if _compiled is not None else _pure


def available_backends() -> tuple[str, ...]:
    return ("compiled", "pure") if _compiled is not None else ("pure",)


def get_backend() -> str:
    return "compiled" if _impl is _compiled else "pure"


def set_backend(name: str) -> None:
    global _impl
    if name == "pure":
        _impl = _pure
    elif name == "compiled":
        if _compiled is None:
            raise ValueError("compiled backend is not available in this build")
        _impl = _compiled
    else:
        raise ValueError(f"unknown backend {name!r}")


def accumulate_doc(post_targets, post_lifts, starts, ends, x, out):
    return _impl.accumulate_doc(post_targets, post_lifts, starts, ends, x, out)
