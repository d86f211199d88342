"""Select the descent kernel at import: compiled extension if built, else numpy.

Both expose descend_batch(data, gen0, node0, p0, strict) with identical
semantics; tests and the benchmark compare them directly.
"""

from __future__ import annotations

from . import _kernels_py

try:  # pragma: no cover - exercised only when the extension is built
    from . import _kernels as _impl  # type: ignore[attr-defined]

    COMPILED = True
except ImportError:  # pragma: no cover
    _impl = _kernels_py
    COMPILED = False

descend_batch = _impl.descend_batch
kernel_name = _impl.kernel_name

KIND_ESCAPE = _kernels_py.KIND_ESCAPE
KIND_ANNULUS = _kernels_py.KIND_ANNULUS
KIND_INTERIOR = _kernels_py.KIND_INTERIOR


def using_compiled() -> bool:
    return COMPILED
