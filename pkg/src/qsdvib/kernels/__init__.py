"""Hot-loop kernels: compiled extension if available, numpy fallback otherwise.

Set QSDVIB_PURE=1 to force the numpy implementation.
"""

import os

from . import _numpy

if os.environ.get("QSDVIB_PURE", "0") == "1":
    _impl = _numpy
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _numpy

BACKEND = _impl.BACKEND
expectation_x_batch = _impl.expectation_x_batch
apply_phase = _impl.apply_phase
diffusive_update = _impl.diffusive_update

__all__ = ["BACKEND", "expectation_x_batch", "apply_phase", "diffusive_update"]
