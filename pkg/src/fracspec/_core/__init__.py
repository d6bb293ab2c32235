"""Backend selection for the Mittag-Leffler evaluation core.

Prefers the compiled Cython extension; falls back to the numpy
implementation when the extension is unavailable.  Set FRACSPEC_PURE=1 to
force the fallback (used by the backend-consistency tests and the
benchmark).
"""

import os

from . import _mlpure

if os.environ.get("FRACSPEC_PURE"):
    impl = _mlpure
    BACKEND = "pure"
else:
    try:
        from . import _mlcompiled as impl  # type: ignore[attr-defined]

        BACKEND = "compiled"
    except ImportError:
        impl = _mlpure
        BACKEND = "pure"

pure = _mlpure
