"""Backend selection for the hot kernels.

Prefers the compiled extension; falls back to the pure-Python versions when
it is absent or when PHENOTEXT_PURE=1 is set in the environment.
"""

import os

if os.environ.get("PHENOTEXT_PURE") == "1":
    compiled = None
else:
    try:
        from . import _kernels as compiled
    except ImportError:
        compiled = None

from . import _kernels_py as pure

HAVE_COMPILED = compiled is not None
BACKEND = "compiled" if HAVE_COMPILED else "pure-python"
