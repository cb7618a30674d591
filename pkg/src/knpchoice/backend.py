"""Selects the numeric backend for the inner-loop kernels.

The compiled extension (``_fastcore``) is preferred when importable; otherwise
the NumPy reference implementation is used.  Override with the environment
variable ``KNPCHOICE_BACKEND`` set to ``compiled`` or ``numpy`` (``compiled``
raises if the extension is missing, rather than silently falling back).

Both backends satisfy the same contract and agree to near machine precision;
they are not guaranteed bit-identical because libm and NumPy transcendentals
may differ in the last ulp.  All results are deterministic within a backend.
"""

import os

from . import _ref_backend

_requested = os.environ.get("KNPCHOICE_BACKEND", "").strip().lower()

if _requested not in ("", "auto", "compiled", "numpy"):
    raise ImportError(
        f"KNPCHOICE_BACKEND={_requested!r} not understood; "
        "use 'compiled', 'numpy', or leave unset"
    )

if _requested == "numpy":
    _impl = _ref_backend
    BACKEND = "numpy"
else:
    try:
        from . import _fastcore as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise ImportError(
                "KNPCHOICE_BACKEND=compiled but the knpchoice._fastcore "
                "extension is not built; reinstall with Cython and a C "
                "compiler available, or unset the variable"
            ) from None
        _impl = _ref_backend
        BACKEND = "numpy"

TAIL_CUTOFF = _ref_backend.TAIL_CUTOFF

normal_moments = _impl.normal_moments
partial_moment_matrix = _impl.partial_moment_matrix
power_phi_matrix = _impl.power_phi_matrix
squared_poly_phi = _impl.squared_poly_phi
cdf_values = _impl.cdf_values
