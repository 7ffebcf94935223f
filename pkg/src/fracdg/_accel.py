# Use numba when available and not disabled; otherwise run the numpy paths.
#
# Set FRACDG_DISABLE_NUMBA=1 to force the pure-numpy kernels.

import logging
import os

logger = logging.getLogger(__name__)

_DISABLED = os.environ.get("FRACDG_DISABLE_NUMBA", "").strip().lower() in (
    "1", "true", "yes", "on")

try:
    if _DISABLED:
        raise ImportError("disabled by FRACDG_DISABLE_NUMBA")
    import numba

    njit = numba.njit
    HAVE_NUMBA = True
except ImportError as exc:
    logger.debug("numba unavailable (%s): using numpy kernels", exc)
    HAVE_NUMBA = False

    def njit(pyfunc=None, **kwargs):
        """Null decorator used when numba is not available."""
        def wrap(func):
            return func
        return wrap if pyfunc is None else wrap(pyfunc)


USE_NUMBA = HAVE_NUMBA
