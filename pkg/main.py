"""
yieldcast - crop-yield prediction pipeline
Main entry point
"""
import os
import sys

from core.constants import THREADS_ENV_VAR

# thread caps must be in place before numpy and numba load
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS")


def apply_thread_limit():
    """Propagate YIELDCAST_THREADS to the BLAS and numba thread pools."""
    limit = os.environ.get(THREADS_ENV_VAR)
    if limit:
        for name in _THREAD_VARS:
            os.environ.setdefault(name, limit)


def main() -> int:
    """Run the command line."""
    apply_thread_limit()
    from cli.main import run
    return run()


if __name__ == "__main__":
    sys.exit(main())
