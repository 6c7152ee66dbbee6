"""Coarse Ricci curvature and non-commutative transport for quantum channels."""

import os

__version__ = "0.1.0"

# QCURV_THREADS caps the BLAS/OpenMP pools; it only takes effect when set
# before numpy is first imported.
_threads = os.environ.get("QCURV_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, _threads)
