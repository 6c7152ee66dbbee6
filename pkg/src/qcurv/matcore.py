"""Dense complex linear algebra used by every other module.

Conventions
-----------
Matrices are plain ``numpy.ndarray`` objects of dtype ``complex128``.
Vectorization is column stacking, ``vec(X) = X.reshape(-1, order="F")``,
so the superoperator of ``X -> A X B`` is ``kron(B.T, A)``.  A superoperator
is a ``d_out**2 x d_in**2`` matrix acting on ``vec(X)``.  Adjoints of
superoperators are taken with respect to the Hilbert-Schmidt pairing
``<X, Y> = Tr(X^dagger Y)``, which makes the adjoint the conjugate transpose.
"""

from dataclasses import dataclass
from functools import reduce

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError, PreconditionError

HERM_TOL = 1e-12
PINV_EPS = 1e-10


def as_matrix(M, square=False):
    """Return ``M`` as a finite 2-D complex array."""
    A = np.asarray(M, dtype=complex)
    if A.ndim != 2 or A.size == 0:
        raise DimensionError(f"expected a non-empty matrix, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise PreconditionError("matrix has non-finite entries")
    return A


def is_hermitian(M, tol=HERM_TOL):
    A = np.asarray(M)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        return False
    scale = max(np.abs(A).max(initial=0.0), 1.0)
    return np.abs(A - A.conj().T).max(initial=0.0) <= tol * scale


def hermitize(M):
    A = np.asarray(M, dtype=complex)
    return (A + A.conj().T) / 2


def dagger(M):
    return np.asarray(M).conj().T


def op_norm(M):
    """Largest singular value."""
    A = as_matrix(M)
    if A.shape[0] == A.shape[1] and is_hermitian(A):
        return float(np.abs(np.linalg.eigvalsh(hermitize(A))).max())
    return float(np.linalg.svd(A, compute_uv=False)[0])


def trace_norm(M):
    A = as_matrix(M)
    if A.shape[0] == A.shape[1] and is_hermitian(A):
        return float(np.abs(np.linalg.eigvalsh(hermitize(A))).sum())
    return float(np.linalg.svd(A, compute_uv=False).sum())


def herm_eig(M, tol=1e-9):
    """Eigen-decomposition of a Hermitian matrix.

    Returns ascending eigenvalues ``w`` and a unitary ``U`` with
    ``M = U diag(w) U^dagger``.  The input is symmetrized first; inputs that
    are not Hermitian within ``tol`` (relative) are rejected.
    """
    A = as_matrix(M, square=True)
    if not is_hermitian(A, tol):
        raise PreconditionError("herm_eig needs a Hermitian matrix")
    w, U = np.linalg.eigh(hermitize(A))
    return w, U


def psd_function(M, f, tol=1e-9):
    """Apply ``f`` to the spectrum of a Hermitian matrix."""
    w, U = herm_eig(M, tol)
    return (U * f(w)) @ U.conj().T


def psd_sqrt(M):
    return psd_function(M, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def mat_exp(M):
    """Matrix exponential.

    Hermitian and skew-Hermitian inputs go through an eigendecomposition, so
    exponentials of skew-Hermitian generators are unitary to round-off.
    Everything else uses scaling and squaring with a Pade approximant.
    """
    A = as_matrix(M, square=True)
    if is_hermitian(A):
        w, U = np.linalg.eigh(hermitize(A))
        return (U * np.exp(w)) @ U.conj().T
    if is_hermitian(1j * A):
        # A = -i H with H = iA Hermitian
        w, U = np.linalg.eigh(hermitize(1j * A))
        return (U * np.exp(-1j * w)) @ U.conj().T
    return sla.expm(A)


def kron(*mats):
    if not mats:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, [np.asarray(m, dtype=complex) for m in mats])


def partial_trace(M, dims, keep):
    """Trace out every tensor factor not listed in ``keep``.

    ``dims`` are the factor dimensions, ``keep`` an iterable of factor
    indices.  Kept factors stay in their original order.
    """
    A = as_matrix(M, square=True)
    dims = [int(d) for d in dims]
    n = len(dims)
    if int(np.prod(dims)) != A.shape[0]:
        raise DimensionError(f"dims {dims} do not factor dimension {A.shape[0]}")
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise DimensionError(f"keep {keep} out of range for {n} factors")
    T = A.reshape(dims + dims)
    row = list(range(n))
    col = [i + n for i in range(n)]
    for i in range(n):
        if i not in keep:
            col[i] = row[i]
    out_row = [row[k] for k in keep]
    out_col = [col[k] for k in keep]
    dk = int(np.prod([dims[k] for k in keep])) if keep else 1
    R = np.einsum(T, row + col, out_row + out_col)
    return np.asarray(R).reshape(dk, dk)


def permute_factors(M, dims, order):
    """Reorder tensor factors of a square operator.

    The factor at position ``order[i]`` of the input ends up at position
    ``i`` of the output.
    """
    A = np.asarray(M)
    n = len(dims)
    T = A.reshape(list(dims) * 2)
    T = T.transpose(list(order) + [o + n for o in order])
    d = A.shape[0]
    return T.reshape(d, d)


def embed(op, sites, dims):
    """Place ``op`` (acting on the listed sites, in that order) inside the full space."""
    sites = list(sites)
    rest = [i for i in range(len(dims)) if i not in sites]
    d_rest = int(np.prod([dims[i] for i in rest])) if rest else 1
    full = np.kron(np.asarray(op, dtype=complex), np.eye(d_rest))
    current = sites + rest
    cur_dims = [dims[i] for i in current]
    order = [current.index(i) for i in range(len(dims))]
    return permute_factors(full, cur_dims, order)


def pinv_on_support(M, eps=PINV_EPS):
    """Pseudo-inverse of a PSD matrix; eigenvalues below ``eps * max`` count as kernel."""
    w, U = herm_eig(M)
    top = max(w.max(initial=0.0), 0.0)
    if w.min(initial=0.0) < -max(1e-9 * top, 1e-12):
        raise PreconditionError(f"matrix is not PSD (min eigenvalue {w.min():.3e})")
    keep = w > eps * top if top > 0 else np.zeros_like(w, dtype=bool)
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return (U * inv) @ U.conj().T


def support_projector(M, eps=PINV_EPS):
    w, U = herm_eig(M)
    top = max(w.max(initial=0.0), 0.0)
    keep = w > eps * top if top > 0 else np.zeros_like(w, dtype=bool)
    V = U[:, keep]
    return V @ V.conj().T


def vec(X):
    return np.asarray(X, dtype=complex).reshape(-1, order="F")


def unvec(v, d=None):
    v = np.asarray(v)
    if d is None:
        d = int(round(np.sqrt(v.size)))
    if isinstance(d, tuple):
        return v.reshape(d, order="F")
    if d * d != v.size:
        raise DimensionError(f"vector of length {v.size} is not a {d}x{d} matrix")
    return v.reshape(d, d, order="F")


def lr_superop(A, B):
    """Superoperator of ``X -> A X B``."""
    return np.kron(np.asarray(B, dtype=complex).T, np.asarray(A, dtype=complex))


def commutator_superop(A):
    """Superoperator of ``X -> [A, X]``."""
    A = np.asarray(A, dtype=complex)
    I = np.eye(A.shape[0])
    return np.kron(I, A) - np.kron(A.T, I)


def superop_from_function(f, d_in, d_out=None):
    """Assemble the superoperator of a linear map by applying it to matrix units."""
    d_out = d_in if d_out is None else d_out
    S = np.zeros((d_out * d_out, d_in * d_in), dtype=complex)
    for j in range(d_in):
        for i in range(d_in):
            E = np.zeros((d_in, d_in), dtype=complex)
            E[i, j] = 1.0
            S[:, i + j * d_in] = vec(f(E))
    return S


def apply_superop(S, X):
    X = np.asarray(X, dtype=complex)
    d_out = int(round(np.sqrt(S.shape[0])))
    return unvec(S @ vec(X), d_out)


def superop_adjoint(S):
    return np.asarray(S).conj().T


def choi_from_superop(S, d_in=None):
    """Choi matrix ``sum_ij E_ij (x) Phi(E_ij)`` (input factor first)."""
    S = np.asarray(S, dtype=complex)
    d_in = int(round(np.sqrt(S.shape[1]))) if d_in is None else d_in
    d_out = int(round(np.sqrt(S.shape[0])))
    # S[(a + b d_out), (i + j d_in)] = <a|Phi(E_ij)|b>
    T = S.reshape(d_out, d_out, d_in, d_in, order="F")  # a, b, i, j
    return T.transpose(2, 0, 3, 1).reshape(d_in * d_out, d_in * d_out)


def superop_from_choi(J, d_in, d_out):
    J = np.asarray(J, dtype=complex)
    T = J.reshape(d_in, d_out, d_in, d_out).transpose(1, 3, 0, 2)
    return T.reshape(d_out * d_out, d_in * d_in, order="F")


def hermitian_basis(d):
    """Orthonormal (Hilbert-Schmidt) basis of d x d Hermitian matrices, shape (d*d, d, d)."""
    B = []
    for k in range(d):
        E = np.zeros((d, d), dtype=complex)
        E[k, k] = 1.0
        B.append(E)
    s = 1 / np.sqrt(2)
    for k in range(d):
        for l in range(k + 1, d):
            E = np.zeros((d, d), dtype=complex)
            E[k, l] = E[l, k] = s
            B.append(E)
            F = np.zeros((d, d), dtype=complex)
            F[k, l] = -1j * s
            F[l, k] = 1j * s
            B.append(F)
    return np.array(B)


@dataclass(frozen=True, eq=False)
class DensityState:
    """A validated density matrix (PSD, unit trace)."""

    matrix: np.ndarray

    def __post_init__(self):
        A = as_matrix(self.matrix, square=True)
        if not is_hermitian(A, 1e-10):
            raise PreconditionError("density matrix is not Hermitian")
        A = hermitize(A)
        if abs(np.trace(A).real - 1.0) > 1e-10:
            raise PreconditionError(f"trace {np.trace(A).real:.12g} != 1")
        if np.linalg.eigvalsh(A).min() < -1e-10:
            raise PreconditionError("density matrix has a negative eigenvalue")
        object.__setattr__(self, "matrix", A)

    @property
    def dim(self):
        return self.matrix.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.matrix if dtype is None else self.matrix.astype(dtype)


def as_state(rho):
    """Accept a DensityState or an array and return a validated DensityState."""
    return rho if isinstance(rho, DensityState) else DensityState(np.asarray(rho))


def floor_state(rho, eps=1e-12):
    R = np.asarray(rho, dtype=complex)
    d = R.shape[0]
    return (1 - eps) * R + eps * np.eye(d) / d


def random_density(d, rng, rank=None):
    """Random mixed state from the induced (Ginibre) measure."""
    k = d if rank is None else rank
    G = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    R = G @ G.conj().T
    return R / np.trace(R).real


def random_pure(d, rng):
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    v /= np.linalg.norm(v)
    return np.outer(v, v.conj())


def random_hermitian(d, rng, scale=1.0):
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return scale * (G + G.conj().T) / 2


def random_unitary(d, rng):
    G = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    Q, R = np.linalg.qr(G)
    return Q * (np.diag(R) / np.abs(np.diag(R)))
