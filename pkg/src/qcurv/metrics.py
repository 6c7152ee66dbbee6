"""Transport metrics: Lipschitz semi-norms, their dual W1 distances, coupling
costs, operator means and the Benamou-Brenier type metric tensor.

Every semi-norm unit ball is written as a set of linear matrix inequalities
in real coordinates of the Hermitian test operator (orthonormal Hermitian
basis of :func:`qcurv.matcore.hermitian_basis`), which lets :mod:`qcurv.optim`
solve the dual transport problems exactly.
"""

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import (
    DimensionError, InfiniteMetricError, PreconditionError, QcurvError, SolverError,
)
from .matcore import (
    as_matrix, commutator_superop, embed, hermitian_basis, hermitize, is_hermitian,
    op_norm, partial_trace, pinv_on_support, psd_function, superop_from_function,
    trace_norm, unvec, vec,
)
from .optim import LmiProgram, SdpProblem, solve_sdp

KERNEL_TOL = 1e-8
_VARIANTS = ("operator_norm", "commutator_max", "commutator_l2", "oscillator",
             "ornstein", "site_max", "gamma")


# ---------------------------------------------------------------------------
# semi-norm descriptions


def _site_replace(x, dims, i):
    keep = [k for k in range(len(dims)) if k != i]
    return embed(partial_trace(x, dims, keep) / dims[i], keep, dims)


def _dedupe_adjoints(gens):
    """Drop generators whose adjoint is already present.

    For Hermitian ``x`` one has ``[A^dagger, x] = -[A, x]^dagger``, so the two
    commutators have the same norm.
    """
    out = []
    for A in gens:
        Ad = A.conj().T
        if any(np.allclose(B, Ad, atol=1e-12) for B in out):
            continue
        out.append(A)
    return out


def gamma_jumps(L):
    """Operators ``V_j`` with ``Gamma(x, x) = 1/2 sum_j [V_j, x]^dagger [V_j, x]``.

    Read off from the Choi matrix of the generator compressed to the
    complement of the maximally entangled vector, where it is positive.
    """
    L = np.asarray(L, dtype=complex)
    d = int(round(math.sqrt(L.shape[0])))
    J = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = 1.0
            J += np.kron(E, unvec(L @ vec(E), d))
    omega = np.eye(d).reshape(-1) / math.sqrt(d)
    Q = np.eye(d * d) - np.outer(omega, omega)
    w, U = np.linalg.eigh(hermitize(Q @ J @ Q))
    if w[0] < -1e-8 * max(1.0, abs(w).max()):
        raise PreconditionError("generator is not conditionally completely positive")
    keep = w > 1e-12 * max(1.0, abs(w).max())
    return [np.sqrt(w[k]) * np.conj(U[:, k].reshape(d, d)) for k in np.nonzero(keep)[0]]


def gamma_form(L, x, y=None):
    """``Gamma(x, y) = 1/2 (L(x^dagger y) - L(x^dagger) y - x^dagger L(y))``."""
    y = x if y is None else y
    d = x.shape[0]
    Lf = lambda z: unvec(L @ vec(z), d)
    xd = x.conj().T
    return 0.5 * (Lf(xd @ y) - Lf(xd) @ y - xd @ Lf(y))


@dataclass(frozen=True, eq=False)
class SemiNormSpec:
    """Declarative Lipschitz semi-norm on ``dim x dim`` Hermitian matrices.

    Variants: ``operator_norm``; ``commutator_max`` (``max_j ||[A_j, x]||``);
    ``commutator_l2`` (``(sum_j ||[v_j, x]||^2)^(1/2)``); ``oscillator``
    (``sum_i ||x - tau_i x||``); ``site_max`` (``max_i ||x - tau_i x||``);
    ``ornstein`` (``max_i min_z ||x - z (x) 1_i||``); ``gamma`` (gradient
    form of a generator).  ``tau_i`` replaces site ``i`` by its normalized
    partial trace.
    """

    variant: str
    dim: int
    generators: tuple = ()
    site_dims: tuple = ()
    generator: Optional[np.ndarray] = None
    label: str = ""

    def __post_init__(self):
        if self.variant not in _VARIANTS:
            raise PreconditionError(f"unknown semi-norm variant {self.variant!r}")
        gens = tuple(np.asarray(as_matrix(A, square=True), dtype=complex) for A in self.generators)
        object.__setattr__(self, "generators", gens)
        for A in gens:
            if A.shape[0] != self.dim:
                raise DimensionError("generator dimension differs from spec dimension")
        if self.variant in ("commutator_max", "commutator_l2") and not gens:
            raise PreconditionError("commutator semi-norms need generators")
        if self.variant in ("oscillator", "ornstein", "site_max"):
            sd = tuple(int(s) for s in self.site_dims)
            if not sd or int(np.prod(sd)) != self.dim:
                raise DimensionError(f"site dims {sd} do not factorize {self.dim}")
            object.__setattr__(self, "site_dims", sd)
        if self.variant == "gamma":
            if self.generator is None:
                raise PreconditionError("gamma semi-norm needs a generator superoperator")
            G = np.asarray(self.generator, dtype=complex)
            if G.shape != (self.dim ** 2, self.dim ** 2):
                raise DimensionError("generator superoperator has the wrong size")
            object.__setattr__(self, "generator", G)

    # constructors ---------------------------------------------------------
    @classmethod
    def operator_norm(cls, d):
        return cls("operator_norm", int(d), label="operator_norm")

    @classmethod
    def commutator_max(cls, gens):
        gens = list(gens)
        return cls("commutator_max", np.asarray(gens[0]).shape[0], tuple(gens), label="commutator_max")

    @classmethod
    def commutator_l2(cls, gens):
        gens = list(gens)
        return cls("commutator_l2", np.asarray(gens[0]).shape[0], tuple(gens), label="commutator_l2")

    @classmethod
    def oscillator(cls, site_dims):
        return cls("oscillator", int(np.prod(site_dims)), site_dims=tuple(site_dims), label="oscillator")

    @classmethod
    def ornstein(cls, site_dims):
        return cls("ornstein", int(np.prod(site_dims)), site_dims=tuple(site_dims), label="ornstein")

    @classmethod
    def site_max(cls, site_dims):
        return cls("site_max", int(np.prod(site_dims)), site_dims=tuple(site_dims), label="site_max")

    @classmethod
    def gamma(cls, L):
        L = np.asarray(L, dtype=complex)
        d = int(round(math.sqrt(L.shape[0])))
        return cls("gamma", d, generator=L, label="gamma")

    # structure ------------------------------------------------------------
    @cached_property
    def gamma_operators(self):
        return gamma_jumps(self.generator) if self.variant == "gamma" else []

    def _null_maps(self):
        """Linear maps whose common kernel is ``ker L`` (as functions on matrices)."""
        v = self.variant
        if v == "operator_norm":
            return [lambda x: x]
        if v in ("commutator_max", "commutator_l2"):
            return [lambda x, A=A: A @ x - x @ A for A in self.generators]
        if v == "gamma":
            return [lambda x, A=A: A @ x - x @ A for A in self.gamma_operators] or [lambda x: 0 * x]
        dims = list(self.site_dims)
        return [lambda x, i=i: x - _site_replace(x, dims, i) for i in range(len(dims))]

    @cached_property
    def basis(self):
        return hermitian_basis(self.dim)

    @cached_property
    def kernel_basis(self):
        """Orthonormal real coordinates (columns) spanning ``ker L`` in the Hermitian basis."""
        HB = self.basis
        rows = []
        for f in self._null_maps():
            img = np.array([f(B) for B in HB])              # m, d, d
            flat = img.reshape(len(HB), -1).T
            rows.append(flat.real)
            rows.append(flat.imag)
        M = np.vstack(rows)
        _, s, Vt = np.linalg.svd(M, full_matrices=True)
        scale = max(s.max(initial=0.0), 1.0)
        rank = int(np.sum(s > 1e-9 * scale))
        return Vt[rank:].T.copy()

    @cached_property
    def complement_indices(self):
        """Basis elements spanning a complement of the kernel (pivoted QR)."""
        K = self.kernel_basis
        m = self.dim ** 2
        k = K.shape[1]
        if k == 0:
            return np.arange(m)
        B = np.eye(m) - K @ K.T
        _, _, piv = sla.qr(B, pivoting=True, mode="economic")
        return np.sort(piv[: m - k])

    def kernel_projection(self, x):
        """Hilbert-Schmidt projection of ``x`` onto ``ker L``."""
        K = self.kernel_basis
        if K.shape[1] == 0:
            return np.zeros_like(np.asarray(x, dtype=complex))
        c = np.real(np.einsum("kij,ji->k", self.basis, np.asarray(x, dtype=complex)))
        p = K @ (K.T @ c)
        return np.einsum("k,kij->ij", p, self.basis)

    def __call__(self, x):
        return seminorm_eval(self, x)


# ---------------------------------------------------------------------------
# LMI unit balls


def _bound_blocks(Y, nv, aux=None, hermitian=False):
    """Blocks encoding ``||sum_i y_i Y_i|| <= t`` (``t = 1`` or the aux variable).

    ``Y`` has shape ``(nv, p, q)``; rows of variables that do not enter are zero.
    Returns a list of ``(constant, coefficient tensor)``.
    """
    _, p, q = Y.shape
    if hermitian:
        out = []
        for s in (1.0, -1.0):
            T = -s * Y.copy()
            const = np.zeros((p, p), complex)
            if aux is None:
                const = np.eye(p, dtype=complex)
            else:
                T[aux] += np.eye(p)
            out.append((const, T))
        return out
    n = p + q
    T = np.zeros((nv, n, n), dtype=complex)
    T[:, :p, p:] = Y
    T[:, p:, :p] = np.conj(np.transpose(Y, (0, 2, 1)))
    if aux is None:
        const = np.eye(n, dtype=complex)
    else:
        const = np.zeros((n, n), complex)
        T[aux] += np.eye(n)
    return [(const, T)]


def _lift(imgs, nv):
    """Pad a tensor of images of the x-coordinates to all ``nv`` variables."""
    m = imgs.shape[0]
    T = np.zeros((nv,) + imgs.shape[1:], dtype=complex)
    T[:m] = imgs
    return T


def unit_ball_program(spec, X):
    """LMI description of ``{x = sum_i y_i X_i : L(x) <= 1}``.

    ``X`` has shape ``(m, d, d)``.  Returns ``(program, blocks, nv)`` where
    the first ``m`` variables are the coordinates of ``x`` and the remaining
    ones are auxiliary.
    """
    m, d, _ = X.shape
    v = spec.variant
    blocks = []
    if v == "operator_norm":
        nv = m
        blocks += _bound_blocks(X.copy(), nv, hermitian=True)
    elif v in ("commutator_max", "gamma"):
        gens = _dedupe_adjoints(spec.generators) if v == "commutator_max" else spec.gamma_operators
        nv = m
        if v == "gamma":
            # ||1/2 sum_j [V_j,x]^dagger [V_j,x]|| <= 1  <=>  ||stacked [V_j, x]|| <= sqrt 2
            Y = np.concatenate([np.array([A @ B - B @ A for B in X]) for A in gens], axis=1) / math.sqrt(2)
            blocks += _bound_blocks(Y, nv)
        else:
            for A in gens:
                Y = np.array([A @ B - B @ A for B in X])
                if is_hermitian(A, 1e-12):
                    blocks += _bound_blocks(1j * Y, nv, hermitian=True)
                else:
                    blocks += _bound_blocks(Y, nv)
    elif v == "commutator_l2":
        gens = spec.generators
        k = len(gens)
        nv = m + 2 * k       # t_j then s_j
        for j, A in enumerate(gens):
            Y = _lift(np.array([A @ B - B @ A for B in X]), nv)
            if is_hermitian(A, 1e-12):
                blocks += _bound_blocks(1j * Y, nv, aux=m + j, hermitian=True)
            else:
                blocks += _bound_blocks(Y, nv, aux=m + j)
            # [[1, t_j], [t_j, s_j]] >= 0
            T = np.zeros((nv, 2, 2), complex)
            T[m + j, 0, 1] = T[m + j, 1, 0] = 1.0
            T[m + k + j, 1, 1] = 1.0
            blocks.append((np.diag([1.0, 0.0]).astype(complex), T, False))
        T = np.zeros((nv, 1, 1), complex)
        T[m + k:, 0, 0] = -1.0
        blocks.append((np.ones((1, 1), complex), T, False))
    elif v in ("oscillator", "site_max"):
        dims = list(spec.site_dims)
        n = len(dims)
        nv = m + (n if v == "oscillator" else 0)
        for i in range(n):
            Y = _lift(np.array([B - _site_replace(B, dims, i) for B in X]), nv)
            blocks += _bound_blocks(Y, nv, aux=(m + i) if v == "oscillator" else None, hermitian=True)
        if v == "oscillator":
            T = np.zeros((nv, 1, 1), complex)
            T[m:, 0, 0] = -1.0
            blocks.append((np.ones((1, 1), complex), T, False))
    elif v == "ornstein":
        dims = list(spec.site_dims)
        n = len(dims)
        zb = []
        offsets = []
        nv = m
        for i in range(n):
            keep = [k for k in range(n) if k != i]
            dc = int(np.prod([dims[k] for k in keep])) if keep else 1
            HB = hermitian_basis(dc)
            zb.append([embed(H, keep, dims) if keep else H[0, 0] * np.eye(d) for H in HB])
            offsets.append(nv)
            nv += len(HB)
        for i in range(n):
            Y = _lift(X.copy(), nv)
            for a, Z in enumerate(zb[i]):
                Y[offsets[i] + a] = -Z
            blocks += _bound_blocks(Y, nv, hermitian=True)
    else:  # pragma: no cover - rejected in SemiNormSpec
        raise PreconditionError(v)

    prog = LmiProgram(nv)
    for blk in blocks:
        const, T = blk[0], blk[1]
        cplx = blk[2] if len(blk) > 2 else True
        n = const.shape[0]
        prog.add_operator_block(const, sp.csr_matrix(T.reshape(nv, n * n)), complex_block=cplx)
    return prog, nv


# ---------------------------------------------------------------------------
# evaluation


def _ornstein_site(x, dims, i, tol=1e-10):
    n = len(dims)
    keep = [k for k in range(n) if k != i]
    d = x.shape[0]
    if not keep:
        w = np.linalg.eigvalsh(x)
        return 0.5 * (w[-1] - w[0])
    dc = int(np.prod([dims[k] for k in keep]))
    HB = hermitian_basis(dc)
    Z = np.array([embed(H, keep, dims) for H in HB])
    nv = 1 + len(HB)
    # t I -+ (x - sum z_a Z_a) >= 0
    blocks = []
    for s in (1.0, -1.0):
        T = np.zeros((nv, d, d), complex)
        T[0] = np.eye(d)
        T[1:] = s * Z
        blocks.append((-s * x, T))
    prog = LmiProgram(nv)
    for const, T in blocks:
        prog.add_operator_block(const, sp.csr_matrix(T.reshape(nv, d * d)))
    c = np.zeros(nv)
    c[0] = 1.0
    sol = prog.solve(c, "min", tol=tol)
    if sol.status != "optimal" and sol.gap > 1e-6:
        raise SolverError("Ornstein inner problem did not converge",
                          {"gap": sol.gap, "status": sol.status})
    return max(0.0, float(sol.y[0]))


def seminorm_eval(spec, x):
    """Value ``L(x)`` of the semi-norm on a Hermitian matrix."""
    x = as_matrix(x, square=True)
    if x.shape[0] != spec.dim:
        raise DimensionError(f"matrix of size {x.shape[0]} for a semi-norm on {spec.dim}")
    v = spec.variant
    if v == "operator_norm":
        return op_norm(x)
    if v == "commutator_max":
        return max(op_norm(A @ x - x @ A) for A in spec.generators)
    if v == "commutator_l2":
        return math.sqrt(sum(op_norm(A @ x - x @ A) ** 2 for A in spec.generators))
    dims = list(spec.site_dims) if spec.site_dims else None
    if v == "oscillator":
        return float(sum(op_norm(x - _site_replace(x, dims, i)) for i in range(len(dims))))
    if v == "site_max":
        return float(max(op_norm(x - _site_replace(x, dims, i)) for i in range(len(dims))))
    if v == "ornstein":
        if not is_hermitian(x, 1e-10):
            raise PreconditionError("Ornstein evaluation needs a Hermitian matrix")
        return float(max(_ornstein_site(hermitize(x), dims, i) for i in range(len(dims))))
    if v == "gamma":
        L = spec.generator
        a = op_norm(gamma_form(L, x))
        b = op_norm(gamma_form(L, x.conj().T))
        return math.sqrt(max(a, b, 0.0))
    raise PreconditionError(v)  # pragma: no cover


@dataclass
class TransportResult:
    """Value of a transport cost with its certificate.

    ``value`` is ``inf`` when ``status == "infinite"``.  ``lower`` comes from
    a strictly feasible witness, ``upper`` from the dual bound.
    """

    value: float
    status: str = "finite"
    witness: Optional[np.ndarray] = None
    gap: float = 0.0
    lower: float = 0.0
    upper: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_infinite(self):
        return self.status == "infinite"

    def to_dict(self):
        if self.is_infinite:
            return {"status": "infinite"}
        return {"value": float(self.value), "status": self.status, "gap": float(self.gap),
                "lower": float(self.lower), "upper": float(self.upper)}


def _check_states(rho1, rho2):
    r1 = as_matrix(rho1, square=True)
    r2 = as_matrix(rho2, square=True)
    if r1.shape != r2.shape:
        raise DimensionError("states of different dimensions")
    for r in (r1, r2):
        if not is_hermitian(r, 1e-9):
            raise PreconditionError("state is not Hermitian")
        if abs(np.trace(r) - 1) > 1e-8:
            raise PreconditionError("state does not have unit trace")
        if np.linalg.eigvalsh(hermitize(r))[0] < -1e-8:
            raise PreconditionError("state is not positive")
    return hermitize(r1), hermitize(r2)


def w1_dual(spec, rho1, rho2, tol=1e-9):
    """``sup { Tr((rho1 - rho2) x) : x Hermitian, L(x) <= 1 }``.

    Returns an infinite result without calling the solver when the two
    states differ on ``ker L``.
    """
    r1, r2 = _check_states(rho1, rho2)
    if r1.shape[0] != spec.dim:
        raise DimensionError("state dimension differs from the semi-norm")
    delta = r1 - r2
    if trace_norm(delta) <= 1e-14:
        return TransportResult(0.0, witness=np.zeros_like(delta), lower=0.0, upper=0.0)
    leak = trace_norm(spec.kernel_projection(delta))
    if leak > KERNEL_TOL:
        return TransportResult(math.inf, "infinite", diagnostics={"kernel_component": leak})
    idx = spec.complement_indices
    X = spec.basis[idx]
    prog, nv = unit_ball_program(spec, X)
    c = np.zeros(nv)
    c[: len(idx)] = np.real(np.einsum("kij,ji->k", X, delta))
    sol = prog.solve(c, "max", tol=tol)
    if sol.status not in ("optimal",) and sol.gap > 1e-6:
        raise SolverError("transport SDP did not converge",
                          {"status": sol.status, "gap": sol.gap, "iterations": sol.iterations,
                           "primal_infeas": sol.primal_infeasibility,
                           "dual_infeas": sol.dual_infeasibility})
    y = sol.y[: len(idx)]
    x = hermitize(np.einsum("k,kij->ij", y, X))
    x = x / (1 + 10 * sol.gap)
    Lx = seminorm_eval(spec, x) if spec.variant != "ornstein" else None
    if Lx is not None and Lx > 1:
        x = x / Lx
    lower = float(np.real(np.trace(delta @ x)))
    upper = max(sol.primal_objective, sol.dual_objective)
    value = max(sol.value, 0.0)
    return TransportResult(value, "finite", x, sol.gap, lower, upper,
                           {"status": sol.status, "iterations": sol.iterations,
                            "num_vars": nv})


def jump(spec, rho, ch, tol=1e-9):
    """``W(rho, P^dagger(rho))`` for the semi-norm ``spec`` and channel ``ch``."""
    return w1_dual(spec, rho, hermitize(ch.apply_adjoint(rho)), tol=tol)


# ---------------------------------------------------------------------------
# coupling costs


def coupling_cost(C, rho1, rho2, tol=1e-10):
    """``inf { Tr(pi C) : pi >= 0, Tr_2 pi = rho1, Tr_1 pi = rho2 }``.

    The primal program is solved in standard form; the dual
    ``sup Tr(rho1 x) - Tr(rho2 y)`` over ``x (x) 1 - 1 (x) y <= C`` is solved
    separately as an LMI, and both values are reported.
    """
    r1, r2 = _check_states(rho1, rho2)
    d = r1.shape[0]
    C = as_matrix(C, square=True)
    if C.shape[0] != d * d:
        raise DimensionError("cost must act on the two-fold tensor product")
    if not is_hermitian(C, 1e-10) or np.linalg.eigvalsh(hermitize(C))[0] < -1e-9:
        raise PreconditionError("cost must be Hermitian positive semidefinite")
    C = hermitize(C)
    if np.abs(C).max() == 0:
        return TransportResult(0.0, witness=np.kron(r1, r2), diagnostics={"dual": 0.0})
    HB = hermitian_basis(d)
    I = np.eye(d)
    cons = []
    for H in HB:
        cons.append(([np.kron(H, I)], float(np.real(np.trace(H @ r1)))))
    # the trace constraint repeats once; drop the last diagonal unit of the second marginal
    for k, H in enumerate(HB):
        if k == d - 1:
            continue
        cons.append(([np.kron(I, H)], float(np.real(np.trace(H @ r2)))))
    prob = SdpProblem.from_constraints([d * d], [C], cons, sense="min")
    sol = solve_sdp(prob, tol=tol)
    if sol.status != "optimal" and sol.gap > 1e-6:
        raise SolverError("coupling SDP did not converge", {"gap": sol.gap, "status": sol.status})
    pi = hermitize(sol.X[0])
    primal = float(np.real(np.trace(pi @ C)))

    # dual program with its own assembly: variables x (d^2 coords), y (d^2 - 1 coords)
    ycoords = [k for k in range(len(HB)) if k != d - 1]
    nv = len(HB) + len(ycoords)
    prog = LmiProgram(nv)
    T = np.zeros((nv, d * d, d * d), complex)
    for k, H in enumerate(HB):
        T[k] = -np.kron(H, I)
    for a, k in enumerate(ycoords):
        T[len(HB) + a] = np.kron(I, HB[k])
    prog.add_operator_block(C, sp.csr_matrix(T.reshape(nv, -1)))
    c = np.concatenate([[np.real(np.trace(H @ r1)) for H in HB],
                        [-np.real(np.trace(HB[k] @ r2)) for k in ycoords]])
    dsol = prog.solve(c, "max", tol=tol)
    dual = float(dsol.value)
    gap = abs(primal - dual) / (1 + abs(primal) + abs(dual))
    return TransportResult(max(primal, 0.0), "finite", pi, gap, lower=dual, upper=primal,
                           diagnostics={"dual": dual, "primal": primal,
                                        "primal_status": sol.status, "dual_status": dsol.status})


def singlet_projector():
    psi = np.array([0, 1, -1, 0], dtype=complex) / math.sqrt(2)
    return np.outer(psi, psi.conj())


def antisymmetric_projector(d):
    """Projector onto the antisymmetric subspace of ``C^d (x) C^d``."""
    F = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            F[i * d + j, j * d + i] = 1.0
    return ((np.eye(d * d) - F) / 2).astype(complex)


# ---------------------------------------------------------------------------
# derivations, operator means and the metric tensor

_MEANS = ("arithmetic", "logarithmic", "weighted_exponential")


@dataclass(frozen=True, eq=False)
class DerivationStructure:
    """``partial_j(x) = [v_j, x]`` with Bohr frequencies and an operator mean."""

    generators: tuple
    bohr_frequencies: tuple = ()
    mean_kind: str = "logarithmic"
    sigma: Optional[np.ndarray] = None
    check_adjoint_closure: bool = True

    def __post_init__(self):
        gens = tuple(np.asarray(as_matrix(v, square=True), dtype=complex) for v in self.generators)
        if not gens:
            raise PreconditionError("a derivation needs at least one generator")
        d = gens[0].shape[0]
        if any(g.shape != (d, d) for g in gens):
            raise DimensionError("generators of different sizes")
        object.__setattr__(self, "generators", gens)
        om = tuple(float(w) for w in self.bohr_frequencies) or tuple(0.0 for _ in gens)
        if len(om) != len(gens):
            raise DimensionError("one Bohr frequency per generator")
        object.__setattr__(self, "bohr_frequencies", om)
        if self.mean_kind not in _MEANS:
            raise PreconditionError(f"unknown mean {self.mean_kind!r}")
        if self.check_adjoint_closure:
            for v in gens:
                vd = v.conj().T
                tol = 1e-10 * max(1.0, op_norm(v))
                if not any(np.abs(w - vd).max() <= tol for w in gens):
                    raise PreconditionError("generator set is not closed under adjoints")
        if self.sigma is not None:
            s = hermitize(as_matrix(self.sigma, square=True))
            object.__setattr__(self, "sigma", s)
            si = np.linalg.inv(s)
            for v, w in zip(gens, om):
                if op_norm(s @ v @ si - math.exp(-w) * v) > 1e-8 * max(1.0, op_norm(v)):
                    raise PreconditionError("Bohr frequency relation violated")

    @property
    def dim(self):
        return self.generators[0].shape[0]

    def derivative(self, x):
        return [v @ x - x @ v for v in self.generators]

    def superops(self):
        return [commutator_superop(v) for v in self.generators]


def _logmean_weights(a, b):
    """``(e^a - e^b) / (a - b)`` elementwise with its removable singularity."""
    t = a - b
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        r = np.where(np.abs(t) < 1e-12, 1.0, np.expm1(t) / np.where(t == 0, 1.0, t))
    return np.exp(b) * r


def mean_coefficients(p, kind, omega=0.0):
    """Matrix ``c_kl`` of the mean in the eigenbasis of a state with spectrum ``p``.

    Zero eigenvalues are exact zeros of every mean: the logarithmic and
    weighted exponential means vanish as soon as one argument does.
    """
    p = np.asarray(p, dtype=float)
    if kind == "arithmetic":
        return (p[:, None] + p[None, :]) / 2
    if kind not in ("logarithmic", "weighted_exponential"):
        raise PreconditionError(f"unknown mean {kind!r}")
    pos = p > 0
    logp = np.log(np.where(pos, p, 1.0))
    shift = 0.0 if kind == "logarithmic" else omega / 2
    c = _logmean_weights(logp[:, None] + shift, logp[None, :] - shift)
    return np.where(pos[:, None] & pos[None, :], c, 0.0)


def _floored(rho, kind, eps=1e-12, trace_tol=1e-8):
    r = hermitize(as_matrix(rho, square=True))
    if abs(np.trace(r) - 1) > trace_tol or np.linalg.eigvalsh(r)[0] < -1e-8:
        raise PreconditionError("mean superoperator needs a density matrix")
    if kind == "arithmetic":
        return r
    d = r.shape[0]
    return (1 - eps) * r + eps * np.eye(d) / d


def _support_eig(rho, support, kind, eps=1e-12):
    """Eigen-decomposition of ``rho`` floored inside the range of ``support``.

    The complement of the range gets exact zero eigenvalues.
    """
    r = hermitize(as_matrix(rho, square=True))
    P = hermitize(as_matrix(support, square=True))
    w, V = np.linalg.eigh(P)
    inside = V[:, w > 0.5]
    outside = V[:, w <= 0.5]
    leak = np.linalg.norm(r - P @ r @ P)
    if leak > 1e-10:
        raise PreconditionError(f"state leaves the declared support (residual {leak:.3e})")
    k = inside.shape[1]
    rs = inside.conj().T @ r @ inside
    if kind != "arithmetic":
        rs = (1 - eps) * rs + eps * np.eye(k) / k
    p_in, U_in = np.linalg.eigh(hermitize(rs))
    p = np.concatenate([np.clip(p_in, 0.0, None), np.zeros(outside.shape[1])])
    U = np.hstack([inside @ U_in, outside])
    return p, U


def mean_superop(rho, ds, j=0, support=None, trace_tol=1e-8):
    """Superoperator of ``X -> int_0^1 e^{w(s-1/2)} rho^s X rho^{1-s} ds`` (or the chosen mean).

    Without ``support`` the state is floored by ``1e-12`` on the whole
    space.  With a projector ``support`` it is floored only inside its range.
    ``trace_tol`` admits slightly subnormalized states such as truncated
    channel outputs.
    """
    kind = ds.mean_kind if isinstance(ds, DerivationStructure) else str(ds)
    omega = ds.bohr_frequencies[j] if isinstance(ds, DerivationStructure) else 0.0
    if support is None:
        r = _floored(rho, kind, trace_tol=trace_tol)
        p, U = np.linalg.eigh(r)
        p = np.clip(p, 0.0, None)
    else:
        p, U = _support_eig(rho, support, kind)
    c = mean_coefficients(p, kind, omega)
    W = np.kron(U.conj(), U)
    return (W * c.reshape(-1, order="F")[None, :]) @ W.conj().T


def metric_superop(rho, ds, support=None, trace_tol=1e-8):
    """``M_rho = sum_j partial_j^dagger Lambda_{rho, j} partial_j``."""
    M = 0
    for j, D in enumerate(ds.superops()):
        M = M + D.conj().T @ mean_superop(rho, ds, j, support, trace_tol) @ D
    return hermitize(M)


def metric_tensor_norm(x, rho, ds):
    """``sqrt(<x, M_rho^+ x>)`` for traceless Hermitian ``x`` in the range of ``M_rho``."""
    x = as_matrix(x, square=True)
    if abs(np.trace(x)) > 1e-9 * max(1.0, np.linalg.norm(x)):
        raise PreconditionError("metric tensor needs a traceless matrix")
    M = metric_superop(rho, ds)
    v = vec(x)
    nx = np.linalg.norm(v)
    if nx == 0:
        return 0.0
    w, U = np.linalg.eigh(M)
    tol = 1e-10 * max(1.0, abs(w).max())
    ker = U[:, w <= tol]
    resid = np.linalg.norm(ker.conj().T @ v)
    if resid > 1e-8 * nx:
        raise InfiniteMetricError(f"x has a component {resid:.3e} in the kernel of M_rho")
    Mp = pinv_on_support(M, eps=1e-10)
    return math.sqrt(max(0.0, float(np.real(v.conj() @ Mp @ v))))


def weighted_gradient_norm2(x, rho, ds):
    """``sum_j <partial_j x, Lambda_{rho,j} partial_j x>`` (the squared gradient norm)."""
    v = vec(as_matrix(x, square=True))
    total = 0.0
    for j, D in enumerate(ds.superops()):
        g = D @ v
        total += float(np.real(g.conj() @ mean_superop(rho, ds, j) @ g))
    return total


# ---------------------------------------------------------------------------
# relative entropy


def relative_entropy(rho, sigma, check_pinsker=True):
    """``D(rho || sigma)`` in nats; ``inf`` if the support condition fails."""
    r = hermitize(as_matrix(rho, square=True))
    s = hermitize(as_matrix(sigma, square=True))
    if r.shape != s.shape:
        raise DimensionError("states of different dimensions")
    pr, Ur = np.linalg.eigh(r)
    ps, Us = np.linalg.eigh(s)
    tol = 1e-12
    supp_s = Us[:, ps > tol]
    supp_r = Ur[:, pr > tol]
    resid = supp_r - supp_s @ (supp_s.conj().T @ supp_r)
    if supp_r.size and np.abs(resid).max() > 1e-8:
        return math.inf
    a = np.sum(pr[pr > tol] * np.log(pr[pr > tol]))
    logs = (Us[:, ps > tol] * np.log(ps[ps > tol])) @ Us[:, ps > tol].conj().T
    b = float(np.real(np.trace(r @ logs)))
    D = float(a - b)
    if check_pinsker:
        bound = 0.5 * trace_norm(r - s) ** 2
        if D < bound - 1e-9:
            raise QcurvError(f"Pinsker post-check failed: D = {D} < {bound}")
    return max(D, 0.0) if D > -1e-12 else D
