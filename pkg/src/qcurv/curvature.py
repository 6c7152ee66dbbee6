"""Curvature certificates for quantum channels.

Contraction factors of Lipschitz semi-norms, gradient estimates for the
operator-mean metric tensor, intertwining checks, and the inequalities that
follow from a curvature bound: spectral gap, (2-inf) Poincare constants,
transportation cost and transportation information inequalities, jump and
diameter bounds, tensorization and finite-group transference.

Factors are Heisenberg-picture contraction factors ``sup L(P x) / L(x)``;
the curvature is ``kappa = 1 - factor``.  Upper bounds come from structural
formulas when one applies and are then labelled certified; otherwise both
bounds come from a witness search and the report says so.
"""

import base64
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
import scipy.sparse as sp

from .channels import (
    Channel, ConditionalExpectation, GeneratorSpec, all_pauli_strings, c_sign,
    fixed_point_expectation, generator_fixed_projector, gns_gram, gns_symmetry_error,
    kms_gram, kms_symmetry_error, pauli_channel_eigenvalues, pauli_conditional_expectation,
    pauli_matrix, semigroup_channel,
)
from .errors import DimensionError, PreconditionError, SolverError, UnsupportedStructure
from .matcore import (
    apply_superop, as_matrix, choi_from_superop, commutator_superop, embed, hermitian_basis,
    hermitize, is_hermitian, kron, lr_superop, mat_exp, op_norm, partial_trace,
    pinv_on_support, psd_function, random_density, random_hermitian, random_pure,
    superop_from_function, trace_norm, unvec, vec,
)
from .metrics import (
    DerivationStructure, KERNEL_TOL, SemiNormSpec, _bound_blocks, _dedupe_adjoints, _lift,
    _site_replace, metric_superop, relative_entropy, seminorm_eval, w1_dual,
)
from .optim import LmiProgram, diamond_norm, psd_gap

BISECTION_TOL = 1e-6
MARGIN_TOL = 1e-9


def encode_matrix(M):
    """Base64 of the little-endian complex128 entries (row-major) of a square matrix."""
    A = np.ascontiguousarray(np.asarray(M, dtype="<c16"))
    return base64.b64encode(A.tobytes()).decode("ascii")


def decode_matrix(s):
    A = np.frombuffer(base64.b64decode(s), dtype="<c16")
    d = int(round(math.sqrt(A.size)))
    return A.reshape(d, d).copy()


def _superop_of(ch):
    if isinstance(ch, (Channel, ConditionalExpectation)):
        return np.asarray(ch.superop, dtype=complex)
    return np.asarray(ch, dtype=complex)


def _rect_superop(f, d, shape):
    p, q = shape
    M = np.zeros((p * q, d * d), dtype=complex)
    for j in range(d):
        for i in range(d):
            E = np.zeros((d, d), dtype=complex)
            E[i, j] = 1.0
            M[:, i + j * d] = np.asarray(f(E)).reshape(-1, order="F")
    return M


# ---------------------------------------------------------------------------
# gradient forms: L(x) = combine_g max_{o in g} ||o(x)||


@dataclass(frozen=True)
class _Op:
    matrix: np.ndarray        # (p q) x d^2, acts on vec(x)
    shape: tuple
    kind: Optional[str]       # "herm", "anti" (output type for Hermitian x) or None

    def __call__(self, x):
        return unvec(self.matrix @ vec(x), self.shape)


class GradientForm:
    """Semi-norm ``combine_g max_{o in g} ||o(x)||`` built from linear maps.

    ``combine`` is ``"max"``, ``"sum"`` or ``"l2"``.  Every non-Ornstein
    :class:`SemiNormSpec` has this shape, and so do tensor sums of them,
    which is what the witness searches and the Poincare relaxation need.
    """

    def __init__(self, groups, combine, dim, label=""):
        if combine not in ("max", "sum", "l2"):
            raise PreconditionError(f"unknown combination {combine!r}")
        self.groups = tuple(tuple(g) for g in groups)
        self.combine = combine
        self.dim = int(dim)
        self.label = label

    # construction ---------------------------------------------------------
    @classmethod
    def from_spec(cls, spec):
        if isinstance(spec, GradientForm):
            return spec
        d = spec.dim
        v = spec.variant
        if v == "operator_norm":
            return cls([[_Op(np.eye(d * d, dtype=complex), (d, d), "herm")]], "max", d, v)
        if v in ("commutator_max", "commutator_l2"):
            gens = _dedupe_adjoints(spec.generators) if v == "commutator_max" else spec.generators
            groups = [[_Op(commutator_superop(A), (d, d), "anti" if is_hermitian(A, 1e-12) else None)]
                      for A in gens]
            return cls(groups, "max" if v == "commutator_max" else "l2", d, v)
        if v in ("oscillator", "site_max"):
            dims = list(spec.site_dims)
            groups = []
            for i in range(len(dims)):
                M = np.eye(d * d, dtype=complex) - superop_from_function(
                    lambda x, i=i: _site_replace(x, dims, i), d)
                groups.append([_Op(M, (d, d), "herm")])
            return cls(groups, "sum" if v == "oscillator" else "max", d, v)
        if v == "gamma":
            V = spec.gamma_operators
            k = len(V)
            if k == 0:
                return cls([[_Op(np.zeros((d * d, d * d), complex), (d, d), "herm")]], "max", d, v)
            f = lambda x: np.vstack([A @ x - x @ A for A in V]) / math.sqrt(2)
            return cls([[_Op(_rect_superop(f, d, (k * d, d)), (k * d, d), None)]], "max", d, v)
        raise UnsupportedStructure(f"no gradient form for the {v!r} semi-norm")

    @classmethod
    def commutators(cls, gens, combine="max", label="commutators"):
        gens = [np.asarray(A, dtype=complex) for A in gens]
        d = gens[0].shape[0]
        groups = [[_Op(commutator_superop(A), (d, d), "anti" if is_hermitian(A, 1e-12) else None)]
                  for A in gens]
        return cls(groups, combine, d, label)

    @classmethod
    def tensor_sum(cls, factor_gens, dims, label="tensor_sum"):
        """``sum_i max_j ||[A_ij (x) 1, x]||`` with ``A_ij`` acting on factor ``i``."""
        dims = list(dims)
        D = int(np.prod(dims))
        groups = []
        for i, gens in enumerate(factor_gens):
            g = []
            for A in gens:
                B = embed(A, [i], dims)
                g.append(_Op(commutator_superop(B), (D, D), "anti" if is_hermitian(B, 1e-12) else None))
            groups.append(g)
        return cls(groups, "sum", D, label)

    def with_ancilla(self, d_anc):
        """The same form for ``1_anc (x) A`` generators on ``C^d_anc (x) C^d``.

        Only commutator-type forms lift this way.
        """
        d = self.dim
        I = np.eye(d_anc)
        groups = []
        for g in self.groups:
            ng = []
            for op in g:
                if op.shape != (d, d):
                    raise UnsupportedStructure("only square gradient components lift to an ancilla")
                f = lambda x, op=op: _apply_on_second(op, x, d_anc, d)
                ng.append(_Op(superop_from_function(f, d_anc * d), (d_anc * d, d_anc * d), op.kind))
            groups.append(ng)
        return GradientForm(groups, self.combine, d_anc * d, self.label + "+ancilla")

    # evaluation -----------------------------------------------------------
    def component_norms(self, x):
        return [[op_norm(op(x)) for op in g] for g in self.groups]

    def combine_values(self, per_group):
        a = np.asarray(per_group, dtype=float)
        if self.combine == "max":
            return float(a.max(initial=0.0))
        if self.combine == "sum":
            return float(a.sum())
        return float(math.sqrt((a ** 2).sum()))

    def __call__(self, x):
        x = np.asarray(x, dtype=complex)
        return self.combine_values([max(v) for v in self.component_norms(x)])

    # structure ------------------------------------------------------------
    @cached_property
    def _coords(self):
        HB = hermitian_basis(self.dim)
        V = np.array([vec(B) for B in HB]).T
        rows = []
        for g in self.groups:
            for op in g:
                img = op.matrix @ V
                rows.append(img.real)
                rows.append(img.imag)
        M = np.vstack(rows)
        _, s, Vt = np.linalg.svd(M, full_matrices=True)
        scale = max(s.max(initial=0.0), 1.0)
        r = int(np.sum(s > 1e-9 * scale))
        return HB, Vt[:r].copy(), Vt[r:].copy()

    @property
    def kernel_basis(self):
        """Hermitian matrices spanning ``ker L`` (orthonormal for the trace pairing)."""
        HB, _, K = self._coords
        return np.einsum("ik,kab->iab", K, HB)

    @property
    def complement_basis(self):
        HB, C, _ = self._coords
        return np.einsum("ik,kab->iab", C, HB)

    def ball_program(self, X):
        """LMI description of ``{sum_i y_i X_i : L <= 1}``; returns ``(program, nv)``."""
        m = len(X)
        G = len(self.groups)
        if self.combine == "max":
            nv = m
        elif self.combine == "sum":
            nv = m + G
        else:
            nv = m + 2 * G
        Xv = np.array([vec(B) for B in X]).T
        blocks = []
        for gi, g in enumerate(self.groups):
            aux = None if self.combine == "max" else m + gi
            for op in g:
                p, q = op.shape
                img = (op.matrix @ Xv).T.reshape(m, q, p).transpose(0, 2, 1)
                Y = _lift(img, nv)
                if op.kind == "herm":
                    blocks += _bound_blocks(Y, nv, aux=aux, hermitian=True)
                elif op.kind == "anti":
                    blocks += _bound_blocks(1j * Y, nv, aux=aux, hermitian=True)
                else:
                    blocks += _bound_blocks(Y, nv, aux=aux)
            if self.combine == "l2":
                T = np.zeros((nv, 2, 2), complex)
                T[m + gi, 0, 1] = T[m + gi, 1, 0] = 1.0
                T[m + G + gi, 1, 1] = 1.0
                blocks.append((np.diag([1.0, 0.0]).astype(complex), T, False))
        if self.combine != "max":
            T = np.zeros((nv, 1, 1), complex)
            T[(m if self.combine == "sum" else m + G):, 0, 0] = -1.0
            blocks.append((np.ones((1, 1), complex), T, False))
        prog = LmiProgram(nv)
        for blk in blocks:
            const, T = blk[0], blk[1]
            cplx = blk[2] if len(blk) > 2 else True
            n = const.shape[0]
            prog.add_operator_block(const, sp.csr_matrix(T.reshape(nv, n * n)), complex_block=cplx)
        return prog, nv

    def linearize(self, z):
        """Terms ``(weight, op, u, v)`` of a linear minorant ``f <= L`` exact at ``z``."""
        per = []
        for g in self.groups:
            best = (-1.0, None, None, None)
            for op in g:
                Z = op(z)
                U, s, Vh = np.linalg.svd(Z)
                if s[0] > best[0]:
                    best = (float(s[0]), op, U[:, 0], Vh[0].conj())
            per.append(best)
        vals = [b[0] for b in per]
        total = self.combine_values(vals)
        if total <= 0:
            return []
        if self.combine == "max":
            k = int(np.argmax(vals))
            return [(1.0,) + per[k][1:]]
        if self.combine == "sum":
            return [(1.0,) + b[1:] for b in per if b[0] > 0]
        return [(b[0] / total,) + b[1:] for b in per if b[0] > 0]


def _apply_on_second(op, x, d1, d2):
    """``(id (x) op)(x)`` for ``x`` on ``C^d1 (x) C^d2``."""
    T = np.asarray(x).reshape(d1, d2, d1, d2)
    out = np.zeros_like(T)
    for i in range(d1):
        for j in range(d1):
            out[i, :, j, :] = op(T[i, :, j, :])
    return out.reshape(d1 * d2, d1 * d2)


def _linear_coeffs(terms, QX):
    """Coefficients ``c_i = f(Q X_i)`` of the linear minorant on the coordinates."""
    c = np.zeros(QX.shape[1])
    for w, op, u, v in terms:
        wv = np.kron(v, u.conj())
        c += w * np.real((wv @ op.matrix) @ QX)
    return c


# ---------------------------------------------------------------------------
# reports


@dataclass
class CurvatureReport:
    """Bounds on the contraction factor ``sup L(P x) / L(x)``."""

    upper_bound_factor: float
    lower_bound_factor: float
    witness: Optional[np.ndarray]
    method: str
    residuals: dict = field(default_factory=dict)
    certified: bool = False

    @property
    def kappa(self):
        return 1.0 - self.upper_bound_factor

    def to_dict(self):
        def num(v):
            return {"status": "infinite"} if math.isinf(v) else float(v)
        res = {}
        for k, v in sorted(self.residuals.items()):
            if isinstance(v, (int, float, np.floating)):
                res[k] = num(float(v))
            elif isinstance(v, (str, bool)):
                res[k] = v
        return {"kind": "curvature", "factor_upper": num(self.upper_bound_factor),
                "factor_lower": num(self.lower_bound_factor), "kappa": num(self.kappa),
                "witness": encode_matrix(self.witness) if self.witness is not None else None,
                "certified": bool(self.certified), "method": self.method, "residuals": res}


@dataclass
class GEReport:
    """Outcome of the gradient-estimate bisection.

    ``kappa_star`` uses ``P^dagger M_rho P <= (1 - kappa) M_{P^dagger rho}``;
    ``kappa_sq`` is the same test read as ``(1 - kappa)^2``.
    """

    kappa_star: float
    margins: list
    states: list
    per_state_kappa: list
    kappa_sq: float
    eig_kappa: float
    margins_above: list = field(default_factory=list)
    convention: str = "quadratic"

    def to_dict(self):
        return {"kind": "ge", "kappa_star": float(self.kappa_star), "kappa_sq": float(self.kappa_sq),
                "eig_kappa": float(self.eig_kappa), "convention": self.convention,
                "min_margin": float(min(self.margins)) if self.margins else 0.0,
                "num_states": len(self.states)}


@dataclass
class InequalityReport:
    """Both sides of a certified inequality ``lhs <= rhs``."""

    lhs: float
    rhs: float
    status: str
    premises: dict = field(default_factory=dict)
    details: dict = field(default_factory=dict)

    @property
    def slack(self):
        if math.isinf(self.lhs) or math.isinf(self.rhs):
            return math.inf if math.isinf(self.rhs) else -math.inf
        return self.rhs - self.lhs

    def to_dict(self):
        def num(v):
            return {"status": "infinite"} if isinstance(v, float) and math.isinf(v) else v
        out = {"lhs": num(float(self.lhs)), "rhs": num(float(self.rhs)),
               "slack": num(float(self.slack)), "status": self.status}
        out["premises"] = {k: num(float(v)) if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool) else v
                           for k, v in sorted(self.premises.items())
                           if isinstance(v, (int, float, np.floating, str, bool))}
        out["details"] = {k: num(float(v)) if isinstance(v, (int, float, np.floating)) and not isinstance(v, bool) else v
                          for k, v in sorted(self.details.items())
                          if isinstance(v, (int, float, np.floating, str, bool))}
        return out


# ---------------------------------------------------------------------------
# Lipschitz factors


def _ascent(form, Q, rng, restarts, max_iter=30, starts=(), tol=1e-9):
    """Alternating ascent of ``L(Q x) / L(x)`` from random and given starts.

    Each step maximizes a linear minorant of ``L(Q .)`` that is exact at the
    current point over the unit ball of ``L``, so the ratio never decreases.
    Returns ``(ratio, witness, evaluations)``.
    """
    X = form.complement_basis
    m = len(X)
    if m == 0:
        return 0.0, None, 0
    Xv = np.array([vec(B) for B in X]).T
    QX = Q @ Xv
    prog, nv = form.ball_program(X)
    d = form.dim

    def mat(y):
        return hermitize(unvec(Xv @ y, d))

    def ratio_of(y):
        x = mat(y)
        Lx = form(x)
        if Lx <= 1e-14:
            return -1.0, y
        y = y / Lx
        return form(unvec(QX @ y, d)), y

    inits = [np.asarray(s, dtype=float) for s in starts]
    inits += [rng.normal(size=m) for _ in range(restarts)]
    best_r, best_y, evals = -1.0, None, 0
    for y0 in inits:
        r, y = ratio_of(y0)
        if r < 0:
            continue
        for _ in range(max_iter):
            terms = form.linearize(unvec(QX @ y, d))
            if not terms:
                break
            c = np.zeros(nv)
            c[:m] = _linear_coeffs(terms, QX)
            sol = prog.solve(c, "max", tol=tol)
            evals += 1
            if sol.status != "optimal" and sol.gap > 1e-6:
                break
            r_new, y_new = ratio_of(np.asarray(sol.y[:m]))
            if r_new <= r + 1e-10:
                break
            r, y = r_new, y_new
        if r > best_r:
            best_r, best_y = r, y
    if best_y is None:
        return 0.0, None, evals
    w = mat(best_y)
    w = w / form(w)
    return float(form(unvec(Q @ vec(w), d))), w, evals


def _kernel_violation(form, S):
    d = form.dim
    worst, arg = 0.0, None
    for k in form.kernel_basis:
        Pk = apply_superop(S, k)
        v = max(max(row) for row in form.component_norms(Pk)) if form.groups else 0.0
        if v > worst:
            worst, arg = v, k
    return worst, arg


def pauli_seminorm(spec):
    """``max_beta ||[sigma_beta, x]||`` over the strings of a Pauli channel spec."""
    gens = [pauli_matrix(s) for s, _ in spec.terms if set(s) != {"I"}]
    if not gens:
        return SemiNormSpec.operator_norm(2 ** spec.n)
    return SemiNormSpec.commutator_max(gens)


def pauli_structural_factor(spec):
    """``1 - 2 min_beta lambda_beta`` (minimum over every string of the channel)."""
    return 1.0 - 2.0 * spec.min_weight


def pauli_refined_factor(spec):
    """``max_{beta != 0} (1 - 2 min(lambda_0, lambda_beta))``."""
    w = spec.weights
    l0 = w["I" * spec.n]
    vals = [1.0 - 2.0 * min(l0, lb) for s, lb in spec.terms if s != "I" * spec.n]
    return max(vals) if vals else 0.0


def pauli_hat_maps(spec):
    """Superoperators ``hat_beta`` with ``partial_beta P = hat_beta partial_beta``.

    ``hat_beta = (lambda_0 - lambda_beta) id + sum_{alpha != 0, beta} (-1)^c lambda_alpha Ad_alpha``,
    which is ``(1 - 2 lambda(beta))`` times a complete contraction.
    """
    n = spec.n
    w = spec.weights
    zero = "I" * n
    out = []
    for beta, lb in spec.terms:
        if beta == zero:
            continue
        H = (w[zero] - lb) * np.eye(4 ** n, dtype=complex)
        for alpha, la in spec.terms:
            if alpha in (zero, beta):
                continue
            P = pauli_matrix(alpha)
            H += (-1) ** c_sign(alpha, beta) * la * lr_superop(P, P)
        out.append(H)
    return out


def lipschitz_factor(ch, spec, budget=20, *, pauli_spec=None, structural=None, rng=None,
                     max_iter=30, starts=(), kernel_tol=KERNEL_TOL):
    """Contraction factor of ``ch`` for the semi-norm ``spec``.

    ``budget`` is the number of random restarts of the witness ascent.
    ``pauli_spec`` enables the structural Pauli bound and Pauli-basis
    witnesses; ``structural`` supplies any other proven upper bound.
    """
    S = _superop_of(ch)
    form = GradientForm.from_spec(spec)
    d = form.dim
    if S.shape != (d * d, d * d):
        raise DimensionError("channel and semi-norm dimensions differ")
    rng = np.random.default_rng(0) if rng is None else rng
    viol, arg = _kernel_violation(form, S)
    if viol > kernel_tol:
        return CurvatureReport(math.inf, math.inf, arg, "kernel-violation",
                               {"kernel_violation": viol}, certified=True)
    if len(form.complement_basis) == 0:
        return CurvatureReport(0.0, 0.0, np.zeros((d, d), complex), "trivial", {}, certified=True)
    residuals = {"kernel_violation": viol}
    lower, witness, method = -1.0, None, "witness-search"
    upper = None
    if pauli_spec is not None:
        upper = pauli_structural_factor(pauli_spec)
        residuals["refined_factor"] = pauli_refined_factor(pauli_spec)
        mu = pauli_channel_eigenvalues(pauli_spec)
        best_mu = 0.0
        for g in all_pauli_strings(pauli_spec.n):
            x = pauli_matrix(g)
            Lx = form(x)
            if Lx <= 1e-12:
                continue
            r = form(apply_superop(S, x)) / Lx
            best_mu = max(best_mu, abs(mu[g]))
            if r > lower:
                lower, witness = r, x / Lx
        residuals["max_mu_nonfixed"] = best_mu
        method = "pauli-structural"
    if structural is not None:
        upper = float(structural) if upper is None else min(upper, float(structural))
        if method == "witness-search":
            method = "structural"
    evals = 0
    if budget > 0 or starts:
        r, w, evals = _ascent(form, S, rng, int(budget), max_iter=max_iter, starts=starts)
        if r > lower:
            lower, witness = r, w
    residuals["sdp_evaluations"] = evals
    lower = max(lower, 0.0)
    certified = upper is not None
    if upper is None:
        upper = lower
    elif lower > upper + 1e-7:
        residuals["structural_violation"] = lower - upper
        certified = False
    if witness is not None:
        residuals["witness_seminorm"] = form(witness)
    return CurvatureReport(float(upper), float(lower), witness, method, residuals, certified)


def composition_check(ch1, ch2, spec, f1, f2, budget=5, rng=None):
    """Measured factor of ``P1 o P2`` against ``f1 * f2``; returns ``(measured, bound)``."""
    S = _superop_of(ch1) @ _superop_of(ch2)
    rep = lipschitz_factor(S, spec, budget, rng=rng)
    return rep.lower_bound_factor, f1 * f2


def superposition_check(ch1, ch2, weight, spec, f1, f2, budget=5, rng=None):
    """Measured factor of ``w P1 + (1 - w) P2`` against ``w f1 + (1 - w) f2``."""
    S = weight * _superop_of(ch1) + (1 - weight) * _superop_of(ch2)
    rep = lipschitz_factor(S, spec, budget, rng=rng)
    return rep.lower_bound_factor, weight * f1 + (1 - weight) * f2


# ---------------------------------------------------------------------------
# gradient estimates for the metric tensor


def ge_sample_states(d, rng, n_random=16, n_pure=8, n_structured=8, floor=1e-3):
    """Haar-induced full-rank states, floored pure states and thermal/product states."""
    out = [random_density(d, rng) for _ in range(n_random)]
    for _ in range(n_pure):
        out.append((1 - floor) * random_pure(d, rng) + floor * np.eye(d) / d)
    k = int(round(math.log2(d))) if d > 1 else 0
    for i in range(n_structured):
        if 2 ** k == d and i % 2 == 0 and k > 0:
            out.append(kron(*[random_density(2, rng) for _ in range(k)]))
        else:
            beta = rng.uniform(0.1, 3.0)
            p = np.exp(-beta * np.arange(d))
            U = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))[0]
            out.append(hermitize((U * (p / p.sum())) @ U.conj().T))
    return out


def _gradient_range_basis(ds):
    """Orthonormal vec-space basis of the complement of ``ker partial``."""
    D = np.vstack(ds.superops())
    _, s, Vh = np.linalg.svd(D, full_matrices=True)
    r = int(np.sum(s > 1e-10 * max(s.max(initial=0.0), 1.0)))
    return Vh[:r].conj().T


def _max_generalized(A, B, tol=1e-10):
    """Largest ``t`` with ``A <= t B`` on the range of ``B``; ``inf`` if ``A`` leaves it."""
    w, U = np.linalg.eigh(hermitize(B))
    top = max(abs(w).max(initial=0.0), 1e-300)
    keep = w > tol * top
    Ur = U[:, keep]
    Uk = U[:, ~keep]
    A = hermitize(A)
    if Uk.shape[1]:
        leak = np.abs(Uk.conj().T @ A @ Uk).max(initial=0.0)
        if leak > 1e-9 * max(1.0, np.abs(A).max()):
            return math.inf
    Bi = Ur / np.sqrt(w[keep])
    return float(np.linalg.eigvalsh(hermitize(Bi.conj().T @ A @ Bi))[-1]) if keep.any() else 0.0


def verify_ge(ch, ds, states, kappa_grid=None, observable_basis=None, support=None,
              tol=BISECTION_TOL, margin_tol=MARGIN_TOL, trace_tol=1e-4):
    """Largest ``kappa`` with ``P^dagger M_rho P <= (1 - kappa) M_{P^dagger rho}`` on all samples.

    The test runs on the span of ``observable_basis`` (vec columns; default:
    the complement of ``ker partial``).  With a projector ``support`` the
    sampled states must live inside it and are floored only there.
    """
    S = _superop_of(ch)
    d = ds.dim
    if S.shape != (d * d, d * d):
        raise DimensionError("channel and derivation dimensions differ")
    X = _gradient_range_basis(ds) if observable_basis is None else np.asarray(observable_basis, complex)
    SX = S @ X
    pairs = []
    for rho in states:
        r = hermitize(as_matrix(rho, square=True))
        Mr = metric_superop(r, ds, support=support)
        out = hermitize(apply_superop(S.conj().T, r))
        Mo = metric_superop(out, ds, trace_tol=trace_tol)
        A = hermitize(SX.conj().T @ Mr @ SX)
        B = hermitize(X.conj().T @ Mo @ X)
        if np.abs(B).max() <= 1e-14:
            raise UnsupportedStructure("metric tensor vanishes on the observable space")
        pairs.append((A, B))

    def margins(kappa):
        return [psd_gap(A, (1 - kappa) * B) for A, B in pairs]

    def passes(kappa):
        return min(margins(kappa)) >= -margin_tol

    per = [1.0 - _max_generalized(A, B) for A, B in pairs]
    eig_kappa = min(per)
    if kappa_grid is not None:
        ok = [k for k in sorted(kappa_grid) if passes(k)]
        kstar = max(ok) if ok else -math.inf
    elif math.isinf(eig_kappa):
        kstar = -math.inf
    else:
        hi = min(1.0, eig_kappa + 1e-3)
        lo = eig_kappa - 1e-3
        while not passes(lo):
            lo -= max(1.0, abs(lo))
            if lo < -1e6:
                break
        while passes(hi) and hi < 1.0:
            hi = min(1.0, hi + 1e-2)
        if passes(hi):
            lo = hi
        while hi - lo > tol:
            mid = 0.5 * (lo + hi)
            if passes(mid):
                lo = mid
            else:
                hi = mid
        kstar = lo
    m_at = margins(kstar) if math.isfinite(kstar) else []
    m_above = margins(kstar + 1e-3) if math.isfinite(kstar) else []
    ksq = 1.0 - math.sqrt(max(0.0, 1.0 - kstar)) if math.isfinite(kstar) else -math.inf
    return GEReport(kstar, m_at, list(states), per, ksq, eig_kappa, m_above)


def ge_direct_ratio(ch, ds, rho, x, support=None, trace_tol=1e-4):
    """``<dPx, Lambda_rho dPx> / <dx, Lambda_{P^dagger rho} dx>`` for one observable."""
    S = _superop_of(ch)
    v = vec(as_matrix(x, square=True))
    r = hermitize(as_matrix(rho, square=True))
    num = np.real((S @ v).conj() @ metric_superop(r, ds, support=support) @ (S @ v))
    out = hermitize(apply_superop(S.conj().T, r))
    den = np.real(v.conj() @ metric_superop(out, ds, trace_tol=trace_tol) @ v)
    return float(num / den)


def operator_lemma_margins(A, B, C, lam):
    """Premise ``C^* A C <= lam B`` and conclusion ``C B^+ C^* <= lam A^+`` on ``supp A``.

    Returns ``(premise_margin, conclusion_margin)`` as smallest eigenvalues.
    """
    A = hermitize(as_matrix(A, square=True))
    B = hermitize(as_matrix(B, square=True))
    C = as_matrix(C, square=True)
    premise = psd_gap(C.conj().T @ A @ C, lam * B)
    w, U = np.linalg.eigh(A)
    top = max(w.max(initial=0.0), 1e-300)
    V = U[:, w > 1e-10 * top]
    lhs = V.conj().T @ C @ pinv_on_support(B) @ C.conj().T @ V
    rhs = lam * V.conj().T @ pinv_on_support(A) @ V
    return premise, psd_gap(hermitize(lhs), hermitize(rhs))


def random_lemma_triple(n, rng):
    """Random ``(A, B, C, lam)`` with ``C^* A C <= lam B`` by construction."""
    def psd(rank):
        U = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))[0][:, :rank]
        return hermitize((U * rng.uniform(0.5, 2.0, size=rank)) @ U.conj().T)
    A = psd(int(rng.integers(1, n + 1)))
    Q = np.linalg.qr(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)))[0]
    C = Q * rng.uniform(0.5, 1.5, size=n)
    lam = float(rng.uniform(0.2, 2.0))
    R = psd(int(rng.integers(1, n + 1))) if rng.random() < 0.7 else np.zeros((n, n), complex)
    B = hermitize(C.conj().T @ A @ C / lam + R)
    return A, B, C, lam


# ---------------------------------------------------------------------------
# intertwining


def _hat_matrix(hat, k, d):
    if isinstance(hat, (list, tuple)):
        if len(hat) != k:
            raise DimensionError("one hat block per derivation component")
        out = np.zeros((k * d * d, k * d * d), dtype=complex)
        for j, H in enumerate(hat):
            out[j * d * d:(j + 1) * d * d, j * d * d:(j + 1) * d * d] = H
        return out
    H = np.asarray(hat, dtype=complex)
    if H.shape != (k * d * d, k * d * d):
        raise DimensionError("hat map has the wrong size")
    return H


def verify_intertwining(ch, ds, hat, observable_basis=None, read_block=None, states=(),
                        trace_tol=1e-4):
    """Residual of ``partial P = hat partial`` and the smallest ``C`` of the order conditions.

    ``hat`` is a list of per-component superoperators or one block matrix.
    ``read_block`` optionally compresses residual matrices to a projector's
    range (used for truncated models).  For every state the smallest ``C``
    with ``hat^dagger l(rho) hat <= C l(P^dagger rho)`` (and the same for the
    right action) is reported.
    """
    S = _superop_of(ch)
    d = ds.dim
    k = len(ds.generators)
    H = _hat_matrix(hat, k, d)
    Ds = ds.superops()
    X = np.eye(d * d, dtype=complex) if observable_basis is None else np.asarray(observable_basis, complex)
    sel = None
    if read_block is not None:
        Pb = hermitize(as_matrix(read_block, square=True))
        w, U = np.linalg.eigh(Pb)
        sel = U[:, w > 0.5]
    worst = 0.0
    for col in X.T:
        dx = np.concatenate([D @ col for D in Ds])
        hd = H @ dx
        Sc = S @ col
        for j, D in enumerate(Ds):
            R = unvec(D @ Sc - hd[j * d * d:(j + 1) * d * d], d)
            if sel is not None:
                R = sel.conj().T @ R @ sel
            worst = max(worst, op_norm(R))
    cmins = []
    I = np.eye(d)
    for rho in states:
        r = hermitize(as_matrix(rho, square=True))
        out = hermitize(apply_superop(S.conj().T, r))
        if abs(np.trace(out).real - 1) > trace_tol:
            raise PreconditionError("channel output lost more trace than allowed")
        vals = []
        for left in (True, False):
            blk = (lambda s: np.kron(I, s)) if left else (lambda s: np.kron(s.T, I))
            Lr = sp.block_diag([blk(r)] * k).toarray()
            Lo = sp.block_diag([blk(out)] * k).toarray()
            vals.append(_max_generalized(H.conj().T @ Lr @ H, Lo))
        cmins.append(max(vals))
    return {"residual": worst, "c_min": max(cmins) if cmins else None, "c_per_state": cmins}


# ---------------------------------------------------------------------------
# spectral gap and Poincare constants


def spectral_gap(ch, omega, E=None, tol=1e-8):
    """``1 - sup ||P x||_{L2(omega)} / ||x||_{L2(omega)}`` over ``E(x) = 0``."""
    S = _superop_of(ch)
    omega = hermitize(as_matrix(omega, square=True))
    err = gns_symmetry_error(S, omega)
    if err > tol:
        raise PreconditionError(f"channel is not GNS-symmetric (error {err:.3e})")
    if E is None:
        E = fixed_point_expectation(Channel(S), omega=omega)
    Es = _superop_of(E)
    G = gns_gram(omega)
    Gh = psd_function(G, np.sqrt)
    Ghi = psd_function(G, lambda w: 1 / np.sqrt(w))
    I = np.eye(S.shape[0])
    T = Gh @ S @ (I - Es) @ Ghi
    return float(1.0 - np.linalg.svd(T, compute_uv=False)[0])


@dataclass
class PoincareReport:
    value: float
    lower: float
    upper: Optional[float]
    finite: bool
    method: str
    witness: Optional[np.ndarray] = None

    def to_dict(self):
        if not self.finite:
            return {"status": "infinite"}
        return {"value": self.value, "lower": self.lower, "upper": self.upper, "method": self.method}


def _l2_gram(omega, d):
    return np.kron(np.asarray(omega).T, np.eye(d))


def poincare_2inf_constant(spec, omega, E, rng=None, restarts=10, max_iter=30, relax_limit=24):
    """``C = sup {||x - E x||_{L2(omega)} : L(x) <= 1}``.

    The lower bound comes from alternating ascent; for max-type semi-norms an
    SDP relaxation of the lifted quadratic gives an upper bound (skipped when
    the complement has more than ``relax_limit`` coordinates).
    """
    form = GradientForm.from_spec(spec)
    d = form.dim
    omega = hermitize(as_matrix(omega, square=True))
    Es = _superop_of(E)
    if np.abs(Es @ Es - Es).max() > 1e-8:
        raise PreconditionError("E must be idempotent")
    if np.linalg.eigvalsh(omega)[0] <= 0:
        raise PreconditionError("omega must be faithful")
    I = np.eye(d * d)
    for k in form.kernel_basis:
        if np.linalg.norm(vec(k) - Es @ vec(k)) > 1e-8:
            return PoincareReport(math.inf, math.inf, math.inf, False, "kernel-outside-fixed-algebra", k)
    X = form.complement_basis
    m = len(X)
    if m == 0:
        return PoincareReport(0.0, 0.0, 0.0, True, "trivial")
    Xv = np.array([vec(B) for B in X]).T
    Gm = _l2_gram(omega, d)
    Rx = (I - Es) @ Xv
    Q = np.real(Rx.conj().T @ Gm @ Rx)
    Q = (Q + Q.T) / 2
    rng = np.random.default_rng(0) if rng is None else rng
    prog, nv = form.ball_program(X)

    def val(y):
        return math.sqrt(max(0.0, float(y @ Q @ y)))

    best, best_y = 0.0, None
    for _ in range(restarts):
        y = rng.normal(size=m)
        Ly = form(hermitize(unvec(Xv @ y, d)))
        y /= Ly
        v = val(y)
        for _ in range(max_iter):
            if v <= 0:
                break
            c = np.zeros(nv)
            c[:m] = Q @ y / v
            sol = prog.solve(c, "max", tol=1e-9)
            yn = np.asarray(sol.y[:m])
            Ln = form(hermitize(unvec(Xv @ yn, d)))
            if Ln <= 0:
                break
            yn = yn / max(Ln, 1.0)
            vn = val(yn)
            if vn <= v + 1e-11:
                break
            y, v = yn, vn
        if v > best:
            best, best_y = v, y
    upper = None
    if m == 1:
        upper = best
    elif form.combine == "max" and m <= relax_limit:
        upper = _poincare_relaxation(form, X, Q)
    value = upper if upper is not None else best
    w = hermitize(unvec(Xv @ best_y, d)) if best_y is not None else None
    return PoincareReport(float(value), float(best), upper, True,
                          "relaxation" if upper is not None and m > 1 else "ascent", w)


def _poincare_relaxation(form, X, Q):
    """``max Tr(Q Y)`` over ``Y >= 0`` with ``sum Y_ij sym(O_i^* O_j) <= 1`` for every component."""
    m = len(X)
    pairs = [(i, j) for i in range(m) for j in range(i, m)]
    nv = len(pairs)
    prog = LmiProgram(nv)
    T = np.zeros((nv, m, m))
    for k, (i, j) in enumerate(pairs):
        T[k, i, j] = T[k, j, i] = 1.0
    prog.add_operator_block(np.zeros((m, m)), sp.csr_matrix(T.reshape(nv, -1).astype(complex)),
                            complex_block=False)
    Xv = np.array([vec(B) for B in X]).T
    for g in form.groups:
        for op in g:
            p, q = op.shape
            O = (op.matrix @ Xv).T.reshape(m, q, p).transpose(0, 2, 1)
            Tq = np.zeros((nv, q, q), dtype=complex)
            for k, (i, j) in enumerate(pairs):
                G = O[i].conj().T @ O[j]
                Tq[k] = -(G + G.conj().T) / (1.0 if i != j else 2.0)
            prog.add_operator_block(np.eye(q, dtype=complex), sp.csr_matrix(Tq.reshape(nv, -1)))
    c = np.array([Q[i, j] * (2.0 if i != j else 1.0) for i, j in pairs])
    sol = prog.solve(c, "max", tol=1e-9)
    return math.sqrt(max(0.0, max(sol.primal_objective, sol.dual_objective)))


# ---------------------------------------------------------------------------
# transportation inequalities


def tc_inequality_check(Es, spec, kappa, C, rho, E_N=None, factor=None, tol=1e-7):
    """``T(rho, rho o E_N) <= C / (1 - (1 - kappa)^n) sqrt(2 n D(rho || rho o E_N))``.

    ``Es`` are the conditional expectations averaged into ``P``.  ``factor``
    is a measured or structural contraction factor of ``P``; premise
    failures are reported rather than raised.
    """
    n = len(Es)
    if n == 0:
        raise PreconditionError("need at least one conditional expectation")
    d = Es[0].dim
    P = sum(_superop_of(E) for E in Es) / n
    if E_N is None:
        E_N = fixed_point_expectation(Channel(P), omega=np.eye(d) / d)
    r = hermitize(as_matrix(rho, square=True))
    premises = {}
    if factor is not None:
        premises["factor"] = float(factor)
        premises["factor_ok"] = bool(factor <= 1 - kappa + 1e-9)
    per_ok = True
    worst = -math.inf
    for i, E in enumerate(Es):
        ri = hermitize(E.apply_adjoint(r))
        t = w1_dual(spec, r, ri)
        if t.is_infinite:
            return InequalityReport(math.inf, math.nan, "vacuous", premises, {"reason": "infinite transport"})
        excess = t.value - C * trace_norm(r - ri)
        worst = max(worst, excess)
        per_ok &= excess <= tol
    premises["per_expectation_excess"] = worst
    premises["per_expectation_ok"] = bool(per_ok)
    target = hermitize(E_N.apply_adjoint(r))
    lhs_res = w1_dual(spec, r, target)
    if lhs_res.is_infinite:
        return InequalityReport(math.inf, math.nan, "vacuous", premises, {"reason": "infinite transport"})
    D = relative_entropy(r, target)
    denom = 1 - (1 - kappa) ** n
    rhs = C / denom * math.sqrt(2 * n * D) if denom > 0 else math.inf
    ok = premises.get("factor_ok", True) and per_ok
    status = "premise-failure" if not ok else ("ok" if lhs_res.value <= rhs + tol else "violated")
    return InequalityReport(lhs_res.value, rhs, status, premises,
                            {"relative_entropy": D, "n": n, "gap": lhs_res.gap})


def dirichlet_form(L, sigma, x):
    """``-<x, L x>_sigma`` with ``<a, b>_sigma = Tr(a^* sigma^(1/2) b sigma^(1/2))``."""
    d = sigma.shape[0]
    s = psd_function(sigma, lambda w: np.sqrt(np.clip(w, 0, None)))
    Lx = apply_superop(L, x)
    return float(-np.real(np.trace(x.conj().T @ s @ Lx @ s)))


def dirichlet_sum(jumps, sigma, x):
    """``sum_j ||[v_j, x]||_{L2(sigma)}^2``."""
    s = psd_function(sigma, lambda w: np.sqrt(np.clip(w, 0, None)))
    total = 0.0
    for v in jumps:
        c = v @ x - x @ v
        total += float(np.real(np.trace(c.conj().T @ s @ c @ s)))
    return total


def _z_of(rho, sigma):
    sm = psd_function(sigma, lambda w: np.clip(w, 1e-300, None) ** -0.25)
    return sm @ psd_function(rho, lambda w: np.sqrt(np.clip(w, 0, None))) @ sm


def semigroup_decay_ratios(gen, form, ts, xs):
    """``max_x L(P_t x) / L(x)`` for each ``t``."""
    L = gen.superop if isinstance(gen, GeneratorSpec) else np.asarray(gen)
    out = []
    for t in ts:
        Pt = mat_exp(t * L)
        r = 0.0
        for x in xs:
            Lx = form(x)
            if Lx > 1e-12:
                r = max(r, form(apply_superop(Pt, x)) / Lx)
        out.append(r)
    return out


def fit_decay_constant(gen, form, kappa, ts, xs):
    """Smallest ``C`` with ``L(P_t x) <= C e^{-kappa t} L(x)`` on the samples."""
    ratios = semigroup_decay_ratios(gen, form, ts, xs)
    return max([1.0] + [r * math.exp(kappa * t) for r, t in zip(ratios, ts)])


def ti_inequality_check(ds, gen, C, kappa, rho, t_grid=(0.1, 0.5, 1.0, 2.0, 5.0), xs=None,
                        rng=None, tol=1e-9):
    """``W1(rho, rho o E_N) <= C/kappa max_i (e^{-w_i/4} + e^{w_i/4}) sqrt(E(z))``.

    ``W1`` is dual to ``(sum_j ||[v_j, x]||^2)^(1/2)`` and ``z =
    sigma^(-1/4) sqrt(rho) sigma^(-1/4)``.  The decay premise is spot-checked
    on ``t_grid`` and the Dirichlet identity is reported.
    """
    L = gen.superop
    sigma = hermitize(as_matrix(gen.sigma if ds.sigma is None else ds.sigma, square=True))
    d = sigma.shape[0]
    err = gns_symmetry_error(L, sigma)
    if err > 1e-8:
        raise PreconditionError(f"generator is not GNS-symmetric (error {err:.3e})")
    vs = list(ds.generators)
    spec = SemiNormSpec.commutator_l2(vs)
    form = GradientForm.from_spec(spec)
    rng = np.random.default_rng(0) if rng is None else rng
    xs = [random_hermitian(d, rng) for _ in range(5)] if xs is None else xs
    ratios = semigroup_decay_ratios(L, form, t_grid, xs)
    excess = max(r - C * math.exp(-kappa * t) for r, t in zip(ratios, t_grid))
    premises = {"decay_excess": excess, "decay_ok": bool(excess <= tol), "symmetry_error": err}
    r = hermitize(as_matrix(rho, square=True))
    En = generator_fixed_projector(L, sigma)
    target = hermitize(apply_superop(En.conj().T, r))
    w = w1_dual(spec, r, target)
    z = _z_of(r, sigma)
    E1 = dirichlet_form(L, sigma, z)
    E2 = dirichlet_sum(vs, sigma, z)
    const = max(math.exp(-om / 4) + math.exp(om / 4) for om in ds.bohr_frequencies)
    rhs = C / kappa * const * math.sqrt(max(E1, 0.0))
    lhs = w.value
    status = "premise-failure" if not premises["decay_ok"] else ("ok" if lhs <= rhs + 1e-9 else "violated")
    return InequalityReport(lhs, rhs, status, premises,
                            {"dirichlet": E1, "dirichlet_sum": E2,
                             "dirichlet_identity_error": abs(E1 - E2), "constant": const})


# ---------------------------------------------------------------------------
# local maps of Gibbs samplers


def reduced_local_map(S, dims, in_sites, out_sites, rng=None, tol=1e-9):
    """Restrict a superoperator to ``B(H_in) -> B(H_out)``.

    ``S`` must act as ``X_in (x) Y_rest -> Phi(X_in) (x) 1_{in \\ out} (x) Y_rest``;
    this is checked on matrix units and random rest factors.  Returns the
    Heisenberg superoperator of ``Phi`` and the locality residual.
    """
    dims = list(dims)
    in_sites = sorted(in_sites)
    out_sites = sorted(out_sites)
    if not set(out_sites) <= set(in_sites):
        raise PreconditionError("output sites must be inside the input sites")
    rest = [i for i in range(len(dims)) if i not in in_sites]
    d_in = int(np.prod([dims[i] for i in in_sites]))
    d_out = int(np.prod([dims[i] for i in out_sites])) if out_sites else 1
    D = int(np.prod(dims))
    drop = [i for i in in_sites if i not in out_sites]
    d_drop = int(np.prod([dims[i] for i in drop])) if drop else 1
    d_rest = int(np.prod([dims[i] for i in rest])) if rest else 1

    def phi(X):
        Y = apply_superop(S, embed(X, in_sites, dims))
        if not out_sites:
            return np.trace(Y).reshape(1, 1) / D
        return partial_trace(Y, dims, out_sites) / (d_drop * d_rest)

    Sr = _rect_superop(phi, d_in, (d_out, d_out))
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0.0
    tests = [(np.eye(d_in)[:, [i]] @ np.eye(d_in)[[j], :], np.eye(d_rest))
             for i in range(d_in) for j in range(d_in)]
    if rest:
        tests += [(random_hermitian(d_in, rng), random_hermitian(d_rest, rng)) for _ in range(3)]
    for X, R in tests:
        full = embed(np.kron(X, R), in_sites + rest, dims) if rest else embed(X, in_sites, dims)
        Y = apply_superop(S, full)
        Phi = unvec(Sr @ vec(X), d_out)
        expect_sites = out_sites + rest
        if expect_sites:
            op = np.kron(Phi, R) if rest else Phi
            expect = embed(op, expect_sites, dims) if out_sites else embed(R * Phi[0, 0], rest, dims)
        else:
            expect = Phi[0, 0] * np.eye(D)
        worst = max(worst, float(np.abs(Y - expect).max()))
    if worst > max(tol, 1e-9):
        raise UnsupportedStructure(f"map is not local on the given sites (residual {worst:.3e})")
    return Sr, worst


def watrous_bound(choi, dims):
    """``2 ||Tr_out J_+||``: an upper bound on the diamond norm of a trace-annihilating map."""
    J = hermitize(as_matrix(choi, square=True))
    d_in, d_out = dims
    w, U = np.linalg.eigh(J)
    Jp = (U * np.clip(w, 0, None)) @ U.conj().T
    T = np.einsum("iaja->ij", Jp.reshape(d_in, d_out, d_in, d_out))
    return float(2 * np.linalg.eigvalsh(hermitize(T))[-1])


def cb_norm_of_local(Sr, d_in, d_out, mode="auto", exact_limit=32):
    """cb norm on ``L_inf`` of ``Sr`` (``d_out^2 x d_in^2``) as the diamond norm of its pre-adjoint.

    ``mode="auto"`` solves the SDP when the Choi matrix has size at most
    ``exact_limit`` and otherwise returns the dual-feasible bound
    :func:`watrous_bound` (an upper bound, valid for trace-annihilating
    pre-adjoints).  Returns ``(value, method)``.
    """
    if np.abs(Sr).max() <= 1e-14:
        return 0.0, "zero-map"
    Sp = Sr.conj().T                                # B(H_out) -> B(H_in)
    J = choi_from_superop(Sp, d_in=d_out)
    N = J.shape[0]
    trace_annihilating = np.abs(np.einsum("iaja->ij", J.reshape(d_out, d_in, d_out, d_in))).max() <= 1e-12
    if mode == "exact" or (mode == "auto" and N <= exact_limit):
        return diamond_norm(J, dims=(d_out, d_in)), "sdp"
    if not trace_annihilating:
        raise UnsupportedStructure("the dual bound needs a trace-annihilating pre-adjoint")
    return watrous_bound(J, (d_out, d_in)), "dual-bound"


def gibbs_contraction_certificate(ham, beta, t_grid=(0.1, 0.5, 1.0, 2.0, 5.0), rng=None,
                                  samples=20, gen=None, cb_mode="auto"):
    """Contraction of ``||x||_L = max_v ||x - tau_v x||`` under a heat-bath semigroup.

    ``kappa(beta) = 2 max_v n_v max_w ||Psi_w - tau_w||_cb |N_w|`` with
    ``n_v = #{w != v : v in N_w}``; the count including ``w = v`` is also
    reported.  The decay ``||e^{tL} x||_L <= e^{-(1-kappa) t} ||x||_L`` is
    measured on random ``x`` whether or not ``kappa < 1``.
    """
    from .channels import heat_bath_generator, site_replacement_expectation
    if not ham.check_commuting():
        raise PreconditionError("certificate needs a commuting Hamiltonian")
    if beta < 0:
        raise PreconditionError("beta must be non-negative")
    gen = heat_bath_generator(ham, beta) if gen is None else gen
    dims = ham.dims
    n = ham.n
    nbhd = {v: ham.neighborhood(v) for v in range(n)}
    cb = {}
    methods = {}
    locality = 0.0
    for w in range(n):
        tau = site_replacement_expectation(dims, w).superop
        S = gen.info["psi"][w] - tau
        Nw = nbhd[w]
        out = [u for u in Nw if u != w]
        Sr, res = reduced_local_map(S, dims, Nw, out, rng=rng)
        locality = max(locality, res)
        d_in = int(np.prod([dims[u] for u in Nw]))
        d_out = int(np.prod([dims[u] for u in out])) if out else 1
        cb[w], methods[w] = cb_norm_of_local(Sr, d_in, d_out, cb_mode)
    n_strict = {v: sum(1 for w in range(n) if w != v and v in nbhd[w]) for v in range(n)}
    n_incl = {v: sum(1 for w in range(n) if v in nbhd[w]) for v in range(n)}
    inner = max((cb[w] * len(nbhd[w]) for w in range(n) if len(nbhd[w]) > 1), default=0.0)
    inner_all = max(cb[w] * len(nbhd[w]) for w in range(n))
    kappa = 2 * max(n_strict.values()) * inner
    kappa_incl = 2 * max(n_incl.values()) * inner_all
    rng = np.random.default_rng(0) if rng is None else rng
    spec = SemiNormSpec.site_max(dims)
    D = int(np.prod(dims))
    xs = [random_hermitian(D, rng) for _ in range(samples)]
    worst_excess = -math.inf
    rate = math.inf
    for t in t_grid:
        Pt = mat_exp(t * gen.superop)
        for x in xs:
            Lx = seminorm_eval(spec, x)
            Lt = seminorm_eval(spec, apply_superop(Pt, x))
            worst_excess = max(worst_excess, Lt - math.exp(-(1 - kappa) * t) * Lx)
            if Lt > 0:
                rate = min(rate, -math.log(Lt / Lx) / t)
    status = "certified" if kappa < 1 else "not-applicable"
    return {"kappa": kappa, "kappa_including_self": kappa_incl, "cb_norms": cb,
            "cb_methods": methods, "locality_residual": locality, "status": status,
            "decay_excess": worst_excess, "decay_ok": bool(worst_excess <= 1e-7),
            "empirical_rate": rate, "beta": float(beta), "n_v": n_strict}


def _eigen_groups(w, rtol=1e-9):
    groups = []
    for i in np.argsort(w):
        if groups and abs(w[i] - w[groups[-1][0]]) <= rtol * max(1.0, abs(w[i])):
            groups[-1].append(int(i))
        else:
            groups.append([int(i)])
    return groups


def _hermitian_basis_of_span(mats):
    """Orthonormal Hermitian basis of an adjoint-closed span (the input if it is not closed).

    A unitary change of an equal-weight set of Lindblad operators leaves the
    generator unchanged; a Hermitian choice keeps their operator norms small.
    """
    r = len(mats)
    V = np.array([M.reshape(-1) for M in mats]).T
    out = []
    for M in mats:
        for H in ((M + M.conj().T) / 2, (M - M.conj().T) / 2j):
            h = H.reshape(-1)
            for B in out:
                h = h - np.vdot(B.reshape(-1), h) * B.reshape(-1)
            nrm = np.linalg.norm(h)
            if nrm > 1e-8:
                out.append((h / nrm).reshape(M.shape))
    if len(out) != r:
        return mats
    Q = np.array([B.reshape(-1) for B in out]).T
    if np.linalg.norm(Q - V @ (V.conj().T @ Q)) > 1e-8:
        return mats
    return out


def gns_lindblad_operators(Lt, sigma, tol=1e-10):
    """Lindblad operators with Bohr frequencies for a GNS-symmetric generator.

    Returns ``[(v_j, omega_j)]`` with ``sigma v_j sigma^{-1} = e^{-omega_j} v_j``
    and ``Lt(x) = sum_j e^{-omega_j} (2 v_j^* x v_j - {v_j^* v_j, x})``.  The
    operators come from the Choi matrix compressed away from the maximally
    entangled vector, split into modular eigenspaces; the reconstruction is
    checked.
    """
    Lt = np.asarray(Lt, dtype=complex)
    sigma = hermitize(as_matrix(sigma, square=True))
    d = sigma.shape[0]
    s, W = np.linalg.eigh(sigma)
    if s[0] <= 0:
        raise PreconditionError("sigma must be faithful")
    Lp = lr_superop(W.conj().T, W) @ Lt @ lr_superop(W, W.conj().T)
    J = choi_from_superop(Lp)
    om = np.eye(d).reshape(-1) / math.sqrt(d)
    Q = np.eye(d * d) - np.outer(om, om)
    J = hermitize(Q @ J @ Q)
    logs = np.log(s)
    freq = (logs[None, :] - logs[:, None]).reshape(-1)     # index i*d + a -> log s_a - log s_i
    classes = []
    for f in freq:
        if not any(abs(f - c) <= 1e-9 for c in classes):
            classes.append(f)
    ops = []
    leak = 0.0
    for c in classes:
        idx = np.nonzero(np.abs(freq - c) <= 1e-9)[0]
        other = np.nonzero(np.abs(freq - c) > 1e-9)[0]
        if other.size:
            leak = max(leak, float(np.abs(J[np.ix_(idx, other)]).max()))
        w, U = np.linalg.eigh(J[np.ix_(idx, idx)])
        if w.min(initial=0.0) < -1e-8 * max(1.0, abs(w).max(initial=0.0)):
            raise PreconditionError("generator is not conditionally completely positive")
        keep = np.nonzero(w > tol * max(1.0, abs(w).max()))[0]
        mats = []
        for k in keep:
            u = np.zeros(d * d, dtype=complex)
            u[idx] = U[:, k]
            mats.append(np.conj(u.reshape(d, d)))
        groups = _eigen_groups(w[keep])
        for g in groups:
            basis = [mats[i] for i in g]
            if abs(c) <= 1e-9:
                basis = _hermitian_basis_of_span(basis)
            for M in basis:
                K = math.sqrt(w[keep][g[0]]) * M
                Korig = W @ K @ W.conj().T
                ops.append((Korig * math.exp(c / 2) / math.sqrt(2), float(c)))
    if leak > 1e-8:
        raise UnsupportedStructure("generator is not covariant under the modular group")
    I = np.eye(d)
    R = np.zeros_like(Lt)
    for v, c in ops:
        vd = v.conj().T
        R += math.exp(-c) * (2 * lr_superop(vd, v) - lr_superop(vd @ v, I) - lr_superop(I, vd @ v))
    err = float(np.abs(R - Lt).max())
    if err > 1e-8:
        raise UnsupportedStructure(f"generator has a Hamiltonian part (reconstruction error {err:.3e})")
    return ops


def _kms_gap(L, sigma):
    G = kms_gram(sigma)
    Gh = psd_function(G, np.sqrt)
    Ghi = psd_function(G, lambda w: 1 / np.sqrt(w))
    w = np.linalg.eigvalsh(hermitize(Gh @ L @ Ghi))
    nz = np.abs(w)[np.abs(w) > 1e-9]
    return float(nz.min()) if nz.size else math.inf


def local_ti_check(gen, C, kappa, rho, lambda_gap=None, t_grid=(0.1, 0.5, 1.0, 2.0), xs=None,
                   rng=None, diamond="auto"):
    """Local transportation information inequality for a heat-bath generator.

    The edges are the local generators ``L_v = Psi_v - id`` of ``gen`` with
    supports ``N_v``.  Evaluates ``C max_e C_e sqrt|J_e| |e| ||L_e*||_dia /
    (kappa sqrt(lambda)) sqrt(|E| E_{L_V}(z))`` against the Ornstein ``W1``
    distance to ``E_V*(rho)``.
    """
    sigma = hermitize(as_matrix(gen.sigma, square=True))
    D = sigma.shape[0]
    ham = gen.info.get("hamiltonian")
    dims = ham.dims
    nbhd = gen.info["neighborhoods"]
    edges = sorted(gen.local)
    per_edge = {}
    for e in edges:
        Le = gen.local[e]
        if kms_symmetry_error(Le, sigma) > 1e-8:
            raise PreconditionError("local generators must be KMS-symmetric")
        Ee = generator_fixed_projector(Le, sigma)
        ops = gns_lindblad_operators(Ee - np.eye(D * D), sigma)
        sh = psd_function(sigma, np.sqrt)
        shi = psd_function(sigma, lambda w: 1 / np.sqrt(w))
        Ce = 2 * max(math.exp(-c) * op_norm(sh @ v.conj().T @ shi) * (math.exp(-c / 4) + math.exp(c / 4))
                     for v, c in ops)
        sup = nbhd[e]
        Sr, _ = reduced_local_map(Le, dims, sup, sup, rng=rng)
        dN = int(np.prod([dims[u] for u in sup]))
        dn, how = cb_norm_of_local(Sr, dN, dN, diamond)
        per_edge[e] = {"C_e": Ce, "J_e": len(ops), "size": len(sup), "diamond": dn,
                       "diamond_method": how, "gap": _kms_gap(Le, sigma)}
    lam = min(v["gap"] for v in per_edge.values()) if lambda_gap is None else float(lambda_gap)
    measured_gap = min(v["gap"] for v in per_edge.values())
    premises = {"gap_ok": bool(measured_gap >= lam - 1e-9), "measured_gap": measured_gap}
    spec = SemiNormSpec.ornstein(dims)
    rng = np.random.default_rng(0) if rng is None else rng
    xs = [random_hermitian(D, rng) for _ in range(3)] if xs is None else xs
    worst = -math.inf
    for t in t_grid:
        Pt = mat_exp(t * gen.superop)
        for x in xs:
            worst = max(worst, seminorm_eval(spec, apply_superop(Pt, x))
                        - C * math.exp(-kappa * t) * seminorm_eval(spec, x))
    premises["decay_excess"] = worst
    premises["decay_ok"] = bool(worst <= 1e-7)
    const = max(v["C_e"] * math.sqrt(v["J_e"]) * v["size"] * v["diamond"] for v in per_edge.values())
    r = hermitize(as_matrix(rho, square=True))
    EV = generator_fixed_projector(gen.superop, sigma)
    target = hermitize(apply_superop(EV.conj().T, r))
    z = _z_of(r, sigma)
    energy = dirichlet_form(gen.superop, sigma, z)
    rhs = C * const / (kappa * math.sqrt(lam)) * math.sqrt(len(edges) * max(energy, 0.0))
    lhs = w1_dual(spec, r, target).value
    ok = premises["gap_ok"] and premises["decay_ok"]
    status = "premise-failure" if not ok else ("ok" if lhs <= rhs + 1e-9 else "violated")
    return InequalityReport(lhs, rhs, status, premises,
                            {"constant": const, "dirichlet": energy, "lambda": lam,
                             "per_edge": per_edge})


# ---------------------------------------------------------------------------
# jump, diameter and mixing


def jump_diameter_bound(spec, ch, rho1, rho2, kappa, factor=None, tol=1e-7):
    """``T(rho1, rho2) <= (J(rho1) + J(rho2)) / kappa``."""
    if kappa <= 0:
        raise PreconditionError("the jump bound needs kappa > 0")
    S = _superop_of(ch)
    premises = {}
    if factor is not None:
        premises["factor_ok"] = bool(factor <= 1 - kappa + 1e-9)
    vals = []
    for a, b in ((rho1, rho2), (rho1, apply_superop(S.conj().T, rho1)),
                 (rho2, apply_superop(S.conj().T, rho2))):
        t = w1_dual(spec, a, hermitize(np.asarray(b)))
        if t.is_infinite:
            return InequalityReport(math.inf, math.nan, "vacuous", premises, {"reason": "infinite transport"})
        vals.append(t.value)
    lhs = vals[0]
    rhs = (vals[1] + vals[2]) / kappa
    status = "ok" if lhs <= rhs + tol else "violated"
    if not premises.get("factor_ok", True):
        status = "premise-failure"
    return InequalityReport(lhs, rhs, status, premises, {"jump1": vals[1], "jump2": vals[2]})


def pauli_mixing_check(pauli_spec, rho, steps=20, tol=1e-6):
    """``||P^k rho - E_I rho||_1`` against ``(1 - 2m)^k / (2m) J(rho)`` for ``k <= steps``.

    The powers come from the superoperator, ``E_I`` from the group average
    and ``J`` from the transport SDP.
    """
    from .channels import pauli_channel
    ch = pauli_channel(pauli_spec)
    E = pauli_conditional_expectation(pauli_spec)
    spec = pauli_seminorm(pauli_spec)
    r = hermitize(as_matrix(rho, square=True))
    m = pauli_spec.min_weight
    J = w1_dual(spec, r, hermitize(ch.apply_adjoint(r)))
    if J.is_infinite:
        raise SolverError("jump of a Pauli channel cannot be infinite", {})
    target = hermitize(E.apply_adjoint(r))
    Sd = ch.adjoint_superop
    cur = vec(r)
    rows = []
    for k in range(1, steps + 1):
        cur = Sd @ cur
        measured = trace_norm(unvec(cur) - target)
        bound = (1 - 2 * m) ** k / (2 * m) * J.value
        rows.append({"k": k, "measured": measured, "bound": bound, "ok": measured <= bound + tol})
    return {"jump": J.value, "rows": rows, "ok": all(r["ok"] for r in rows)}


# ---------------------------------------------------------------------------
# tensorization


def _on_factor(S_i, dims, i):
    dims = list(dims)
    D = int(np.prod(dims))
    di = dims[i]
    rest = [k for k in range(len(dims)) if k != i]

    def f(x):
        T = np.asarray(x).reshape(dims + dims)
        n = len(dims)
        order = [i] + rest
        T = T.transpose(order + [o + n for o in order])
        dr = D // di
        T = T.reshape(di, dr, di, dr)
        out = np.zeros_like(T)
        for a in range(dr):
            for b in range(dr):
                out[:, a, :, b] = apply_superop(S_i, T[:, a, :, b])
        out = out.reshape([dims[o] for o in order] * 2)
        inv = [order.index(k) for k in range(n)]
        out = out.transpose(inv + [o + n for o in inv])
        return out.reshape(D, D)

    return superop_from_function(f, D)


def tensorization_check(factor_gens, chs, alphas, kappas=None, budget=5, rng=None, tol=1e-7):
    """Factor of ``sum_i alpha_i P_i (x) id`` for ``sum_i L_i`` against ``1 - min alpha_i kappa_i``.

    ``factor_gens[i]`` are the commutator generators of ``L_i`` on factor
    ``i``.  Without ``kappas`` the complete factors are measured with an
    ancilla of the factor's dimension.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    dims = [_superop_of(c).shape[0] for c in chs]
    dims = [int(round(math.sqrt(x))) for x in dims]
    if kappas is None:
        kappas = []
        for gens, c in zip(factor_gens, chs):
            d = dims[len(kappas)]
            form = GradientForm.commutators(gens).with_ancilla(d)
            S = _on_factor(_superop_of(c), [d, d], 1)
            rep = lipschitz_factor(S, form, budget, rng=rng)
            kappas.append(1 - rep.upper_bound_factor)
    total = sum(a * _on_factor(_superop_of(c), dims, i) for i, (a, c) in enumerate(zip(alphas, chs)))
    total = total + (1 - sum(alphas)) * np.eye(total.shape[0])
    form = GradientForm.tensor_sum(factor_gens, dims)
    rep = lipschitz_factor(total, form, budget, rng=rng)
    bound = 1 - min(a * k for a, k in zip(alphas, kappas))
    return {"measured": rep.lower_bound_factor, "bound": bound, "kappas": list(kappas),
            "ok": bool(rep.lower_bound_factor <= bound + tol)}


# ---------------------------------------------------------------------------
# finite-group transference


def transfer_finite_group(table, k, u, S, w, rng=None, samples=20, ps=(1, math.inf)):
    """Transferred channel ``P(x) = |G|^{-1} sum_g k(g) u(g) x u(g)^*`` and its estimates.

    ``table[g][h]`` is the index of ``gh``; ``k`` sums to ``|G|``; ``u`` is a
    projective representation.  The classical factor ``sup ||K f||_Lip /
    ||f||_Lip`` is solved exactly as linear programs; the quantum ratio of
    ``max_h ||partial_h x||_p`` is measured on random and basis ``x``.
    """
    from scipy.optimize import linprog
    table = np.asarray(table, dtype=int)
    G = table.shape[0]
    k = np.asarray(k, dtype=float)
    if np.any(k < 0) or abs(k.sum() - G) > 1e-9:
        raise PreconditionError("kernel must be non-negative and sum to |G|")
    u = [np.asarray(x, dtype=complex) for x in u]
    d = u[0].shape[0]
    e = next(g for g in range(G) if all(table[g, h] == h for h in range(G)))
    worst = 0.0
    for g in range(G):
        for h in range(G):
            prod = u[g] @ u[h]
            target = u[table[g, h]]
            phase = np.trace(target.conj().T @ prod) / d
            worst = max(worst, float(np.abs(prod - phase * target).max()), abs(abs(phase) - 1))
    if worst > 1e-8:
        raise PreconditionError(f"u is not a projective representation (residual {worst:.3e})")
    Ssup = sum(k[g] * lr_superop(u[g], u[g].conj().T) for g in range(G)) / G
    ch = Channel(Ssup, label="transferred")

    inv = [next(h for h in range(G) if table[g, h] == e) for g in range(G)]
    K = np.zeros((G, G))
    for h in range(G):
        for g in range(G):
            K[h, g] = k[table[inv[h], g]] / G
    edges = [(g, s) for g in range(G) for s in S]
    rows = []
    for g, s in edges:
        r = np.zeros(G)
        r[table[g, s]] += math.sqrt(w[s])
        r[g] -= math.sqrt(w[s])
        rows.append(r)
    A = np.array(rows)
    A_ub = np.vstack([A, -A])
    b_ub = np.ones(2 * len(rows))
    classical = 0.0
    for row in A:
        obj = row @ K
        if np.abs(obj).max() <= 1e-15:
            continue
        res = linprog(-obj, A_ub=A_ub, b_ub=b_ub, A_eq=np.eye(G)[[e]], b_eq=[0.0],
                      bounds=[(None, None)] * G, method="highs")
        if res.status != 0:
            raise SolverError("classical Lipschitz program failed", {"message": res.message})
        classical = max(classical, -res.fun)
    rng = np.random.default_rng(0) if rng is None else rng
    xs = [random_hermitian(d, rng) for _ in range(samples)] + list(hermitian_basis(d))

    def grad(x, p):
        vals = []
        for s in S:
            D_ = math.sqrt(w[s]) * (u[s] @ x @ u[s].conj().T - x)
            sv = np.linalg.svd(D_, compute_uv=False)
            vals.append(sv.max() if math.isinf(p) else float(np.sum(sv ** p) ** (1 / p)))
        return max(vals)

    quantum = {}
    for p in ps:
        r = 0.0
        for x in xs:
            gx = grad(x, p)
            if gx > 1e-12:
                r = max(r, grad(ch.apply(x), p) / gx)
        quantum["inf" if math.isinf(p) else str(p)] = float(r)
    return ch, {"classical_factor": classical, "quantum_factor": quantum,
                "cocycle_residual": worst,
                "ok": all(v <= classical + 1e-9 for v in quantum.values())}


def pauli_group_transfer(pauli_spec):
    """The Pauli channel as a transfer from ``Z_2^{2n}`` with the sign-free Pauli representation."""
    n = pauli_spec.n
    strings = all_pauli_strings(n)
    from .channels import pauli_bits
    bits = [np.concatenate(pauli_bits(s)).astype(int) for s in strings]
    index = {tuple(b): i for i, b in enumerate(bits)}
    G = len(strings)
    table = np.array([[index[tuple((bits[g] + bits[h]) % 2)] for h in range(G)] for g in range(G)])
    wts = pauli_spec.weights
    k = np.array([G * wts.get(s, 0.0) for s in strings])
    u = [pauli_matrix(s) for s in strings]
    S = [i for i, s in enumerate(strings) if s in wts and s != "I" * n] or [1]
    w = {s: 1.0 for s in range(G)}
    return table, k, u, S, w
