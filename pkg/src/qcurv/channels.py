"""Quantum channels in the Heisenberg picture and the concrete families used here.

A :class:`Channel` stores the superoperator of the unital map ``P`` acting on
observables.  The trace-preserving pre-adjoint acting on states is the
conjugate transpose of that matrix (see :mod:`qcurv.matcore`).
"""

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionError, PreconditionError, UnsupportedStructure
from .matcore import (
    apply_superop, as_matrix, choi_from_superop, embed, hermitize, is_hermitian,
    kron, lr_superop, mat_exp, op_norm, partial_trace, psd_function,
    superop_from_function, unvec, vec,
)

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
_LETTER_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}
_BITS_LETTER = {v: k for k, v in _LETTER_BITS.items()}


# ---------------------------------------------------------------------------
# channels


@dataclass(frozen=True, eq=False)
class Channel:
    """Unital CP map on ``d x d`` matrices given by its superoperator."""

    superop: np.ndarray
    kraus: Optional[tuple] = None
    invariant_state: Optional[np.ndarray] = None
    fixed_point_projector: Optional[np.ndarray] = None
    label: str = ""

    @property
    def dim(self):
        return int(round(np.sqrt(self.superop.shape[0])))

    @property
    def adjoint_superop(self):
        return self.superop.conj().T

    def apply(self, x):
        return apply_superop(self.superop, x)

    def apply_adjoint(self, rho):
        return apply_superop(self.adjoint_superop, rho)

    def choi(self):
        return choi_from_superop(self.superop)

    def unitality_error(self):
        d = self.dim
        return float(np.abs(self.apply(np.eye(d)) - np.eye(d)).max())

    def is_cptp(self, tol=1e-9):
        J = self.choi()
        if not is_hermitian(J, tol):
            return False
        cp = np.linalg.eigvalsh(hermitize(J))[0] >= -tol * max(1.0, op_norm(J))
        return bool(cp and self.unitality_error() <= max(tol, 1e-10))

    def power(self, k):
        return Channel(np.linalg.matrix_power(self.superop, int(k)), label=f"{self.label}^{k}")

    def compose(self, other):
        """``self o other`` (apply ``other`` first in the Heisenberg picture)."""
        return Channel(self.superop @ other.superop)

    def mix(self, weight, other):
        return Channel(weight * self.superop + (1 - weight) * other.superop)


def identity_channel(d):
    return Channel(np.eye(d * d, dtype=complex), kraus=(np.eye(d, dtype=complex),), label="id")


def channel_from_kraus(kraus, tol=1e-9):
    """Channel ``P(x) = sum_j K_j^dagger x K_j`` (pre-adjoint ``rho -> sum K rho K^dagger``)."""
    Ks = [as_matrix(K, square=True) for K in kraus]
    if not Ks:
        raise PreconditionError("empty Kraus list")
    d = Ks[0].shape[0]
    if any(K.shape != (d, d) for K in Ks):
        raise DimensionError("Kraus operators of different sizes")
    total = sum(K.conj().T @ K for K in Ks)
    if np.abs(total - np.eye(d)).max() > tol:
        raise PreconditionError("Kraus operators are not complete (sum K^dagger K != I)")
    S = sum(lr_superop(K.conj().T, K) for K in Ks)
    return Channel(S, kraus=tuple(Ks))


def channel_from_superop(S, label=""):
    S = np.asarray(S, dtype=complex)
    d = int(round(np.sqrt(S.shape[0])))
    if S.shape != (d * d, d * d):
        raise DimensionError(f"superoperator of shape {S.shape} is not square in d^2")
    return Channel(S, label=label)


# ---------------------------------------------------------------------------
# Pauli strings


def pauli_bits(s):
    """Symplectic representation ``(x, z)`` of a Pauli string like ``"XZI"``."""
    try:
        bits = [_LETTER_BITS[c] for c in s.upper()]
    except KeyError as exc:
        raise PreconditionError(f"invalid Pauli letter in {s!r}") from exc
    x = np.array([b[0] for b in bits], dtype=np.uint8)
    z = np.array([b[1] for b in bits], dtype=np.uint8)
    return x, z


def bits_to_string(x, z):
    return "".join(_BITS_LETTER[(int(a), int(b))] for a, b in zip(x, z))


def pauli_matrix(s):
    return kron(*[PAULI[c] for c in s.upper()])


def c_sign(alpha, beta):
    """0 if the two strings commute, 1 if they anticommute."""
    if len(alpha) != len(beta):
        raise DimensionError("Pauli strings of different length")
    xa, za = pauli_bits(alpha)
    xb, zb = pauli_bits(beta)
    return int((np.sum(xa & zb) + np.sum(za & xb)) % 2)


def all_pauli_strings(n):
    return ["".join(p) for p in itertools.product("IXYZ", repeat=n)]


@dataclass(frozen=True)
class PauliChannelSpec:
    """``P(x) = sum_alpha lambda_alpha sigma_alpha x sigma_alpha``."""

    n: int
    terms: tuple

    def __post_init__(self):
        terms = tuple((str(s).upper(), float(w)) for s, w in self.terms)
        object.__setattr__(self, "terms", terms)
        strings = [s for s, _ in terms]
        if any(len(s) != self.n for s in strings):
            raise DimensionError("Pauli string length differs from n")
        for s in strings:
            pauli_bits(s)
        if len(set(strings)) != len(strings):
            raise PreconditionError("repeated Pauli string")
        if "I" * self.n not in strings:
            raise PreconditionError("the identity string must be part of the channel")
        if any(w <= 0 for _, w in terms):
            raise PreconditionError("Pauli weights must be positive")
        if abs(sum(w for _, w in terms) - 1.0) > 1e-12:
            raise PreconditionError("Pauli weights must sum to one")

    @property
    def weights(self):
        return dict(self.terms)

    @property
    def min_weight(self):
        return min(w for _, w in self.terms)


def random_pauli_spec(n, rng, num_terms=None):
    """Random spec with the identity plus ``num_terms - 1`` distinct other strings."""
    others = all_pauli_strings(n)[1:]
    k = num_terms if num_terms is not None else int(rng.integers(2, min(len(others), 6) + 2))
    k = max(1, min(k, len(others) + 1))
    chosen = rng.choice(len(others), size=k - 1, replace=False)
    w = rng.uniform(0.2, 1.0, size=k)
    w /= w.sum()
    terms = [("I" * n, w[0])] + [(others[j], w[i + 1]) for i, j in enumerate(chosen)]
    # renormalize exactly in floating point
    total = sum(t[1] for t in terms)
    terms = [(s, x / total) for s, x in terms]
    terms[0] = (terms[0][0], 1.0 - sum(x for _, x in terms[1:]))
    return PauliChannelSpec(n, tuple(terms))


def pauli_channel(spec):
    S = np.zeros((4 ** spec.n, 4 ** spec.n), dtype=complex)
    kraus = []
    for s, w in spec.terms:
        P = pauli_matrix(s)
        S += w * lr_superop(P, P)
        kraus.append(np.sqrt(w) * P)
    return Channel(S, kraus=tuple(kraus), invariant_state=np.eye(2 ** spec.n) / 2 ** spec.n,
                   label="pauli")


def pauli_channel_eigenvalues(spec, gammas=None):
    """``mu_gamma = sum_alpha lambda_alpha (-1)^c(alpha, gamma)`` for each string gamma."""
    if gammas is None:
        if spec.n > 6:
            raise PreconditionError("pass explicit strings for n > 6")
        gammas = all_pauli_strings(spec.n)
    ax = np.array([pauli_bits(s)[0] for s, _ in spec.terms])
    az = np.array([pauli_bits(s)[1] for s, _ in spec.terms])
    lam = np.array([w for _, w in spec.terms])
    out = {}
    for g in gammas:
        gx, gz = pauli_bits(g)
        c = ((ax & gz).astype(int).sum(axis=1) + (az & gx).astype(int).sum(axis=1)) % 2
        out[g] = float(np.sum(lam * (1 - 2 * c)))
    return out


def generated_pauli_group(strings):
    """Sign-free group generated by the given strings (closure under products)."""
    vecs = []
    for s in strings:
        x, z = pauli_bits(s)
        vecs.append(np.concatenate([x, z]))
    n = len(strings[0])
    basis = []  # GF(2) row echelon
    for v in vecs:
        v = v.copy()
        for b in basis:
            piv = np.argmax(b)
            if v[piv]:
                v ^= b
        if v.any():
            basis.append(v)
    group = set()
    for coeffs in itertools.product((0, 1), repeat=len(basis)):
        v = np.zeros(2 * n, dtype=np.uint8)
        for c, b in zip(coeffs, basis):
            if c:
                v ^= b
        group.add(bits_to_string(v[:n], v[n:]))
    return sorted(group)


@dataclass(frozen=True, eq=False)
class ConditionalExpectation:
    """Idempotent unital channel onto a subalgebra.

    ``kind`` is one of ``"pauli"``, ``"site_replacement"``, ``"primitive"``
    or ``"spectral"``; ``data`` carries the describing objects.
    """

    channel: Channel
    kind: str
    data: dict = field(default_factory=dict)

    def apply(self, x):
        return self.channel.apply(x)

    def apply_adjoint(self, rho):
        return self.channel.apply_adjoint(rho)

    @property
    def superop(self):
        return self.channel.superop

    @property
    def dim(self):
        return self.channel.dim

    def idempotency_error(self):
        S = self.channel.superop
        return float(np.abs(S @ S - S).max())


def pauli_conditional_expectation(spec):
    group = generated_pauli_group([s for s, _ in spec.terms])
    S = np.zeros((4 ** spec.n, 4 ** spec.n), dtype=complex)
    for g in group:
        P = pauli_matrix(g)
        S += lr_superop(P, P)
    S /= len(group)
    ch = Channel(S, label="E_I")
    fixed = [g for g in all_pauli_strings(spec.n)
             if all(c_sign(g, h) == 0 for h in group)] if spec.n <= 6 else None
    return ConditionalExpectation(ch, "pauli", {"group": group, "fixed_strings": fixed})


def site_replacement_expectation(dims, site):
    """``x -> tau_site(x) = Tr_site(x) (x) 1/d_site`` placed back on its factor."""
    dims = list(dims)
    keep = [i for i in range(len(dims)) if i != site]

    def f(x):
        return embed(partial_trace(x, dims, keep) / dims[site], keep, dims)

    D = int(np.prod(dims))
    S = superop_from_function(f, D)
    return ConditionalExpectation(Channel(S, label=f"tau_{site}"), "site_replacement",
                                  {"dims": dims, "site": site})


# ---------------------------------------------------------------------------
# Gibbs states and heat-bath generators


def gibbs_state(H, beta):
    """``exp(-beta H) / Tr exp(-beta H)`` via the eigenbasis with a spectral shift."""
    H = as_matrix(H, square=True)
    if not is_hermitian(H, 1e-10):
        raise PreconditionError("Hamiltonian is not Hermitian")
    if beta < 0:
        raise PreconditionError("beta must be non-negative")
    w, U = np.linalg.eigh(hermitize(H))
    e = np.exp(-beta * (w - w.min()))
    e /= e.sum()
    return hermitize((U * e) @ U.conj().T)


@dataclass(frozen=True, eq=False)
class LocalHamiltonian:
    """``H = sum_A h_A`` with terms on hyperedges of ``n`` sites of dimension ``d``."""

    n: int
    d: int
    terms: tuple  # ((sites...), matrix)

    @property
    def dims(self):
        return [self.d] * self.n

    def term_matrix(self, sites, h):
        return embed(h, list(sites), self.dims)

    def full(self):
        D = self.d ** self.n
        H = np.zeros((D, D), dtype=complex)
        for sites, h in self.terms:
            H += self.term_matrix(sites, h)
        return H

    def neighborhood(self, v):
        """Union of the hyperedges containing ``v`` (always contains ``v``)."""
        out = {v}
        for sites, _ in self.terms:
            if v in sites:
                out.update(sites)
        return sorted(out)

    def local_part(self, v):
        return [(s, h) for s, h in self.terms if v in s]

    def check_commuting(self, tol=1e-10):
        mats = [self.term_matrix(s, h) for s, h in self.terms]
        for A, B in itertools.combinations(mats, 2):
            if op_norm(A @ B - B @ A) > tol:
                return False
        return True


def ising_chain(n, coupling=1.0, field=0.0):
    """Commuting Ising chain ``-J sum Z_i Z_{i+1} - h sum Z_i`` on open boundary."""
    Z = PAULI["Z"]
    terms = [((i, i + 1), -coupling * np.kron(Z, Z)) for i in range(n - 1)]
    if field:
        terms += [((i,), -field * Z) for i in range(n)]
    return LocalHamiltonian(n, 2, tuple(terms))


@dataclass(frozen=True, eq=False)
class GeneratorSpec:
    """Heisenberg-picture Lindbladian with optional local structure.

    ``local`` maps a site/edge label to its local generator superoperator;
    ``jumps`` optionally lists Lindblad operators ``(v_j, omega_j)`` so that
    Dirichlet forms can be evaluated; ``sigma`` is a reference state.
    """

    superop: np.ndarray
    local: dict = field(default_factory=dict)
    jumps: tuple = ()
    sigma: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)

    @property
    def dim(self):
        return int(round(np.sqrt(self.superop.shape[0])))

    def apply(self, x):
        return apply_superop(self.superop, x)


def petz_heat_bath_map(omega, dims, v):
    """Superoperator of ``Psi_v(X) = w_c^{-1/2} Tr_v(w^{1/2} X w^{1/2}) w_c^{-1/2}`` (x) 1_v."""
    dims = list(dims)
    rest = [i for i in range(len(dims)) if i != v]
    sq = psd_function(omega, lambda w: np.sqrt(np.clip(w, 0, None)))
    om_c = partial_trace(omega, dims, rest)
    inv_sq = psd_function(om_c, lambda w: np.where(w > 1e-300, 1 / np.sqrt(np.clip(w, 1e-300, None)), 0))

    def f(X):
        inner = partial_trace(sq @ X @ sq, dims, rest)
        return embed(inv_sq @ inner @ inv_sq, rest, dims)

    return superop_from_function(f, int(np.prod(dims)))


def heat_bath_generator(ham, beta):
    """``L_V = sum_v (Psi_v - id)`` for a commuting local Hamiltonian."""
    if not ham.check_commuting():
        raise PreconditionError("heat-bath construction needs commuting terms")
    for _, h in ham.terms:
        if op_norm(h) > 1 + 1e-12:
            raise PreconditionError("local terms must have operator norm at most 1")
    H = ham.full()
    omega = gibbs_state(H, beta)
    D = H.shape[0]
    I = np.eye(D * D, dtype=complex)
    psis = {v: petz_heat_bath_map(omega, ham.dims, v) for v in range(ham.n)}
    local = {v: psis[v] - I for v in range(ham.n)}
    L = sum(local.values())
    info = {"psi": psis, "beta": float(beta), "hamiltonian": ham,
            "neighborhoods": {v: ham.neighborhood(v) for v in range(ham.n)}}
    return GeneratorSpec(L, local=local, sigma=omega, info=info)


def lindblad_generator(jumps, d, hamiltonian=None):
    """Heisenberg Lindbladian ``sum_j (v_j^* x v_j - 1/2 {v_j^* v_j, x}) + i[H, x]``.

    ``jumps`` is a sequence of matrices (weights folded in).
    """
    I = np.eye(d)
    L = np.zeros((d * d, d * d), dtype=complex)
    for v in jumps:
        v = np.asarray(v, dtype=complex)
        vd = v.conj().T
        L += lr_superop(vd, v) - 0.5 * (lr_superop(vd @ v, I) + lr_superop(I, vd @ v))
    if hamiltonian is not None:
        Hm = np.asarray(hamiltonian, dtype=complex)
        L += 1j * (lr_superop(Hm, I) - lr_superop(I, Hm))
    return L


def depolarizing_generator(d=2):
    """Qubit ``L = E - id`` with ``E(x) = Tr(x) 1/2`` and Pauli jumps.

    The jumps are ``v_j = sigma_j / (2 sqrt 2)`` with Bohr frequency 0, for
    the form ``L(x) = sum_j (2 v_j^* x v_j - {v_j^* v_j, x})``.
    """
    if d != 2:
        raise UnsupportedStructure("Pauli jump form is implemented for a qubit")
    vs = [PAULI[k] / (2 * np.sqrt(2)) for k in "XYZ"]
    L = lindblad_generator([np.sqrt(2) * v for v in vs], 2)
    return GeneratorSpec(L, jumps=tuple((v, 0.0) for v in vs), sigma=np.eye(2) / 2,
                         info={"kind": "depolarizing"})


def semigroup_channel(gen, t):
    if t < 0:
        raise PreconditionError("semigroup time must be non-negative")
    L = gen.superop if isinstance(gen, GeneratorSpec) else np.asarray(gen)
    if t == 0:
        return Channel(np.eye(L.shape[0], dtype=complex), label="id")
    return Channel(mat_exp(t * L), label=f"exp({t}L)")


# ---------------------------------------------------------------------------
# fixed points


def gns_gram(omega):
    """Gram matrix of ``<x, y>_omega = Tr(omega x^dagger y)`` in the vec basis."""
    d = omega.shape[0]
    return np.kron(np.asarray(omega).T, np.eye(d))


def gns_symmetry_error(S, omega):
    G = gns_gram(omega)
    return float(np.abs(G @ S - S.conj().T @ G).max())


def kms_gram(omega):
    """Gram matrix of ``<x, y> = Tr(x^dagger omega^1/2 y omega^1/2)``."""
    h = psd_function(omega, lambda w: np.sqrt(np.clip(w, 0, None)))
    return np.kron(h.T, h)


def kms_symmetry_error(S, omega):
    G = kms_gram(omega)
    return float(np.abs(G @ S - S.conj().T @ G).max())


def symmetric_spectral_projector(S, G, target=1.0, modulus=True, tol=1e-9):
    """Projector onto the eigenspace of ``S`` at ``target`` for ``S`` self-adjoint in ``G``.

    With ``modulus=True`` all eigenvalues of modulus ``|target|`` are kept.
    """
    Gh = psd_function(G, np.sqrt)
    Ghi = psd_function(G, lambda w: 1 / np.sqrt(w))
    T = hermitize(Gh @ S @ Ghi)
    w, V = np.linalg.eigh(T)
    sel = (np.abs(np.abs(w) - abs(target)) <= tol) if modulus else (np.abs(w - target) <= tol)
    Vs = V[:, sel]
    return Ghi @ (Vs @ Vs.conj().T) @ Gh, w[sel]


def invariant_state(ch, tol=1e-9):
    """An invariant state of the pre-adjoint (eigenvector at eigenvalue 1)."""
    w, V = np.linalg.eig(ch.adjoint_superop)
    k = int(np.argmin(np.abs(w - 1)))
    if abs(w[k] - 1) > 1e-6:
        raise UnsupportedStructure("no invariant state found")
    rho = unvec(V[:, k])
    rho = hermitize(rho / np.trace(rho))
    return rho


def fixed_point_expectation(ch, mode="generic", omega=None, spec=None, tol=1e-8):
    """Conditional expectation onto the fixed-point algebra of ``ch``.

    ``mode="pauli"`` needs the ``spec``; ``mode="primitive"`` returns
    ``x -> omega(x) 1``; ``mode="generic"`` requires GNS or KMS symmetry with
    respect to ``omega`` and returns the spectral projector onto the
    peripheral (modulus one) eigenspace, orthogonal in that inner product.
    """
    d = ch.dim
    if mode == "pauli":
        if spec is None:
            raise PreconditionError("pauli mode needs the channel spec")
        return pauli_conditional_expectation(spec)
    if omega is None:
        omega = ch.invariant_state if ch.invariant_state is not None else invariant_state(ch)
    omega = hermitize(as_matrix(omega, square=True))
    if mode == "primitive":
        S = np.outer(vec(np.eye(d)), vec(omega).conj())
        # vec(Tr(omega x) 1) = vec(1) vec(omega^dagger)^dagger vec(x)
        return ConditionalExpectation(Channel(S, label="primitive"), "primitive", {"omega": omega})
    if mode != "generic":
        raise PreconditionError(f"unknown mode {mode!r}")
    S = ch.superop
    if gns_symmetry_error(S, omega) <= tol:
        G, kind = gns_gram(omega), "gns"
    elif kms_symmetry_error(S, omega) <= tol:
        G, kind = kms_gram(omega), "kms"
    else:
        raise UnsupportedStructure("channel is neither GNS- nor KMS-symmetric for the given state")
    Pi, w = symmetric_spectral_projector(S, G)
    return ConditionalExpectation(Channel(Pi, label="E_N"), "spectral",
                                  {"omega": omega, "eigenvalues": w, "symmetry": kind})


def generator_fixed_projector(L, omega, tol=1e-9):
    """``lim_t exp(t L)`` for a generator self-adjoint in the GNS or KMS inner product."""
    L = np.asarray(L, dtype=complex)
    omega = hermitize(as_matrix(omega, square=True))
    if gns_symmetry_error(L, omega) <= 1e-8:
        G = gns_gram(omega)
    elif kms_symmetry_error(L, omega) <= 1e-8:
        G = kms_gram(omega)
    else:
        raise UnsupportedStructure("generator is neither GNS- nor KMS-symmetric")
    Pi, _ = symmetric_spectral_projector(L, G, target=0.0, modulus=False, tol=tol)
    return Pi
