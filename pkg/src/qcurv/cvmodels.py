"""Bosonic and fermionic beam-splitter channels at finite truncation."""

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .channels import Channel, channel_from_superop
from .errors import PreconditionError, SolverError
from .matcore import (
    as_matrix, hermitize, is_hermitian, kron, mat_exp, op_norm, partial_trace,
    trace_norm, unvec, vec,
)


# ---------------------------------------------------------------------------
# bosons


@dataclass(frozen=True)
class FockSpace:
    cutoff: int
    modes: int = 1

    @property
    def dim(self):
        return (self.cutoff + 1) ** self.modes


def fock_ops(N):
    """Truncated ``(a, a^dagger, a^dagger a)`` on levels ``0..N``."""
    if N < 1:
        raise PreconditionError("cutoff must be at least 1")
    a = np.diag(np.sqrt(np.arange(1, N + 1, dtype=float)), k=1).astype(complex)
    ad = a.conj().T
    return a, ad, np.diag(np.arange(N + 1, dtype=float)).astype(complex)


def _angle(lam):
    if not 0.0 <= lam <= 1.0:
        raise PreconditionError("transmissivity must lie in [0, 1]")
    return math.acos(math.sqrt(lam))


def sector_generator(k):
    """``a^dagger b - b^dagger a`` on the sector of total photon number ``k``.

    Basis ``|m, k-m>`` ordered by ``m = 0..k``.
    """
    G = np.zeros((k + 1, k + 1))
    for m in range(k):
        # a^dagger b |m, k-m> = sqrt((m+1)(k-m)) |m+1, k-m-1>
        c = math.sqrt((m + 1) * (k - m))
        G[m + 1, m] += c
        G[m, m + 1] -= c
    return G


def sector_unitaries(lam, kmax):
    """Exact ``U_lambda`` blocks for total photon numbers ``0..kmax``."""
    th = _angle(lam)
    out = []
    for k in range(kmax + 1):
        G = sector_generator(k)
        # G is real antisymmetric: exp through the Hermitian matrix iG
        w, V = np.linalg.eigh(1j * G)
        out.append((V * np.exp(-1j * th * w)) @ V.conj().T)
    return out


def beam_splitter_unitary(lam, N):
    """``exp(arccos(sqrt lam) (a^dagger b - b^dagger a))`` on two modes cut at ``N``.

    Index of ``|m, n>`` is ``m (N+1) + n``.  Sectors with total photon
    number above ``N`` are exponentiated within the truncated sector.
    """
    d = N + 1
    th = _angle(lam)
    U = np.zeros((d * d, d * d), dtype=complex)
    for k in range(2 * N + 1):
        ms = [m for m in range(k + 1) if m <= N and k - m <= N]
        idx = [m * d + (k - m) for m in ms]
        G = np.zeros((len(ms), len(ms)))
        for a_, m in enumerate(ms):
            for b_, mm in enumerate(ms):
                if mm == m + 1:
                    G[b_, a_] += math.sqrt((m + 1) * (k - m))
                    G[a_, b_] -= math.sqrt((m + 1) * (k - m))
        w, V = np.linalg.eigh(1j * G)
        U[np.ix_(idx, idx)] = (V * np.exp(-1j * th * w)) @ V.conj().T
    return U


def thermal_state(beta, N):
    """Truncated ``exp(-beta a^dagger a) / Tr`` on levels ``0..N``."""
    if beta <= 0:
        raise PreconditionError("thermal state needs beta > 0")
    k = np.arange(N + 1)
    w = np.exp(-beta * k)
    w /= w.sum()
    return np.diag(w).astype(complex)


def thermal_energy_limit(beta):
    return 1.0 / math.expm1(beta)


def energy(rho):
    d = rho.shape[0]
    return float(np.real(np.sum(np.arange(d) * np.diag(rho))))


@dataclass(frozen=True, eq=False)
class BeamSplitterSpec:
    lam: float
    env: np.ndarray
    cutoff: int

    def __post_init__(self):
        _angle(self.lam)
        env = hermitize(as_matrix(self.env, square=True))
        if env.shape[0] != self.cutoff + 1:
            raise PreconditionError("environment must live on the same cutoff")
        if abs(np.trace(env) - 1) > 1e-10 or np.linalg.eigvalsh(env)[0] < -1e-10:
            raise PreconditionError("environment is not a state")
        object.__setattr__(self, "env", env)

    @property
    def env_tail(self):
        """Weight of the environment on its top level."""
        return float(np.real(self.env[-1, -1]))


def bose_kraus(spec):
    """Kraus operators (with weights folded in) of the compressed channel.

    ``P(x) = sum_{j,r} K_{jr}^dagger x K_{jr}`` with
    ``K_{jr}[q, l] = sqrt(s_j) <q, r| U |l, e_j>`` where ``sigma = sum s_j |e_j><e_j|``.
    Every sector touched by ``l, j <= N`` is exponentiated exactly (total
    photon number up to ``2N``), so the only approximation is the
    restriction of the output to ``q <= N``.
    """
    N = spec.cutoff
    d = N + 1
    blocks = sector_unitaries(spec.lam, 2 * N)
    s, E = np.linalg.eigh(spec.env)
    s = np.clip(s, 0, None)
    # V[q, r, l, j] = <q, r|U|l, j> for q, l, j <= N and r <= 2N
    V = np.zeros((d, 2 * N + 1, d, d), dtype=complex)
    for l in range(d):
        for j in range(d):
            k = l + j
            Uk = blocks[k]
            for q in range(min(k, N) + 1):
                V[q, k - q, l, j] = Uk[q, l]
    # rotate the environment index into sigma's eigenbasis
    W = np.einsum("qrlj,jt->qrlt", V, E)
    kraus = []
    for t in range(d):
        if s[t] <= 1e-300:
            continue
        for r in range(2 * N + 1):
            K = math.sqrt(s[t]) * W[:, r, :, t]
            if np.abs(K).max() > 0:
                kraus.append(K)
    return kraus


def _superop_from_kraus(kraus):
    K = np.array(kraus)                  # n, d, d
    n, d, _ = K.shape
    L = np.conj(K).reshape(n, d * d)     # [n, (i, a)]
    R = K.reshape(n, d * d)              # [n, (c, b)]
    T = (L.T @ R).reshape(d, d, d, d)    # i, a, c, b
    # S[a + b d, i + c d] = sum conj(K[i, a]) K[c, b]
    return T.transpose(1, 3, 0, 2).reshape(d * d, d * d, order="F")


def bose_channel(spec):
    """Heisenberg channel ``Tr_2[(1 (x) sigma) U^* (x (x) 1) U]`` at cutoff ``N``."""
    kraus = bose_kraus(spec)
    S = _superop_from_kraus(kraus)
    return Channel(S, kraus=tuple(kraus), label=f"bose(lambda={spec.lam})")


def sector_projector(N, K):
    P = np.zeros((N + 1, N + 1), dtype=complex)
    P[: K + 1, : K + 1] = np.eye(K + 1)
    return P


def sector_observable_basis(N, K):
    """Matrix units ``|m><l|`` with ``m, l <= K`` as columns of vec vectors."""
    d = N + 1
    cols = []
    for l in range(K + 1):
        for m in range(K + 1):
            cols.append(l * d + m)
    B = np.zeros((d * d, len(cols)), dtype=complex)
    B[cols, np.arange(len(cols))] = 1.0
    return B


def leakage(ch, rho):
    """Trace lost by the truncated pre-adjoint on ``rho``."""
    return float(1 - np.real(np.trace(ch.apply_adjoint(rho))))


def bose_intertwining_residual(spec, ch=None, K=None):
    """``max ||[c, P(x)] - sqrt(lam) P([c, x])||`` over ``c in {a, a^dagger}``.

    ``x`` runs over the matrix units of the ``<= K`` photon block and the
    difference is read on the same block.
    """
    N = spec.cutoff
    K = N // 2 if K is None else K
    ch = bose_channel(spec) if ch is None else ch
    a, ad, _ = fock_ops(N)
    sl = slice(0, K + 1)
    worst = 0.0
    r = math.sqrt(spec.lam)
    for m in range(K + 1):
        for l in range(K + 1):
            x = np.zeros((N + 1, N + 1), dtype=complex)
            x[m, l] = 1.0
            Px = ch.apply(x)
            for c in (a, ad):
                lhs = c @ Px - Px @ c
                rhs = r * ch.apply(c @ x - x @ c)
                worst = max(worst, float(np.abs((lhs - rhs)[sl, sl]).max()))
    return worst


def rotation_residual(lam, N, kmax=None):
    """``||U^* a U - (sqrt(lam) a + sqrt(1-lam) b)||`` on sectors up to ``kmax``."""
    kmax = N - 1 if kmax is None else kmax
    d = N + 1
    U = beam_splitter_unitary(lam, N)
    a, _, _ = fock_ops(N)
    A = np.kron(a, np.eye(d))
    B = np.kron(np.eye(d), a)
    idx = [m * d + n for m in range(d) for n in range(d) if m + n <= kmax]
    out = 0.0
    for lhs, rhs in ((U.conj().T @ A @ U, math.sqrt(lam) * A + math.sqrt(1 - lam) * B),
                     (U.conj().T @ B @ U, -math.sqrt(1 - lam) * A + math.sqrt(lam) * B)):
        D = (lhs - rhs)[np.ix_(idx, idx)]
        out = max(out, float(np.abs(D).max()))
    return out


def commutator_b_sigma_trace_norm(env):
    N = env.shape[0] - 1
    b, _, _ = fock_ops(N)
    return trace_norm(b @ env - env @ b)


def diameter_bound(E, betas=None):
    """``inf_beta sqrt(64 coth(beta/2) (beta E - ln(1 - e^{-beta})))`` on a grid."""
    betas = np.geomspace(1e-3, 50, 4000) if betas is None else np.asarray(betas)
    vals = np.sqrt(64 / np.tanh(betas / 2) * (betas * E - np.log(-np.expm1(-betas))))
    k = int(np.argmin(vals))
    return float(vals[k]), float(betas[k])


def _inf_root(E, betas=None):
    betas = np.geomspace(1e-3, 50, 4000) if betas is None else np.asarray(betas)
    vals = np.sqrt(1 / np.tanh(betas / 2) * (betas * E - np.log(-np.expm1(-betas))))
    return float(vals.min())


def energy_bound_check(spec, rho, ch=None):
    """Energy growth bound for one channel step and the closed-form diameter bound."""
    ch = bose_channel(spec) if ch is None else ch
    rho = hermitize(as_matrix(rho, square=True))
    out = hermitize(ch.apply_adjoint(rho))
    E_out = energy(out)
    E_rho = energy(rho)
    E_s = energy(spec.env)
    bound = (math.sqrt(spec.lam * E_rho) + math.sqrt((1 - spec.lam) * E_s)) ** 2
    Ep = max(E_rho, bound)
    diam, beta = diameter_bound(Ep)
    return {"energy_out": E_out, "energy_bound": bound, "slack": bound - E_out,
            "leakage": leakage(ch, rho), "diameter_bound": diam, "diameter_beta": beta,
            "ok": E_out <= bound + 1e-9}


def regularity_bound(spec, w_l):
    lam = spec.lam
    if lam >= 1:
        raise PreconditionError("regularity needs lambda < 1")
    return math.sqrt(lam / (1 - lam)) * commutator_b_sigma_trace_norm(spec.env) * w_l


def regularity_check(spec, rho1, rho2, w_l, ch=None, steps=1):
    """``||(P^dagger)^n (rho1 - rho2)||_1`` against ``lam^{(n-1)/2} sqrt(lam/(1-lam)) ||[b, sigma]||_1 W_L``.

    ``w_l`` is the transport distance of the two states for
    ``max(||[a, x]||, ||[a^dagger, x]||)``, computed by the caller.
    """
    ch = bose_channel(spec) if ch is None else ch
    base = regularity_bound(spec, w_l)
    D = hermitize(as_matrix(rho1, square=True) - as_matrix(rho2, square=True))
    rows = []
    for n in range(1, steps + 1):
        D = ch.apply_adjoint(D)
        lhs = trace_norm(hermitize(D))
        rhs = spec.lam ** ((n - 1) / 2) * base
        rows.append({"n": n, "measured": lhs, "bound": rhs, "slack": rhs - lhs})
    return {"rows": rows, "min_slack": min(r["slack"] for r in rows),
            "commutator_norm": commutator_b_sigma_trace_norm(spec.env)}


def mixing_bound(spec, rho1, rho2, n):
    """The closed-form trace-distance bound after ``n`` steps (finite-energy corollary)."""
    lam = spec.lam
    E = (math.sqrt(lam * max(energy(rho1), energy(rho2)))
         + math.sqrt((1 - lam) * energy(spec.env))) ** 2
    pref = 16 * lam ** (n / 2) / (math.sqrt(1 - lam) * (1 - math.sqrt(lam)))
    return pref * commutator_b_sigma_trace_norm(spec.env) * _inf_root(E)


def mixing_table(spec, rho1, rho2, steps, ch=None):
    ch = bose_channel(spec) if ch is None else ch
    D = hermitize(as_matrix(rho1, square=True) - as_matrix(rho2, square=True))
    rows = []
    for n in range(1, steps + 1):
        D = ch.apply_adjoint(D)
        m = trace_norm(hermitize(D))
        b = mixing_bound(spec, rho1, rho2, n)
        rows.append({"n": n, "measured": m, "bound": b})
    return rows


# ---------------------------------------------------------------------------
# fermions

_X = np.array([[0, 1], [1, 0]], dtype=complex)
_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z = np.array([[1, 0], [0, -1]], dtype=complex)
_I = np.eye(2, dtype=complex)


@dataclass(frozen=True, eq=False)
class CliffordAlgebra:
    n: int
    generators: tuple

    @property
    def dim(self):
        return 2 ** self.n

    @property
    def parity(self):
        """``Z (x) ... (x) Z``, anticommuting with every generator."""
        return kron(*([_Z] * self.n))

    def car_residual(self):
        I = np.eye(self.dim)
        worst = 0.0
        for i, ci in enumerate(self.generators):
            worst = max(worst, float(np.abs(ci - ci.conj().T).max()))
            for j, cj in enumerate(self.generators):
                worst = max(worst, float(np.abs(ci @ cj + cj @ ci - 2 * (i == j) * I).max()))
        return worst

    def product(self, subset):
        out = np.eye(self.dim, dtype=complex)
        for i in sorted(subset):
            out = out @ self.generators[i]
        return out


def clifford_generators(n):
    """Jordan-Wigner Majorana operators ``c_1..c_2n`` on ``n`` qubits."""
    if not 1 <= n <= 6:
        raise PreconditionError("Clifford construction supports 1 <= n <= 6")
    gens = []
    for j in range(n):
        pre = [_Z] * j
        post = [_I] * (n - j - 1)
        gens.append(kron(*(pre + [_X] + post)))
        gens.append(kron(*(pre + [_Y] + post)))
    return CliffordAlgebra(n, tuple(gens))


def is_even(x, parity, tol=1e-10):
    return float(np.abs(parity @ x @ parity - x).max()) <= tol


def fermi_beam_splitter(lam, n, env=None, check_tol=1e-6):
    """Channel ``Tr_2((1 (x) sigma) U^* (x (x) 1) U)`` on ``n`` fermionic modes.

    The environment copy uses the parity-dressed generators
    ``chat_j = Gamma (x) c_j`` so that system and environment generators
    anticommute.  ``U`` is the exponential of a quadratic generator
    ``sum_ij h_ij c_i chat_j`` fitted so that the rotation relations hold,
    starting from the pairing ``h = theta I``.  Returns ``(channel, report)``.
    """
    alg = clifford_generators(n)
    D = alg.dim
    env = np.eye(D, dtype=complex) / D if env is None else hermitize(as_matrix(env, square=True))
    if not is_even(env, alg.parity):
        raise PreconditionError("environment state must be even")
    G = alg.parity
    sys_c = [np.kron(c, np.eye(D)) for c in alg.generators]
    env_c = [np.kron(G, c) for c in alg.generators]
    m = len(sys_c)
    th = _angle(lam)
    s, t = math.sqrt(lam), math.sqrt(1 - lam)

    quad = [[sys_c[i] @ env_c[j] for j in range(m)] for i in range(m)]

    def unitary(h):
        A = sum((h[i, j] * quad[i][j] for i in range(m) for j in range(m) if h[i, j] != 0),
                np.zeros((D * D, D * D), dtype=complex))
        return mat_exp(A)

    def residual(U):
        Ud = U.conj().T
        r = 0.0
        for j in range(m):
            r = max(r, op_norm(Ud @ sys_c[j] @ U - (s * sys_c[j] + t * env_c[j])))
            r = max(r, op_norm(Ud @ env_c[j] @ U - (-t * sys_c[j] + s * env_c[j])))
        return r

    # least-squares refinement of the generator coefficients; the paired
    # start is already a solution and the refinement confirms stationarity
    h = th * np.eye(m)
    U = unitary(h)
    res = residual(U)
    if res > 1e-12:
        from scipy.optimize import least_squares

        def fun(hv):
            Uh = unitary(hv.reshape(m, m))
            Ud = Uh.conj().T
            out = []
            for j in range(m):
                R1 = Ud @ sys_c[j] @ Uh - (s * sys_c[j] + t * env_c[j])
                out += [R1.real.ravel(), R1.imag.ravel()]
            return np.concatenate(out)

        sol = least_squares(fun, h.ravel(), xtol=1e-15, ftol=1e-15, gtol=1e-15)
        h = sol.x.reshape(m, m)
        U = unitary(h)
        res = residual(U)
    if res > check_tol:
        raise SolverError("fermionic beam splitter relations not satisfied",
                          {"residual": res})
    Ud = U.conj().T
    envI = np.kron(np.eye(D), env)

    def P(x):
        return partial_trace(envI @ Ud @ np.kron(x, np.eye(D)) @ U, [D, D], [0])

    from .matcore import superop_from_function
    S = superop_from_function(P, D)
    ch = Channel(S, label=f"fermi(lambda={lam})")

    # intertwining [c_j, P(x)] = sqrt(lam) P([c_j, x]) on a full basis, split by parity
    worst_even = worst_odd = 0.0
    for subset_bits in range(4 ** n):
        subset = [k for k in range(2 * n) if (subset_bits >> k) & 1]
        x = alg.product(subset)
        Px = ch.apply(x)
        for c in alg.generators:
            r = op_norm(c @ Px - Px @ c - s * ch.apply(c @ x - x @ c))
            if len(subset) % 2 == 0:
                worst_even = max(worst_even, r)
            else:
                worst_odd = max(worst_odd, r)
    report = {"car_residual": alg.car_residual(), "rotation_residual": res,
              "generator": h, "unitarity": float(np.abs(Ud @ U - np.eye(D * D)).max()),
              "intertwining_even": worst_even, "intertwining_odd": worst_odd,
              "intertwining": max(worst_even, worst_odd)}
    return ch, report
