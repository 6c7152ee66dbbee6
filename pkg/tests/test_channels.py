import math

import numpy as np
import pytest

from qcurv.channels import (
    PAULI, PauliChannelSpec, c_sign, channel_from_kraus, depolarizing_generator,
    fixed_point_expectation, gibbs_state, heat_bath_generator, identity_channel, ising_chain,
    pauli_channel, pauli_channel_eigenvalues, pauli_conditional_expectation, pauli_matrix,
    random_pauli_spec, semigroup_channel, kms_symmetry_error, LocalHamiltonian,
)
from qcurv.errors import DimensionError, PreconditionError, UnsupportedStructure
from qcurv.matcore import random_hermitian, random_unitary, lr_superop, vec


def depol(p):
    return PauliChannelSpec(1, (("I", 1 - p), ("X", p / 3), ("Y", p / 3), ("Z", p / 3)))


def test_kraus_identity():
    ch = channel_from_kraus([np.eye(3)])
    assert np.allclose(ch.superop, np.eye(9))


@pytest.mark.parametrize("p", [0.1, 0.35])
def test_dephasing_choi_spectrum(p):
    ch = channel_from_kraus([math.sqrt(1 - p) * np.eye(2), math.sqrt(p) * PAULI["Z"]])
    w = np.sort(np.linalg.eigvalsh(ch.choi()))[::-1]
    assert np.allclose(w, [2 * (1 - p), 2 * p, 0, 0], atol=1e-12)


def test_random_dilation_is_cptp(rng):
    U = random_unitary(6, rng)
    V = U[:, :2]                       # isometry C^2 -> C^2 (x) C^3
    kraus = [V.reshape(2, 3, 2)[:, i, :] for i in range(3)]
    ch = channel_from_kraus(kraus)
    assert ch.is_cptp()
    assert ch.unitality_error() <= 1e-12


def test_kraus_incomplete_rejected():
    with pytest.raises(PreconditionError):
        channel_from_kraus([0.5 * np.eye(2)])


def test_pauli_identity_spec():
    ch = pauli_channel(PauliChannelSpec(2, (("II", 1.0),)))
    assert np.allclose(ch.superop, np.eye(16))


def test_depolarizing_eigenvalue_on_x():
    ch = pauli_channel(depol(0.25))
    assert np.allclose(ch.apply(PAULI["X"]), (2 / 3) * PAULI["X"])
    assert pauli_channel_eigenvalues(depol(0.25))["X"] == pytest.approx(2 / 3, abs=1e-15)


def test_two_qubit_sign_count():
    spec = PauliChannelSpec(2, (("II", 0.7), ("XI", 0.2), ("ZZ", 0.1)))
    ch = pauli_channel(spec)
    P = pauli_matrix("ZI")
    assert np.allclose(ch.apply(P), 0.6 * P)
    assert pauli_channel_eigenvalues(spec)["ZI"] == pytest.approx(0.6, abs=1e-14)


def test_eigenvalues_match_dense(rng):
    spec = random_pauli_spec(3, rng)
    ch = pauli_channel(spec)
    mus = pauli_channel_eigenvalues(spec)
    assert mus["III"] == pytest.approx(1.0)
    err = 0.0
    for g, mu in mus.items():
        P = pauli_matrix(g)
        err = max(err, np.abs(ch.apply(P) - mu * P).max())
    assert err <= 1e-12


def test_pauli_spec_validation():
    with pytest.raises(PreconditionError):
        PauliChannelSpec(1, (("X", 1.0),))
    with pytest.raises(PreconditionError):
        PauliChannelSpec(1, (("I", 0.5), ("X", 0.4)))
    with pytest.raises(DimensionError):
        PauliChannelSpec(2, (("I", 1.0),))


def test_c_sign_examples():
    assert c_sign("X", "X") == 0
    assert c_sign("X", "Y") == 1
    assert c_sign("XY", "YX") == 0
    A, B = pauli_matrix("XY"), pauli_matrix("YX")
    assert np.allclose(A @ B, B @ A)
    with pytest.raises(DimensionError):
        c_sign("X", "XX")


def test_conditional_expectation_examples(rng):
    E = pauli_conditional_expectation(PauliChannelSpec(1, (("I", 1.0),)))
    assert np.allclose(E.superop, np.eye(4))
    E = pauli_conditional_expectation(depol(0.25))
    x = random_hermitian(2, rng)
    assert np.allclose(E.apply(x), np.trace(x) / 2 * np.eye(2))
    assert E.idempotency_error() <= 1e-12


def test_powers_converge_at_rate_two_thirds():
    spec = depol(0.25)
    S = pauli_channel(spec).superop
    E = pauli_conditional_expectation(spec).superop
    prev = None
    for k in range(1, 8):
        dist = np.linalg.norm(np.linalg.matrix_power(S, k) - E, 2)
        if prev is not None:
            assert dist / prev == pytest.approx(2 / 3, abs=1e-12)
        prev = dist


def test_gibbs_state_examples():
    assert np.allclose(gibbs_state(random_hermitian(3, np.random.default_rng(0)), 0.0), np.eye(3) / 3)
    e = math.e
    assert np.allclose(gibbs_state(PAULI["Z"], 1.0), np.diag([1 / e, e]) / (1 / e + e))
    H = ising_chain(3).full()
    w = gibbs_state(H, 0.1)
    assert abs(np.trace(w) - 1) <= 1e-12
    assert np.linalg.eigvalsh(w).min() > 0
    assert np.abs(w @ H - H @ w).max() <= 1e-12
    # large beta does not overflow
    assert np.isfinite(gibbs_state(H, 500.0)).all()


def test_heat_bath_infinite_temperature():
    gen = heat_bath_generator(ising_chain(2), 0.0)
    from qcurv.channels import site_replacement_expectation
    for v in range(2):
        tau = site_replacement_expectation([2, 2], v).superop
        assert np.abs(gen.info["psi"][v] - tau).max() <= 1e-12


def test_heat_bath_single_qubit_fixes_gibbs():
    ham = LocalHamiltonian(1, 2, (((0,), PAULI["Z"]),))
    gen = heat_bath_generator(ham, 1.0)
    psi = gen.info["psi"][0]
    w = gibbs_state(PAULI["Z"], 1.0)
    assert np.allclose(psi.conj().T @ vec(w), vec(w), atol=1e-12)


def test_heat_bath_properties(rng):
    gen = heat_bath_generator(ising_chain(3), 0.1)
    w = gen.sigma
    P1 = semigroup_channel(gen, 1.0)
    assert np.allclose(P1.apply_adjoint(w), w, atol=1e-9)
    assert np.abs(gen.apply(np.eye(8))).max() <= 1e-10
    for psi in gen.info["psi"].values():
        assert kms_symmetry_error(psi, w) <= 1e-9


def test_heat_bath_idempotent_only_at_infinite_temperature():
    for psi in heat_bath_generator(ising_chain(3), 0.0).info["psi"].values():
        assert np.abs(psi @ psi - psi).max() <= 1e-10
    # off-diagonal observables in the Z basis are not fixed once beta > 0
    defect = max(np.abs(p @ p - p).max()
                 for p in heat_bath_generator(ising_chain(3), 0.1).info["psi"].values())
    assert defect > 1e-4


def test_heat_bath_rejects_noncommuting():
    ham = LocalHamiltonian(2, 2, (((0,), PAULI["Z"]), ((0, 1), np.kron(PAULI["X"], PAULI["X"]))))
    with pytest.raises(PreconditionError):
        heat_bath_generator(ham, 0.5)


def test_semigroup_examples(rng):
    gen = depolarizing_generator()
    assert np.allclose(semigroup_channel(gen, 0.0).superop, np.eye(4))
    E = pauli_conditional_expectation(depol(0.75)).superop
    for t in (0.3, 2.0):
        closed = math.exp(-t) * np.eye(4) + (1 - math.exp(-t)) * E
        assert np.abs(semigroup_channel(gen, t).superop - closed).max() <= 1e-12
    with pytest.raises(PreconditionError):
        semigroup_channel(gen, -1.0)


def test_random_local_generator_cp(rng):
    from qcurv.channels import lindblad_generator
    jumps = [rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3)) for _ in range(2)]
    L = lindblad_generator(jumps, 3, hamiltonian=random_hermitian(3, rng))
    for t in (0.1, 1.0, 10.0):
        ch = semigroup_channel(L, t)
        assert ch.is_cptp(tol=1e-8)


def test_fixed_point_examples(rng):
    ident = identity_channel(2)
    E = fixed_point_expectation(ident, omega=np.eye(2) / 2)
    assert np.allclose(E.superop, np.eye(4))
    E = fixed_point_expectation(pauli_channel(depol(0.25)))
    x = random_hermitian(2, rng)
    assert np.allclose(E.apply(x), np.trace(x) / 2 * np.eye(2))
    spec = PauliChannelSpec(2, (("II", 0.6), ("XX", 0.4)))
    Eg = fixed_point_expectation(pauli_channel(spec))
    Ep = pauli_conditional_expectation(spec)
    avg = 0.5 * (np.eye(16) + lr_superop(pauli_matrix("XX"), pauli_matrix("XX")))
    assert np.abs(Eg.superop - Ep.superop).max() <= 1e-10
    assert np.abs(Ep.superop - avg).max() <= 1e-12


def test_fixed_point_rejects_nonsymmetric():
    # amplitude damping is not symmetric for its invariant state in either inner product
    g = 0.3
    K = [np.array([[1, 0], [0, math.sqrt(1 - g)]]), np.array([[0, math.sqrt(g)], [0, 0]])]
    ch = channel_from_kraus(K)
    with pytest.raises(UnsupportedStructure):
        fixed_point_expectation(ch, omega=np.diag([0.3, 0.7]))
