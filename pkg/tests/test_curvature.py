import math

import numpy as np
import pytest

from qcurv.channels import (
    PAULI, Channel, PauliChannelSpec, depolarizing_generator, fixed_point_expectation,
    heat_bath_generator, identity_channel, ising_chain, pauli_channel, pauli_channel_eigenvalues,
    pauli_conditional_expectation, pauli_matrix, random_pauli_spec, semigroup_channel,
    site_replacement_expectation, LocalHamiltonian,
)
from qcurv.curvature import (
    composition_check, decode_matrix, dirichlet_form, dirichlet_sum, encode_matrix,
    ge_direct_ratio, ge_sample_states, gibbs_contraction_certificate, jump_diameter_bound,
    lipschitz_factor, local_ti_check, pauli_group_transfer, pauli_hat_maps, pauli_refined_factor,
    pauli_seminorm, pauli_structural_factor, poincare_2inf_constant, spectral_gap,
    superposition_check, tc_inequality_check, tensorization_check, transfer_finite_group,
    ti_inequality_check, verify_ge, verify_intertwining,
)
from qcurv.errors import PreconditionError
from qcurv.matcore import lr_superop, random_density, random_hermitian, vec
from qcurv.metrics import DerivationStructure, SemiNormSpec, seminorm_eval

X, Y, Z = PAULI["X"], PAULI["Y"], PAULI["Z"]
XYZ = SemiNormSpec.commutator_max([X, Y, Z])


def depol(p):
    return PauliChannelSpec(1, (("I", 1 - p), ("X", p / 3), ("Y", p / 3), ("Z", p / 3)))


def test_encode_roundtrip(rng):
    M = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    assert np.array_equal(decode_matrix(encode_matrix(M)), M)


def test_identity_factor_one():
    rep = lipschitz_factor(identity_channel(2), XYZ, budget=3)
    assert rep.lower_bound_factor == pytest.approx(1.0, abs=1e-9)
    assert 1 - 1e-6 <= seminorm_eval(XYZ, rep.witness) <= 1 + 1e-9


def test_kernel_violation_gives_infinite_factor():
    H = np.array([[1, 1], [1, -1]]) / math.sqrt(2)
    ch = Channel(lr_superop(H, H))
    rep = lipschitz_factor(ch, SemiNormSpec.commutator_max([Z]), budget=1)
    assert math.isinf(rep.upper_bound_factor) and rep.method == "kernel-violation"
    assert rep.to_dict()["factor_upper"] == {"status": "infinite"}


def test_depolarizing_factor():
    spec = depol(0.25)
    rep = lipschitz_factor(pauli_channel(spec), XYZ, budget=3, pauli_spec=spec)
    assert rep.upper_bound_factor == pytest.approx(1 - 2 * (0.25 / 3), abs=1e-12)
    assert rep.lower_bound_factor == pytest.approx(2 / 3, abs=1e-9)
    assert rep.lower_bound_factor <= rep.upper_bound_factor + 1e-7
    assert rep.certified
    assert seminorm_eval(XYZ, pauli_channel(spec).apply(rep.witness)) >= rep.lower_bound_factor - 1e-7


def test_pauli_structural_includes_identity_weight():
    spec = PauliChannelSpec(1, (("I", 0.1), ("X", 0.9)))
    assert pauli_structural_factor(spec) == pytest.approx(0.8)
    assert pauli_refined_factor(spec) == pytest.approx(0.8)


def test_random_two_qubit_witness_below_structural(rng):
    for _ in range(3):
        spec = random_pauli_spec(2, rng)
        rep = lipschitz_factor(pauli_channel(spec), pauli_seminorm(spec), budget=2,
                               pauli_spec=spec, rng=rng)
        assert rep.lower_bound_factor <= pauli_structural_factor(spec) + 1e-9


def test_composition_and_superposition(rng):
    a, b = depol(0.3), depol(0.6)
    fa, fb = pauli_structural_factor(a), pauli_structural_factor(b)
    m, bound = composition_check(pauli_channel(a), pauli_channel(b), XYZ, fa, fb, budget=2, rng=rng)
    assert m <= bound + 1e-8
    m, bound = superposition_check(pauli_channel(a), pauli_channel(b), 0.3, XYZ, fa, fb, budget=2, rng=rng)
    assert m <= bound + 1e-8


def test_ge_identity():
    ds = DerivationStructure([X, Y, Z])
    states = ge_sample_states(2, np.random.default_rng(1), 4, 2, 2)
    rep = verify_ge(identity_channel(2), ds, states)
    assert rep.kappa_star >= -1e-6
    assert rep.kappa_star <= 1e-6


def test_ge_depolarizing_semigroup(rng):
    gen = depolarizing_generator()
    ds = DerivationStructure(tuple(v for v, _ in gen.jumps))
    ch = semigroup_channel(gen, 0.5)
    states = ge_sample_states(2, rng, 6, 3, 3)
    rep = verify_ge(ch, ds, states)
    assert min(rep.margins) >= -1e-8
    assert min(rep.margins_above) < 0
    for rho in states[:4]:
        for _ in range(5):
            x = random_hermitian(2, rng)
            assert ge_direct_ratio(ch, ds, rho, x) <= 1 - rep.kappa_star + 1e-6


def test_intertwining_identity():
    ds = DerivationStructure([X, Y, Z])
    res = verify_intertwining(identity_channel(2), ds, [np.eye(4)] * 3)
    assert res["residual"] == 0.0


def test_intertwining_pauli(rng):
    spec = random_pauli_spec(2, rng, num_terms=4)
    ds = DerivationStructure([pauli_matrix(s) for s, _ in spec.terms if s != "II"])
    res = verify_intertwining(pauli_channel(spec), ds, pauli_hat_maps(spec))
    assert res["residual"] <= 1e-12


def test_spectral_gap_examples(rng):
    E = fixed_point_expectation(identity_channel(2), mode="primitive", omega=np.eye(2) / 2)
    assert spectral_gap(identity_channel(2), np.eye(2) / 2, E) == pytest.approx(0.0, abs=1e-12)
    assert spectral_gap(pauli_channel(depol(0.25)), np.eye(2) / 2) == pytest.approx(1 / 3, abs=1e-12)
    spec = random_pauli_spec(2, rng)
    mu = pauli_channel_eigenvalues(spec)
    fixed = set(pauli_conditional_expectation(spec).data["fixed_strings"])
    oracle = 1 - max(abs(mu[g]) for g in mu if g not in fixed)
    assert abs(spectral_gap(pauli_channel(spec), np.eye(4) / 4) - oracle) <= 1e-10
    assert spectral_gap(pauli_channel(spec), np.eye(4) / 4) >= 1 - pauli_structural_factor(spec) - 1e-7


def test_poincare_operator_norm(rng):
    om = np.eye(2) / 2
    E = fixed_point_expectation(identity_channel(2), mode="primitive", omega=om)
    rep = poincare_2inf_constant(SemiNormSpec.operator_norm(2), om, E, rng=rng, restarts=3)
    assert rep.lower <= rep.value + 1e-7
    # ||x - Tr(x)/2||_2 <= ||x|| with equality at x = Z
    assert rep.value == pytest.approx(1.0, abs=1e-6)
    best = 0.0
    for _ in range(200):
        x = random_hermitian(2, rng)
        x /= np.linalg.norm(x, 2)
        y = x - np.trace(x) / 2 * np.eye(2)
        best = max(best, math.sqrt(np.trace(y @ y).real / 2))
    assert best <= rep.value + 1e-7


def test_poincare_kernel_outside_fixed_algebra():
    om = np.eye(2) / 2
    E = fixed_point_expectation(identity_channel(2), mode="primitive", omega=om)
    rep = poincare_2inf_constant(SemiNormSpec.commutator_max([Z]), om, E)
    assert not rep.finite


def test_tc_examples(rng):
    dims = [2, 2]
    Es = [site_replacement_expectation(dims, i) for i in range(2)]
    sn = SemiNormSpec.oscillator(dims)
    r = tc_inequality_check(Es, sn, 0.5, 1.0, np.eye(4) / 4)
    assert r.lhs == 0.0 and r.status == "ok"
    E1 = [site_replacement_expectation([2], 0)]
    rho = random_density(2, rng)
    r = tc_inequality_check(E1, SemiNormSpec.oscillator([2]), 1.0, 1.0, rho)
    assert r.status == "ok"
    assert r.rhs == pytest.approx(math.sqrt(2 * r.details["relative_entropy"]))


def test_ti_examples(rng):
    gen = depolarizing_generator()
    ds = DerivationStructure(tuple(v for v, _ in gen.jumps), sigma=gen.sigma)
    r = ti_inequality_check(ds, gen, 1.0, 1.0, np.eye(2) / 2)
    assert r.lhs == 0.0
    for _ in range(5):
        x = random_hermitian(2, rng)
        vs = [math.sqrt(2) * v for v, _ in gen.jumps]
        assert abs(dirichlet_form(gen.superop, gen.sigma, x)
                   - dirichlet_sum(vs, gen.sigma, x) / 2) <= 1e-10


def test_local_ti_infinite_temperature_constant():
    gen = heat_bath_generator(ising_chain(2), 0.0)
    r = local_ti_check(gen, 1.0, 0.5, np.eye(4) / 4, xs=[np.kron(Z, X)])
    for e in r.details["per_edge"].values():
        # Pauli jumps sigma_k / (2 sqrt 2) at frequency 0: C_e = 2 * 2 * ||v|| = sqrt 2
        assert e["C_e"] == pytest.approx(math.sqrt(2), abs=1e-9)
    assert r.lhs == 0.0


def test_local_ti_ising(rng):
    from qcurv.curvature import _kms_gap, fit_decay_constant
    gen = heat_bath_generator(ising_chain(3), 0.1)
    orn = SemiNormSpec.ornstein(gen.info["hamiltonian"].dims)
    xs = [random_hermitian(8, rng) for _ in range(2)]
    kappa = _kms_gap(gen.superop, gen.sigma) / 2
    C = fit_decay_constant(gen, lambda x: seminorm_eval(orn, x), kappa, (0.1, 1.0), xs)
    r = local_ti_check(gen, C, kappa, random_density(8, rng), t_grid=(0.1, 1.0), xs=xs, rng=rng)
    assert r.status == "ok" and r.slack >= 0


def test_jump_diameter(rng):
    ch = pauli_channel(depol(0.25))
    rho = random_density(2, rng)
    r = jump_diameter_bound(XYZ, ch, rho, rho, 1 / 6)
    assert r.lhs == 0.0
    r = jump_diameter_bound(XYZ, ch, rho, random_density(2, rng), 1 / 6, factor=5 / 6)
    assert r.slack >= -1e-7 and r.status == "ok"
    with pytest.raises(PreconditionError):
        jump_diameter_bound(XYZ, ch, rho, rho, 0.0)


def test_tensorization_two_depolarizing_qubits(rng):
    ch = pauli_channel(depol(0.75))
    res = tensorization_check([[X, Y, Z], [X, Y, Z]], [ch, ch], [0.5, 0.5], budget=2, rng=rng)
    assert res["ok"]
    res = tensorization_check([[X, Y, Z], [X, Y, Z]], [ch, ch], [0.5, 0.5], kappas=[0.0, 0.0],
                              budget=1, rng=rng)
    assert res["bound"] == 1.0 and res["ok"]


def _z2z2():
    table = [[g ^ h for h in range(4)] for g in range(4)]
    u = [np.eye(2), X, Z, X @ Z]
    return table, u


def test_transfer_klein_group_depolarizes(rng):
    table, u = _z2z2()
    ch, rep = transfer_finite_group(table, [1, 1, 1, 1], u, [1, 2], {1: 1.0, 2: 1.0}, rng=rng)
    x = random_hermitian(2, rng)
    assert np.allclose(ch.apply(x), np.trace(x) / 2 * np.eye(2), atol=1e-12)
    assert rep["ok"]


def test_transfer_delta_kernel(rng):
    table, u = _z2z2()
    ch, rep = transfer_finite_group(table, [4, 0, 0, 0], u, [1, 2], {1: 1.0, 2: 1.0}, rng=rng)
    assert np.allclose(ch.superop, np.eye(4))
    assert rep["classical_factor"] == pytest.approx(1.0)


def test_pauli_group_transfer_recovers_channel(rng):
    spec = random_pauli_spec(2, rng)
    ch, _ = transfer_finite_group(*pauli_group_transfer(spec), rng=rng, samples=2)
    assert np.abs(ch.superop - pauli_channel(spec).superop).max() <= 1e-12


def test_gibbs_infinite_temperature(rng):
    r = gibbs_contraction_certificate(ising_chain(3), 0.0, rng=rng, samples=5)
    assert r["kappa"] == 0.0 and r["decay_ok"]
    assert r["empirical_rate"] >= 1.0 - 1e-9
    # a single-site observable decays exactly like e^{-t}
    gen = heat_bath_generator(ising_chain(3), 0.0)
    x = np.kron(Z, np.eye(4))
    sm = SemiNormSpec.site_max([2, 2, 2])
    for t in (0.5, 2.0):
        xt = semigroup_channel(gen, t).apply(x)
        assert seminorm_eval(sm, xt) == pytest.approx(math.exp(-t) * seminorm_eval(sm, x), abs=1e-12)


def test_gibbs_single_site(rng):
    ham = LocalHamiltonian(1, 2, (((0,), Z),))
    for beta in (0.0, 0.7):
        r = gibbs_contraction_certificate(ham, beta, rng=rng, samples=3)
        assert r["kappa"] == 0.0 and r["status"] == "certified"
