import math

import numpy as np
import pytest
from scipy.integrate import quad

from qcurv.channels import PAULI, PauliChannelSpec, pauli_channel, pauli_conditional_expectation
from qcurv.errors import DimensionError, InfiniteMetricError, PreconditionError
from qcurv.matcore import random_density, random_hermitian, trace_norm, vec
from qcurv.metrics import (
    DerivationStructure, SemiNormSpec, antisymmetric_projector, coupling_cost, jump,
    mean_superop, metric_tensor_norm, relative_entropy, seminorm_eval, singlet_projector, w1_dual,
)

X, Y, Z = PAULI["X"], PAULI["Y"], PAULI["Z"]
I2 = np.eye(2)
KET0 = np.diag([1.0, 0.0]).astype(complex)
KET1 = np.diag([0.0, 1.0]).astype(complex)


def all_specs():
    return [
        SemiNormSpec.operator_norm(4),
        SemiNormSpec.commutator_max([np.kron(Z, I2), np.kron(I2, X)]),
        SemiNormSpec.commutator_l2([np.kron(X, I2), np.kron(Z, Z)]),
        SemiNormSpec.oscillator([2, 2]),
        SemiNormSpec.site_max([2, 2]),
        SemiNormSpec.ornstein([2, 2]),
    ]


@pytest.mark.parametrize("spec", all_specs()[1:], ids=lambda s: s.variant)
def test_identity_has_zero_seminorm(spec):
    assert seminorm_eval(spec, np.eye(4)) <= 1e-9


def test_ornstein_example():
    assert seminorm_eval(SemiNormSpec.ornstein([2, 2]), np.kron(Z, I2)) == pytest.approx(1.0, abs=1e-7)


def test_commutator_example():
    assert seminorm_eval(SemiNormSpec.commutator_max([Z]), X) == pytest.approx(2.0)


def test_site_dims_must_factorize():
    with pytest.raises(DimensionError):
        SemiNormSpec("oscillator", 4, site_dims=(2, 3))


def test_dimension_mismatch():
    with pytest.raises(DimensionError):
        seminorm_eval(SemiNormSpec.operator_norm(2), np.eye(3))


def test_w1_identical_states(rng):
    r = random_density(4, rng)
    for spec in all_specs():
        assert w1_dual(spec, r, r).value == 0.0


def test_w1_operator_norm_is_trace_distance(rng):
    r1, r2 = random_density(3, rng), random_density(3, rng)
    res = w1_dual(SemiNormSpec.operator_norm(3), r1, r2)
    assert abs(res.value - trace_norm(r1 - r2)) <= 1e-7
    assert res.lower <= res.value + 1e-9 <= res.upper + 2e-9


def test_w1_infinite_on_kernel():
    res = w1_dual(SemiNormSpec.commutator_max([Z]), KET0, KET1)
    assert res.is_infinite and res.value == math.inf
    assert res.to_dict() == {"status": "infinite"}


def test_w1_witness_is_feasible(rng):
    spec = SemiNormSpec.commutator_max([X, Y, Z])
    r1, r2 = random_density(2, rng), random_density(2, rng)
    res = w1_dual(spec, r1, r2)
    assert seminorm_eval(spec, res.witness) <= 1 + 1e-9
    assert res.lower <= res.value + 1e-8
    assert res.value - res.lower <= 1e-6


def test_jump_examples(rng):
    spec = SemiNormSpec.commutator_max([X, Y, Z])
    dep = pauli_channel(PauliChannelSpec(1, (("I", 0.75), ("X", 0.25 / 3), ("Y", 0.25 / 3), ("Z", 0.25 / 3))))
    from qcurv.channels import identity_channel
    assert jump(spec, random_density(2, rng), identity_channel(2)).value == 0.0
    assert jump(spec, np.eye(2) / 2, dep).value <= 1e-9
    val = jump(spec, KET0, dep).value
    # grid lower bound over the dual feasible set
    best = 0.0
    delta = KET0 - dep.apply_adjoint(KET0)
    for _ in range(400):
        x = random_hermitian(2, rng)
        L = seminorm_eval(spec, x)
        best = max(best, float(np.real(np.trace(delta @ x))) / L)
    assert best <= val + 1e-8
    # Delta = Z / 6; the sup of Tr(Z x) / 6 over ||[A, x]|| <= 1 is attained at x = Z / 2
    assert val == pytest.approx(1 / 6, abs=1e-7)


def test_coupling_examples():
    phi = np.array([0.6, 0.8j])
    P = np.outer(phi, phi.conj())
    assert coupling_cost(antisymmetric_projector(2), P, P).value <= 1e-7
    assert coupling_cost(np.zeros((4, 4)), KET0, KET1).value == 0.0
    res = coupling_cost(singlet_projector(), KET0, KET1)
    assert abs(res.diagnostics["primal"] - res.diagnostics["dual"]) <= 1e-7
    # the only coupling of two pure states is the product |01><01|, with singlet weight 1/2
    assert res.value == pytest.approx(0.5, abs=1e-7)


def test_coupling_primal_dual_random(rng):
    C = random_density(4, rng) * 4
    r1, r2 = random_density(2, rng), random_density(2, rng)
    res = coupling_cost(C, r1, r2)
    assert abs(res.upper - res.lower) <= 1e-7


def test_mean_at_maximally_mixed():
    for kind in ("arithmetic", "logarithmic", "weighted_exponential"):
        ds = DerivationStructure([X], mean_kind=kind)
        assert np.abs(mean_superop(np.eye(3) / 3, ds) - np.eye(9) / 3).max() <= 1e-10


def test_log_mean_coefficient():
    rho = np.diag([0.75, 0.25])
    ds = DerivationStructure([X], mean_kind="logarithmic")
    M = mean_superop(rho, ds)
    E01 = np.zeros((2, 2)); E01[0, 1] = 1
    coeff = (M @ vec(E01))[2].real           # F-order: entry (0, 1) sits at index 2
    quadrature = quad(lambda s: 0.75 ** s * 0.25 ** (1 - s), 0, 1, epsabs=1e-14)[0]
    assert abs(coeff - quadrature) <= 1e-10
    assert coeff == pytest.approx(0.455120, abs=5e-7)


def test_weighted_mean_symmetry(rng):
    rho = random_density(3, rng)
    a = mean_superop(rho, DerivationStructure([X3 := np.eye(3)], [0.7], "weighted_exponential"))
    b = mean_superop(rho, DerivationStructure([X3], [-0.7], "weighted_exponential"))
    # swapping k and l corresponds to the adjoint map x -> (M x^dagger)^dagger
    x = rng.normal(size=(3, 3)) + 1j * rng.normal(size=(3, 3))
    ax = (a @ vec(x)).reshape(3, 3, order="F")
    bx = (b @ vec(x.conj().T)).reshape(3, 3, order="F")
    assert np.allclose(ax, bx.conj().T, atol=1e-12)


def test_metric_tensor_examples(rng):
    ds = DerivationStructure([X, Y, Z])
    rho = random_density(2, rng)
    assert metric_tensor_norm(np.zeros((2, 2)), rho, ds) == 0.0
    x = random_hermitian(2, rng)
    x -= np.trace(x) / 2 * np.eye(2)
    assert metric_tensor_norm(2.5 * x, rho, ds) == pytest.approx(2.5 * metric_tensor_norm(x, rho, ds))
    with pytest.raises(PreconditionError):
        metric_tensor_norm(np.eye(2), rho, ds)


def test_metric_tensor_infinite():
    ds = DerivationStructure([Z])
    with pytest.raises(InfiniteMetricError):
        metric_tensor_norm(Z, np.eye(2) / 2, ds)


def test_metric_tensor_classical_chain():
    p = np.array([0.5, 0.3, 0.2])
    rates = {(0, 1): 0.8, (1, 2): 1.3}
    gens = []
    for (i, j), a in rates.items():
        v = np.zeros((3, 3)); v[i, j] = a
        gens += [v, v.T]
    ds = DerivationStructure(gens, mean_kind="arithmetic")
    K = np.zeros((3, 3))
    for (i, j), a in rates.items():
        w = a * a * (p[i] + p[j])
        K[i, i] += w; K[j, j] += w; K[i, j] -= w; K[j, i] -= w
    h = np.array([0.4, -0.1, -0.3])
    oracle = math.sqrt(h @ np.linalg.pinv(K) @ h)
    assert abs(metric_tensor_norm(np.diag(h), np.diag(p), ds) - oracle) <= 1e-8


def test_relative_entropy_examples(rng):
    r = random_density(3, rng)
    assert relative_entropy(r, r) == pytest.approx(0.0, abs=1e-12)
    assert relative_entropy(KET0, np.eye(2) / 2) == pytest.approx(math.log(2), abs=1e-12)
    assert relative_entropy(np.eye(2) / 2, KET0) == math.inf


def test_relative_entropy_chain_rule(rng):
    spec = PauliChannelSpec(2, (("II", 0.6), ("XX", 0.4)))
    E = pauli_conditional_expectation(spec)
    rho = random_density(4, rng)
    sigma = E.apply_adjoint(random_density(4, rng))
    rE = E.apply_adjoint(rho)
    lhs = relative_entropy(rho, sigma)
    rhs = relative_entropy(rho, rE) + relative_entropy(rE, sigma)
    assert abs(lhs - rhs) <= 1e-9
    assert lhs >= 0.5 * trace_norm(rho - sigma) ** 2
