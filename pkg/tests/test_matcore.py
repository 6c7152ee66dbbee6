import numpy as np
import pytest
import scipy.linalg as sla

from qcurv.errors import DimensionError, PreconditionError
from qcurv.matcore import (
    apply_superop, as_matrix, choi_from_superop, commutator_superop, embed, herm_eig,
    hermitian_basis, lr_superop, mat_exp, op_norm, partial_trace, pinv_on_support,
    psd_function, random_density, random_hermitian, random_unitary, superop_from_choi,
    superop_from_function, support_projector, trace_norm, unvec, vec, DensityState,
)

X = np.array([[0, 1], [1, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)


def test_op_norm_examples(rng):
    assert op_norm(np.eye(4)) == pytest.approx(1.0)
    assert op_norm(X) == pytest.approx(1.0)
    M = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    assert abs(op_norm(M) - np.linalg.svd(M, compute_uv=False)[0]) <= 1e-10


def test_empty_matrix_rejected():
    with pytest.raises(DimensionError):
        as_matrix(np.zeros((0, 0)))


def test_herm_eig_examples(rng):
    w, _ = herm_eig(Z)
    assert np.allclose(w, [-1, 1])
    w, _ = herm_eig(np.eye(2) / 2)
    assert np.allclose(w, [0.5, 0.5])
    H = random_hermitian(6, rng)
    w, U = herm_eig(H)
    assert abs(w.sum() - np.trace(H).real) <= 1e-12
    assert np.allclose(U @ np.diag(w) @ U.conj().T, H, atol=1e-12)
    with pytest.raises(PreconditionError):
        herm_eig(np.array([[0, 1], [0, 0]], dtype=complex))


def test_mat_exp_against_squaring(rng):
    L = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
    t = 0.7
    E = sla.expm(t * L / 1024)
    for _ in range(10):
        E = E @ E
    assert np.abs(mat_exp(t * L) - E).max() <= 1e-8


def test_mat_exp_unitary_for_skew_hermitian(rng):
    H = random_hermitian(6, rng)
    U = mat_exp(-1j * H)
    assert np.abs(U.conj().T @ U - np.eye(6)).max() <= 1e-13


def test_partial_trace_of_state(rng):
    rho = random_density(4, rng)
    r = partial_trace(rho, [2, 2], [0])
    assert abs(np.trace(r) - 1) <= 1e-12
    assert np.linalg.eigvalsh(r).min() >= -1e-12
    A, B = random_density(2, rng), random_density(3, rng)
    assert np.allclose(partial_trace(np.kron(A, B), [2, 3], [1]), B)
    with pytest.raises(DimensionError):
        partial_trace(rho, [2, 3], [0])


def test_embed_places_factor(rng):
    A = random_hermitian(2, rng)
    full = embed(A, [1], [2, 2, 2])
    assert np.allclose(full, np.kron(np.kron(np.eye(2), A), np.eye(2)))


def test_pinv_and_support(rng):
    G = rng.normal(size=(5, 3)) + 1j * rng.normal(size=(5, 3))
    M = G @ G.conj().T
    Mp = pinv_on_support(M)
    assert np.linalg.matrix_rank(Mp, tol=1e-8) == 3
    P = support_projector(M)
    assert np.allclose(M @ Mp, P, atol=1e-9)
    assert np.allclose(P @ P, P, atol=1e-12)
    assert np.allclose(pinv_on_support(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    assert np.allclose(pinv_on_support(np.eye(3)), np.eye(3))
    with pytest.raises(PreconditionError):
        pinv_on_support(np.diag([1.0, -1.0]))


def test_vec_convention(rng):
    A, B, Xm = (rng.normal(size=(3, 3)) for _ in range(3))
    assert np.allclose(lr_superop(A, B) @ vec(Xm), vec(A @ Xm @ B))
    assert np.allclose(unvec(vec(Xm)), Xm)
    assert np.allclose(apply_superop(commutator_superop(A), Xm), A @ Xm - Xm @ A)


def test_choi_roundtrip(rng):
    U = random_unitary(3, rng)
    S = lr_superop(U.conj().T, U)
    J = choi_from_superop(S)
    assert np.allclose(superop_from_choi(J, 3, 3), S)
    assert np.linalg.eigvalsh(J).min() >= -1e-12


def test_superop_from_function_matches(rng):
    A = rng.normal(size=(3, 3))
    S = superop_from_function(lambda x: A @ x @ A.T, 3)
    assert np.allclose(S, lr_superop(A, A.T))


def test_hermitian_basis_orthonormal():
    B = hermitian_basis(3)
    G = np.einsum("aij,bji->ab", B, B)
    assert np.allclose(G, np.eye(9))
    assert all(np.allclose(b, b.conj().T) for b in B)


def test_density_state_validation():
    DensityState(np.eye(2) / 2)
    with pytest.raises(PreconditionError):
        DensityState(np.eye(2))
    with pytest.raises(PreconditionError):
        DensityState(np.diag([1.5, -0.5]))


def test_trace_norm_and_psd_function(rng):
    H = random_hermitian(5, rng)
    assert trace_norm(H) == pytest.approx(np.abs(np.linalg.eigvalsh(H)).sum())
    S = psd_function(H @ H, np.sqrt)
    assert np.allclose(S @ S, H @ H, atol=1e-9)
