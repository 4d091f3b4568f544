import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qtensor.catalog import flat, fubini_study, hopf, hyperbolic_ball, polynomial_random, product
from qtensor.identities import PreconditionError
from qtensor.positivity import (
    NOT_A_PROOF, FrameDataError, certify_point, deflated_min_eig, haar_unitaries, haar_unitary,
    orthonormal_frame, q_nonneg_certify, qob_check_kahler, quadratic_form_matrix, s_direct,
    transform_to_frame, vaisman_reduction_bound, witness_value,
)
from qtensor.tensors import Geometry


def pair_tensor(q):
    """Rank-4 tensor whose only nonzero entries are ``Q_{m mbar k kbar} = q[k, m]``."""
    n = len(q)
    Q = np.zeros((n,) * 4, complex)
    for k in range(n):
        for m in range(n):
            Q[m, m, k, k] = q[k, m]
    return Q


def random_pd(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return A @ A.conj().T + n * np.eye(n)


# -- frames -----------------------------------------------------------------


def test_frame_of_scaled_identity():
    fd = orthonormal_frame(4 * np.eye(2))
    assert np.allclose(fd.E, 0.5 * np.eye(2))


@pytest.mark.parametrize("seed", range(5))
def test_frames_are_orthonormal(seed):
    g = random_pd(3, seed)
    U = haar_unitary(3, seed)
    F = orthonormal_frame(g, U).F
    assert np.abs(np.einsum("ia,jb,ij->ab", F, F.conj(), g) - np.eye(3)).max() < 1e-12
    F1 = orthonormal_frame(np.eye(3), U).F
    assert np.allclose(F1, U) and np.abs(F1.conj().T @ F1 - np.eye(3)).max() < 1e-12


def test_frame_rejects_indefinite_metric():
    with pytest.raises(ValueError, match="positive definite"):
        orthonormal_frame(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        orthonormal_frame(np.eye(2), np.ones((2, 2)))


def test_haar_unitaries_properties():
    rng = np.random.default_rng(0)
    U = haar_unitaries(3, 500, rng)
    assert np.abs(np.conj(np.swapaxes(U, 1, 2)) @ U - np.eye(3)).max() < 1e-12
    assert abs(abs(haar_unitary(1, 4)[0, 0]) - 1) < 1e-12
    assert np.array_equal(haar_unitary(3, 7), haar_unitary(3, 7))
    # first-moment check of Haar measure: E|U_11|^2 = 1/n
    assert abs(np.mean(np.abs(U[:, 0, 0]) ** 2) - 1 / 3) < 0.05


def test_transform_composition():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((3,) * 4) + 1j * rng.standard_normal((3,) * 4)
    F1, F2 = haar_unitary(3, 1) * 1.3, haar_unitary(3, 2)
    lhs = transform_to_frame(transform_to_frame(X, F1), F2)
    assert np.abs(lhs - transform_to_frame(X, F1 @ F2)).max() < 1e-12
    assert np.array_equal(transform_to_frame(X, np.eye(3)), X)


# -- quadratic form --------------------------------------------------------------


def test_quadratic_form_two_by_two():
    qf = quadratic_form_matrix(pair_tensor(np.array([[0.0, 1.0], [1.0, 0.0]])))
    assert np.allclose(qf.M, [[1, -1], [-1, 1]])
    assert np.allclose(np.linalg.eigvalsh(qf.M), [0, 2])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 4))
def test_matrix_form_matches_direct_sum(seed, n):
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((n, n))
    Q = pair_tensor(q)
    M = quadratic_form_matrix(Q).M
    assert np.array_equal(M, M.T)
    for lam in rng.standard_normal((100, n)):
        direct = s_direct(Q, lam)
        assert abs(lam @ M @ lam - direct) <= 1e-12 * max(1.0, abs(direct))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.integers(2, 4))
def test_null_direction_for_symmetric_pairs(seed, n):
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((n, n))
    q = q + q.T
    qf = quadratic_form_matrix(pair_tensor(q))
    assert np.abs(qf.M @ np.ones(n)).max() < 1e-12
    lam = rng.standard_normal(n)
    eq5 = 0.5 * np.sum(q * (lam[:, None] - lam[None, :]) ** 2)
    assert abs(s_direct(pair_tensor(q), lam) - eq5) < 1e-12 * max(1, abs(eq5))


def test_imaginary_pairs_rejected():
    Q = pair_tensor(np.zeros((2, 2)))
    Q[0, 0, 1, 1] = 1j
    with pytest.raises(FrameDataError):
        quadratic_form_matrix(Q)


def test_deflation_batch_and_trivial_dimension():
    M = np.array([[[1.0, -1.0], [-1.0, 1.0]], [[2.0, -2.0], [-2.0, 2.0]]])
    vals, vecs = deflated_min_eig(M)
    assert np.allclose(vals, [2, 4])
    assert np.allclose(np.abs(vecs), 1 / np.sqrt(2))
    assert deflated_min_eig(np.zeros((1, 1)))[0] == 0


def test_injected_negative_pairs_give_witness():
    Q = pair_tensor(np.array([[0.0, -1.0], [-1.0, 0.0]]))
    res = certify_point(np.eye(2), Q, None, 0, np.random.default_rng(0))
    assert res.violated
    lam = res.lam / np.abs(res.lam).max()
    assert np.allclose(np.abs(lam), [1, 1]) and lam[0] * lam[1] < 0
    assert s_direct(transform_to_frame(Q, res.frame), res.lam) < -1


def test_asymmetric_pairs_are_not_hidden_by_deflation():
    # q = [[0,1],[0,0]] gives S = l1^2 - l1 l2, negative at (1, 2), yet M is positive on the hyperplane
    Q = pair_tensor(np.array([[0.0, 1.0], [0.0, 0.0]]))
    assert deflated_min_eig(quadratic_form_matrix(Q).M)[0] > 0
    assert s_direct(Q, [1.0, 2.0]) < 0
    res = certify_point(np.eye(2), Q, None, 0, np.random.default_rng(0))
    assert res.violated and s_direct(Q, res.lam) < 0


# -- certificates ---------------------------------------------------------------


def test_flat_certificate():
    cert = q_nonneg_certify(flat(2), flat(2).sample_points(3, 0), n_frames=50)
    assert cert.min_eigenvalue == 0 and cert.verdict == "no-violation-found"
    assert cert.to_json()["note"] == NOT_A_PROOF


def test_hopf_certificate_small():
    m = hopf(3)
    cert = q_nonneg_certify(m, m.sample_points(5, 1), n_frames=100, seed=3)
    assert not cert.violated and cert.min_eigenvalue >= -1e-8


def test_hyperbolic_violation_reproduces():
    m = hyperbolic_ball(2)
    pts = m.sample_points(4, 0)
    cert = q_nonneg_certify(m, pts, n_frames=20, seed=5)
    assert cert.violated
    assert witness_value(m, cert.witness) < -cert.tol
    again = q_nonneg_certify(m, pts, n_frames=20, seed=5)
    assert again.to_json() == cert.to_json()


def test_seed_changes_frames_not_verdict():
    m = hopf(2)
    pts = m.sample_points(3, 0)
    a = q_nonneg_certify(m, pts, n_frames=10, seed=1)
    b = q_nonneg_certify(m, pts, n_frames=10, seed=2)
    assert a.verdict == b.verdict == "no-violation-found"


def test_qob_fubini_study_and_products():
    fs = fubini_study(2)
    cert = qob_check_kahler(fs, fs.sample_points(10, 0), n_frames=100)
    assert not cert.violated and cert.min_eigenvalue > 1.0
    pr = product(fubini_study(1), fubini_study(1))
    assert not qob_check_kahler(pr, pr.sample_points(10, 0), n_frames=100).violated
    assert qob_check_kahler(flat(3), flat(3).sample_points(2, 0), n_frames=10).min_eigenvalue == 0


def test_qob_requires_kahler():
    with pytest.raises(PreconditionError):
        qob_check_kahler(hopf(2), hopf(2).sample_points(1, 0), n_frames=5)


def test_frame_invariance_of_hopf_pairs():
    # Q-nonnegativity of Hopf does not depend on which orthonormal frame E starts from
    m = hopf(3)
    p = m.sample_points(1, 0)[0]
    geo = Geometry(m.jet(p, 2))
    V = haar_unitary(3, 9)
    r1 = certify_point(geo.g, geo.q, geo.torsion.low, 30, np.random.default_rng(1))
    E = orthonormal_frame(geo.g).E @ V
    Qf = transform_to_frame(geo.q, E)
    r2 = certify_point(np.eye(3), Qf, np.einsum("ia,jb,kc,ijk->abc", E, E, E.conj(), geo.torsion.low), 30, np.random.default_rng(1))
    assert not r1.violated and not r2.violated


# -- Vaisman reduction -------------------------------------------------------------


def test_vaisman_bound_at_axis_point():
    bounds = vaisman_reduction_bound(hopf(3), np.array([1, 0, 0], complex))
    assert all(b.ok for b in bounds)
    for b in bounds:
        assert abs(b.value - b.predicted) < 1e-12  # dropped terms vanish for m != k at this point
    assert {round(b.value, 12) for b in bounds} == {0.0, 4.0}


def test_vaisman_bound_on_hopf_surface():
    m = hopf(2)
    for p in m.sample_points(5, 2):
        for b in vaisman_reduction_bound(m, p):
            assert b.ok
            assert abs(b.value) < 1e-12  # Q = 0 and the flat cover has R = 0


def test_non_symmetric_model_witness_reevaluates():
    m = polynomial_random(2, 3, 0)
    cert = q_nonneg_certify(m, m.sample_points(20, 0), n_frames=200)
    assert cert.violated
    assert witness_value(m, cert.witness) == pytest.approx(cert.min_eigenvalue, rel=1e-9)
