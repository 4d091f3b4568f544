import json

import numpy as np
import pytest

import oracle
from qtensor.catalog import (
    CATALOG, DomainError, ModelError, catalog_get, conformal, default_rho, flat, from_spec, fubini_study, hopf,
    hyperbolic_ball, lck_potential, linear_pullback, polynomial_random, product, scalar_field,
)

P2 = np.array([0.4 + 0.3j, -0.2 + 0.6j])


@pytest.mark.parametrize("model,closed", [(hopf(2), oracle.hopf_g), (fubini_study(2), oracle.fs_g), (flat(2), oracle.flat_g)])
def test_metric_values_match_closed_forms(model, closed):
    assert np.allclose(model(P2), closed(P2), atol=1e-14)


def test_metrics_are_hermitian_positive():
    for model in (hopf(3), fubini_study(3), polynomial_random(3, 3, 11), hyperbolic_ball(2), lck_potential(2)):
        for p in model.sample_points(5, 0):
            g = model(p)
            assert np.allclose(g, g.conj().T, atol=1e-14)
            assert np.linalg.eigvalsh(g)[0] > 0


def test_polynomial_random_is_seeded():
    a, b, c = polynomial_random(2, 3, 5), polynomial_random(2, 3, 5), polynomial_random(2, 3, 6)
    assert np.array_equal(a(P2 / 2), b(P2 / 2))
    assert not np.allclose(a(P2 / 2), c(P2 / 2))


def test_polynomial_random_rejects_large_amplitude():
    with pytest.raises(ModelError):
        polynomial_random(2, 3, 0, amplitude=5.0)


def test_hopf_domain():
    m = hopf(2)
    assert not m.is_valid([0, 0])
    with pytest.raises(DomainError):
        m.jet([0, 0], 2)
    with pytest.raises(ModelError):
        hopf(1)
    for p in m.sample_points(20, 3):
        assert 0.5 <= np.linalg.norm(p) <= 2.0


def test_sampling_is_deterministic():
    m = fubini_study(3)
    assert all(np.array_equal(a, b) for a, b in zip(m.sample_points(4, 9), m.sample_points(4, 9)))


def test_conformal_is_exponential_rescaling():
    f = scalar_field("re_z1", 2)
    m = conformal(fubini_study(2), f)
    assert np.allclose(m(P2), np.exp(P2[0].real) * oracle.fs_g(P2))


def test_product_is_block_diagonal():
    m = product(fubini_study(1), hopf(2))
    p = np.array([0.3, 1.0, 0.5j])
    g = m(p)
    assert np.allclose(g[:1, :1], oracle.fs_g(p[:1]))
    assert np.allclose(g[1:, 1:], oracle.hopf_g(p[1:]))
    assert np.allclose(g[:1, 1:], 0)


def test_linear_pullback_transforms_metric():
    A = np.array([[1.0, 0.5j], [0.2, 2.0 - 1j]])
    m = linear_pullback(fubini_study(2), A)
    w = np.array([0.1 + 0.1j, 0.2 - 0.1j])
    assert np.allclose(m(w), A.T @ oracle.fs_g(A @ w) @ A.conj())


def test_lck_potential_matches_hopf_up_to_scale():
    m = lck_potential(2, "abs2", 4.0)
    assert np.allclose(m(P2), hopf(2)(P2))


def test_spec_roundtrip():
    for m in (hopf(3), polynomial_random(2, 2, 4), conformal(flat(2), scalar_field("poly_random", 2, 8)),
              product(flat(1), hopf(2)), lck_potential(2, "one_plus_abs2", 2.0)):
        again = from_spec(json.dumps(m.spec()))
        p = m.sample_points(1, 0)[0]
        assert np.array_equal(again(p), m(p))


def test_catalog_errors():
    with pytest.raises(ModelError):
        catalog_get("nope", 2)
    with pytest.raises(ModelError):
        catalog_get("flat", 5)
    with pytest.raises(ModelError):
        catalog_get("flat")
    with pytest.raises(ModelError):
        scalar_field("nope", 2)
    assert set(CATALOG) >= {"flat", "fubini_study", "hopf", "conformal", "product", "polynomial_random"}


def test_default_rho_is_closed():
    for m in (flat(2), fubini_study(2), hopf(2), polynomial_random(2, 3, 1)):
        rho, _ = default_rho(m)
        assert rho.closed
        r = rho(m.sample_points(1, 0)[0])
        assert np.allclose(r, r.conj().T)
