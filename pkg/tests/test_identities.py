import numpy as np
import pytest

from qtensor.catalog import (
    conformal, default_rho, flat, fubini_study, hopf, hyperbolic_ball, lck_potential, omega_form,
    polynomial_random, rho_from_potential, scalar_field,
)
from qtensor.identities import (
    PreconditionError, bochner_residual, check_bismut_metric, check_bismut_two_routes, check_bochner,
    check_commutation_identity, check_conformal_lemma, check_eigenspace_torsion, check_kahler_reduction,
    check_q_bismut_proposition, check_q_symmetry, eigenspace_torsion_check, g_eigenframe,
)
from qtensor.tensors import Geometry

NON_KAHLER = [hopf(2), hopf(3), polynomial_random(2, 3, 1), polynomial_random(3, 2, 2),
              conformal(fubini_study(2), scalar_field("poly_random", 2, 3))]


@pytest.mark.parametrize("model", NON_KAHLER, ids=lambda m: m.name)
def test_structural_identities(model):
    pts = model.sample_points(4, 0)
    for check in (check_q_bismut_proposition, check_bismut_two_routes, check_bismut_metric):
        rep = check(model, pts)
        assert rep.passed and rep.max_residual < 1e-9 and rep.n_points == 4


def test_report_json_shape():
    rep = check_q_bismut_proposition(hopf(2), hopf(2).sample_points(2, 0))
    out = rep.to_json()
    assert set(out) >= {"identity", "model", "n_points", "max_residual", "tolerance", "pass", "worst"}
    assert out["model"] == {"name": "hopf", "dim": 2, "params": {}, "seed": None}


def test_kahler_reduction():
    for m in (flat(3), fubini_study(2), hyperbolic_ball(2)):
        assert check_kahler_reduction(m, m.sample_points(5, 1)).passed
    rep = check_kahler_reduction(hopf(2), hopf(2).sample_points(3, 0))
    assert not rep.passed and rep.informational


def test_q_symmetry_expected_and_informational():
    for m in (hopf(2), hopf(3), lck_potential(2, "one_plus_abs2", 1.5)):
        assert check_q_symmetry(m, m.sample_points(5, 2)).passed
    rep = check_q_symmetry(polynomial_random(2, 3, 3), polynomial_random(2, 3, 3).sample_points(5, 3))
    assert rep.informational and rep.max_residual > 1e-6


def test_q_bismut_identity_needs_the_pair_swap():
    geo = Geometry(hopf(2).jet([0.8, 0.5j], 2))
    # the (2,3,0,1) transpose matters: without it the identity fails on a non-symmetric model
    geo_p = Geometry(polynomial_random(2, 3, 4, 0.2).jet([0.2, 0.1], 2))
    assert np.abs(geo_p.q - (geo_p.bismut_direct + geo_p.ddbar_omega)).max() > 1e-6
    assert np.abs(geo.q - (geo.bismut_direct.transpose(2, 3, 0, 1) + geo.ddbar_omega)).max() < 1e-12


def test_hopf_is_pluriclosed_and_bismut_flat():
    geo = Geometry(hopf(2).jet([0.9, -0.4 + 0.2j], 2))
    assert np.abs(geo.ddbar_omega).max() < 1e-12
    assert np.abs(geo.bismut_direct).max() < 1e-12
    assert np.abs(geo.q).max() < 1e-12


@pytest.mark.parametrize("base", [flat(2), fubini_study(2), fubini_study(3)], ids=lambda m: f"{m.name}{m.dim}")
@pytest.mark.parametrize("fname", ["re_z1", "poly_random", "z1z1bar"])
def test_conformal_closed_form(base, fname):
    f = scalar_field(fname, base.dim, 5)
    assert check_conformal_lemma(base, f, base.sample_points(3, 4)).passed


def test_conformal_closed_form_needs_kahler_base():
    with pytest.raises(PreconditionError):
        check_conformal_lemma(hopf(2), scalar_field("re_z1", 2), hopf(2).sample_points(1, 0))


@pytest.mark.parametrize("model", [flat(2), hopf(2), fubini_study(2), polynomial_random(2, 3, 6)],
                         ids=lambda m: m.name)
def test_commutation_identity(model):
    rho, _ = default_rho(model, 1)
    assert check_commutation_identity(model, rho, model.sample_points(3, 5)).passed


def test_commutation_identity_is_sensitive():
    # a wrong sign in any curvature term would break this on a curved non-Kahler model
    model = polynomial_random(2, 3, 6, 0.3)
    rho = rho_from_potential(None, scalar_field("poly_random", 2, 2))
    rep = check_commutation_identity(model, rho, model.sample_points(3, 5))
    assert rep.passed and rep.max_residual < 1e-12


@pytest.mark.parametrize("model", [flat(2), flat(3), fubini_study(2), hopf(2), hopf(3)], ids=lambda m: f"{m.name}{m.dim}")
def test_bochner(model):
    rho, const = default_rho(model, 0)
    assert const
    rep = check_bochner(model, rho, model.sample_points(3, 1))
    assert rep.passed and not rep.notes


def test_bochner_terms_vanish_for_omega_on_kahler():
    m = fubini_study(2)
    t = bochner_residual(m, omega_form(m), m.sample_points(1, 0)[0])
    assert abs(t.lhs) < 1e-12 and abs(t.rhs) < 1e-12


def test_bochner_preconditions():
    m = polynomial_random(2, 3, 1)
    rho, const = default_rho(m)
    assert not const
    with pytest.raises(PreconditionError):
        bochner_residual(m, rho, m.sample_points(1, 0)[0])
    with pytest.raises(PreconditionError):
        bochner_residual(m, omega_form(m), m.sample_points(1, 0)[0])  # omega of a non-Kahler metric is not closed


def test_eigenspace_torsion_on_hopf():
    m = hopf(2)
    rho, _ = default_rho(m)
    assert check_eigenspace_torsion(m, rho, m.sample_points(5, 1)).passed


def test_eigenspace_torsion_requires_parallel_form():
    m = polynomial_random(2, 3, 1)
    rho, _ = default_rho(m)
    with pytest.raises(PreconditionError):
        check_eigenspace_torsion(m, rho, m.sample_points(1, 0))


def test_eigenframe_is_orthonormal_and_diagonalises():
    m = hopf(3)
    p = m.sample_points(1, 2)[0]
    rho, _ = default_rho(m)
    g, r = m(p), rho(p)
    lam, E = g_eigenframe(g, r)
    assert np.allclose(np.einsum("ia,jb,ij->ab", E, E.conj(), g), np.eye(3))
    assert np.allclose(np.einsum("ia,jb,ij->ab", E, E.conj(), r), np.diag(lam))
    rep = eigenspace_torsion_check(g, Geometry(m.jet(p, 2)).torsion.low, r)
    assert rep.value < 1e-10
