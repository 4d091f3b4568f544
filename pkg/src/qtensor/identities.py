"""Pointwise verification of the curvature identities.

Each ``check_*`` function samples a model at a list of points and returns an
:class:`IdentityReport` with the worst relative residual
``max|lhs - rhs| / max(1, max|lhs|, max|rhs|)``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .catalog import DomainError, MetricModel, OneOneFormModel, ScalarFieldModel, conformal
from .jets import Jet, JetError, ddbar, jeinsum
from .tensors import Geometry, covariant_derivative, rel_residual

DEFAULT_TOL = 1e-9
KAHLER_TOL = 1e-10


class PreconditionError(ValueError):
    """An identity was requested on inputs that violate its hypotheses."""


@dataclass
class IdentityReport:
    identity: str
    model: dict
    n_points: int
    max_residual: float
    tolerance: float
    passed: bool
    worst: dict | None = None
    informational: bool = False
    notes: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        out = asdict(self)
        out["pass"] = out.pop("passed")
        return out


def _point_json(p) -> list:
    return [[float(v.real), float(v.imag)] for v in np.asarray(p, dtype=complex)]


def _worst_index(a, b) -> list[int]:
    diff = np.abs(np.asarray(a) - np.asarray(b))
    if diff.size == 0:
        return []
    return [int(i) for i in np.unravel_index(int(np.argmax(diff)), diff.shape)]


class _Collector:
    """Accumulates per-point residuals in point order."""

    def __init__(self, identity, model, tol, informational=False):
        self.identity, self.model, self.tol = identity, model, tol
        self.informational = informational
        self.max = 0.0
        self.worst = None
        self.count = 0
        self.notes = []

    def add(self, point, lhs, rhs, residual=None):
        r = rel_residual(lhs, rhs) if residual is None else residual
        self.count += 1
        if self.worst is None or r > self.max:
            self.max = r
            self.worst = {"point": _point_json(point), "indices": _worst_index(lhs, rhs)}

    def skip(self, point, why):
        self.notes.append(f"skipped {_point_json(point)}: {why}")

    def report(self) -> IdentityReport:
        spec = self.model.spec() if isinstance(self.model, MetricModel) else self.model
        return IdentityReport(
            self.identity, spec, self.count, self.max, self.tol, self.max < self.tol,
            self.worst, self.informational, self.notes,
        )


def _geometries(model: MetricModel, points, order, col: _Collector):
    for p in points:
        try:
            yield p, Geometry(model.jet(p, order))
        except DomainError as exc:
            col.skip(p, str(exc))


def check_q_bismut_proposition(model: MetricModel, points, tol=DEFAULT_TOL) -> IdentityReport:
    """``Q_{i jbar k lbar} = B_{k lbar i jbar} + dbar_l T_{i k jbar} - dbar_j T_{i k lbar}``."""
    col = _Collector("proposition", model, tol)
    for p, geo in _geometries(model, points, 2, col):
        col.add(p, geo.q, geo.bismut_direct.transpose(2, 3, 0, 1) + geo.ddbar_omega)
    return col.report()


def check_bismut_two_routes(model: MetricModel, points, tol=DEFAULT_TOL) -> IdentityReport:
    """Bismut (1,1)-curvature from its connection vs. the closed form in Chern data."""
    col = _Collector("bismut_two_route", model, tol)
    for p, geo in _geometries(model, points, 2, col):
        col.add(p, geo.bismut_direct, geo.bismut_closed_form)
    return col.report()


def check_kahler_reduction(model: MetricModel, points, tol=KAHLER_TOL) -> IdentityReport:
    col = _Collector("kahler_reduction", model, tol, informational=not model.kahler)
    for p, geo in _geometries(model, points, 2, col):
        col.add(p, geo.q, geo.chern)
    return col.report()


def check_bismut_metric(model: MetricModel, points, tol=DEFAULT_TOL) -> IdentityReport:
    """Both Chern and Bismut connections are metric: ``nabla g = 0``."""
    col = _Collector("bismut_metric", model, tol)
    for p, geo in _geometries(model, points, 2, col):
        parts = []
        for conn in (geo.bismut_jets, geo.chern_jets):
            nab, nab_bar = covariant_derivative(geo.g_jet, "ub", conn)
            parts += [nab.value, nab_bar.value]
        parts = np.stack(parts)  # [bismut d, bismut dbar, chern d, chern dbar, ...]
        col.add(p, parts, np.zeros_like(parts))
    return col.report()


def check_q_symmetry(model: MetricModel, points, tol=DEFAULT_TOL) -> IdentityReport:
    """``Q_{i jbar k lbar} = Q_{k lbar i jbar}``; informational unless expected for the model."""
    col = _Collector("q_symmetry", model, tol, informational=not model.q_symmetric)
    for p, geo in _geometries(model, points, 2, col):
        col.add(p, geo.q, geo.q.transpose(2, 3, 0, 1))
    return col.report()


def conformal_q_closed_form(base_geo: Geometry, f_jet: Jet) -> np.ndarray:
    """Q of ``e^f g`` for Kahler ``g`` expressed through base curvature and ``f``."""
    G, R = base_geo.g, base_geo.chern
    ef = np.exp(f_jet.value)
    fi = f_jet.grad().value
    fib = f_jet.gradbar().value
    fij = ddbar(f_jet).value  # [i, j] = d_i dbar_j f
    norm2 = np.einsum("pq,p,q->", base_geo.ginv, fi, fib)
    return ef * (
        R
        - np.einsum("kl,ij->ijkl", G, fij)
        - np.einsum("k,l,ij->ijkl", fi, fib, G)
        - norm2 * np.einsum("kj,il->ijkl", G, G)
        + np.einsum("k,j,il->ijkl", fi, fib, G)
        + np.einsum("i,l,kj->ijkl", fi, fib, G)
    )


def check_conformal_lemma(base: MetricModel, f: ScalarFieldModel, points, tol=DEFAULT_TOL) -> IdentityReport:
    model = conformal(base, f)
    col = _Collector("conformal", model, tol)
    for p in points:
        try:
            base_geo = Geometry(base.jet(p, 2))
        except DomainError as exc:
            col.skip(p, str(exc))
            continue
        tmax = float(np.max(np.abs(base_geo.torsion.low)))
        if tmax > KAHLER_TOL * max(1.0, float(np.max(np.abs(base_geo.g)))):
            raise PreconditionError(f"base model {base.name} is not Kahler (|T| = {tmax:.3e})")
        closed = conformal_q_closed_form(base_geo, f.jet(p, 2))
        direct = Geometry(model.jet(p, 2)).q
        col.add(p, direct, closed)
    return col.report()


# -- identities involving a (1,1)-form ------------------------------------------


def _rho_jets(model: MetricModel, rho: OneOneFormModel, point, order):
    if not rho.closed:
        raise PreconditionError(f"{rho.name} is not closed")
    if rho.dim != model.dim:
        raise PreconditionError("form and metric have different dimensions")
    geo = Geometry(model.jet(point, order))
    return geo, rho.jet(point, order)


def commutation_sides(geo: Geometry, rho: Jet) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the Chern commutation identity for a closed (1,1)-form.

    ``nabla_i nabla_jbar rho_{k lbar}`` against ``nabla_lbar nabla_k rho_{i jbar}
    + T^m_{ki} nabla_lbar rho_{m jbar} + conj(T^m_{lj}) nabla_i rho_{k mbar}
    - R_{k lbar i}^m rho_{m jbar} + conj(R_{j ibar l}^m) rho_{k mbar}``,
    arrays indexed ``[i, j, k, l]``.
    """
    if geo.g_jet.order < 2 or rho.order < 2:
        raise JetError("commutation identity needs metric and form jets of order >= 2")
    conn = geo.chern_jets
    nab, nab_bar = covariant_derivative(rho, "ub", conn)  # [i,k,l], [j,k,l]
    lhs = covariant_derivative(nab_bar, "bub", conn)[0].value  # [i, j, k, l]
    second = covariant_derivative(nab, "uub", conn)[1].value  # [l, k, i, j]
    Tu, Rup = geo.torsion.up, geo.chern_up
    nb, nu, r = nab_bar.value, nab.value, rho.value
    rhs = (
        second.transpose(2, 3, 1, 0)
        + np.einsum("kim,lmj->ijkl", Tu, nb)
        + np.einsum("ljm,ikm->ijkl", Tu.conj(), nu)
        - np.einsum("klim,mj->ijkl", Rup, r)
        + np.einsum("jilm,km->ijkl", Rup.conj(), r)
    )
    return lhs, rhs


def check_commutation_identity(model: MetricModel, rho: OneOneFormModel, points, tol=1e-7) -> IdentityReport:
    col = _Collector("commutation", model, tol)
    for p in points:
        try:
            geo, rj = _rho_jets(model, rho, p, 2)
        except DomainError as exc:
            col.skip(p, str(exc))
            continue
        col.add(p, *commutation_sides(geo, rj))
    return col.report()


def orthonormal_basis(g: np.ndarray) -> np.ndarray:
    """``F`` with ``F^i_a conj(F^j_b) g_{i jbar} = delta_ab`` (columns are the frame)."""
    L = np.linalg.cholesky(g.T)
    return np.linalg.inv(L).conj().T


def trace(geo_ginv: np.ndarray, rho_value: np.ndarray) -> complex:
    return complex(np.einsum("ij,ij->", geo_ginv, rho_value))


@dataclass
class BochnerTerms:
    lhs: float
    grad_term: float  # |nabla^+ rho|^2
    q_term: float  # Q_{i jbar k lbar}(g^{i jbar}(rho^2)^{k lbar} - rho^{i jbar} rho^{k lbar})
    q_term_diagonal: float  # sum Q_{m mbar k kbar}(lambda_k^2 - lambda_k lambda_m) in an eigenframe
    residual: float

    @property
    def rhs(self) -> float:
        return 2 * self.grad_term + 2 * self.q_term


def bochner_terms(geo: Geometry, rho: Jet) -> BochnerTerms:
    if geo.g_jet.order < 2 or rho.order < 2:
        raise JetError("Bochner formula needs metric and form jets of order >= 2")
    H = geo.ginv_jet.truncate(2)
    r2 = rho.truncate(2)
    norm = jeinsum("pq,kl,kq,pl->", H, H, r2, r2)
    lhs = complex(np.einsum("ij,ij->", geo.ginv, ddbar(norm).value))

    nab_plus = covariant_derivative(rho, "ub", geo.bismut_jets)[0].value  # [i, k, l]
    F = orthonormal_basis(geo.g)
    framed = np.einsum("ia,kb,lc,ikl->abc", F, F, F.conj(), nab_plus)
    grad_term = float(np.sum(np.abs(framed) ** 2))

    Hv, r, Q = geo.ginv, rho.value, geo.q
    raised = np.einsum("ib,aj,ab->ij", Hv, Hv, r)
    sq = np.einsum("ac,dc,db->ab", r, Hv, r)
    sq_raised = np.einsum("ib,aj,ab->ij", Hv, Hv, sq)
    q_term = complex(
        np.einsum("ijkl,ij,kl->", Q, Hv, sq_raised) - np.einsum("ijkl,ij,kl->", Q, raised, raised)
    )

    # eigenframe of rho relative to g
    rho_f = np.einsum("ia,jb,ij->ab", F, F.conj(), r)
    lam, V = np.linalg.eigh(rho_f)
    E = F @ V.conj()
    Qf = np.einsum("ia,jb,kc,ld,ijkl->abcd", E, E.conj(), E, E.conj(), Q)
    qd = np.einsum("mmkk->mk", Qf).real
    q_diag = float(np.sum(qd * (lam[None, :] ** 2 - lam[None, :] * lam[:, None])))

    rhs = 2 * grad_term + 2 * q_term
    scale = max(1.0, abs(lhs), abs(rhs))
    return BochnerTerms(
        lhs=float(lhs.real), grad_term=grad_term, q_term=float(q_term.real),
        q_term_diagonal=q_diag, residual=abs(lhs - rhs) / scale,
    )


def trace_is_constant(model: MetricModel, rho: OneOneFormModel, point, h=1e-2, tol=1e-8) -> tuple[bool, float]:
    """Probe ``tr_g rho`` at 6 nearby points (three directions, both signs)."""
    point = np.asarray(point, dtype=complex)
    n = model.dim
    dirs = [np.eye(n)[0], 1j * np.eye(n)[0], np.ones(n) / np.sqrt(n)]

    def tr(p):
        return trace(np.linalg.inv(model(p)).T, rho(p))

    t0 = tr(point)
    spread = max(abs(tr(point + s * h * d) - t0) for d in dirs for s in (1, -1))
    return spread <= tol * max(1.0, abs(t0)), float(spread)


def bochner_residual(model: MetricModel, rho: OneOneFormModel, point) -> BochnerTerms:
    if not rho.closed:
        raise PreconditionError(f"{rho.name} is not closed")
    ok, spread = trace_is_constant(model, rho, point)
    if not ok:
        raise PreconditionError(f"trace of {rho.name} is not constant near the point (spread {spread:.3e})")
    geo, rj = _rho_jets(model, rho, point, 2)
    return bochner_terms(geo, rj)


def check_bochner(model: MetricModel, rho: OneOneFormModel, points, tol=1e-8) -> IdentityReport:
    col = _Collector("bochner", model, tol)
    for p in points:
        try:
            terms = bochner_residual(model, rho, p)
        except DomainError as exc:
            col.skip(p, str(exc))
            continue
        col.add(p, terms.lhs, terms.rhs, residual=terms.residual)
        # the index form must reduce to the eigenframe sum
        d = abs(terms.q_term - terms.q_term_diagonal) / max(1.0, abs(terms.q_term))
        if d > tol:
            col.notes.append(f"index/eigenframe Q-term discrepancy {d:.3e} at {_point_json(p)}")
    return col.report()


# -- eigenspace torsion ------------------------------------------------------


@dataclass
class EigenspaceTorsionReport:
    eigenvalues: list[float]
    value: float  # max |T_{k i mbar}(lambda_k + lambda_i - lambda_m)| in the eigenframe
    gauge_ambiguous: bool
    frame: np.ndarray


def g_eigenframe(g: np.ndarray, rho_value: np.ndarray):
    """g-orthonormal eigenframe of ``rho``: ascending eigenvalues, phase-fixed columns."""
    F = orthonormal_basis(g)
    rho_f = np.einsum("ia,jb,ij->ab", F, F.conj(), rho_value)
    if not np.allclose(rho_f, rho_f.conj().T, atol=1e-10 * max(1.0, np.abs(rho_f).max())):
        raise ValueError("rho is not Hermitian")
    lam, V = np.linalg.eigh(0.5 * (rho_f + rho_f.conj().T))
    E = F @ V.conj()
    for a in range(E.shape[1]):
        col = E[:, a]
        k = int(np.argmax(np.abs(col)))
        E[:, a] = col * (abs(col[k]) / col[k])
    return lam, E


def eigenspace_torsion_check(g: np.ndarray, T_low: np.ndarray, rho_value: np.ndarray) -> EigenspaceTorsionReport:
    lam, E = g_eigenframe(g, rho_value)
    Tf = np.einsum("ka,ib,mc,kim->abc", E, E, E.conj(), T_low)
    weight = lam[:, None, None] + lam[None, :, None] - lam[None, None, :]
    value = float(np.max(np.abs(Tf * weight), initial=0.0))
    gaps = np.diff(lam)
    ambiguous = bool(np.any(np.abs(gaps) < 1e-10))
    return EigenspaceTorsionReport(lam.tolist(), value, ambiguous, E)


def check_eigenspace_torsion(model: MetricModel, rho: OneOneFormModel, points, tol=1e-8,
                             parallel_tol=1e-8) -> IdentityReport:
    """Eigenspace torsion condition for a Bismut-parallel closed form.

    The form must satisfy ``nabla^+ rho = 0`` at every point; that is checked
    first and violations raise :class:`PreconditionError`.
    """
    col = _Collector("eigenspace_torsion", model, tol)
    for p in points:
        try:
            geo, rj = _rho_jets(model, rho, p, 1)
        except DomainError as exc:
            col.skip(p, str(exc))
            continue
        nab, nab_bar = covariant_derivative(rj, "ub", geo.bismut_jets)
        par = max(float(np.abs(nab.value).max()), float(np.abs(nab_bar.value).max()))
        if par > parallel_tol:
            raise PreconditionError(f"{rho.name} is not Bismut-parallel (|nabla^+ rho| = {par:.3e})")
        rep = eigenspace_torsion_check(geo.g, geo.torsion.low, rj.value)
        col.add(p, rep.value, 0.0, residual=rep.value)
    return col.report()


IDENTITIES = (
    "proposition", "bismut_two_route", "kahler_reduction", "bismut_metric", "q_symmetry",
    "commutation", "bochner", "conformal", "eigenspace_torsion",
)
