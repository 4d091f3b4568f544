"""Monte Carlo certification of Q-nonnegativity.

For an orthonormal frame the condition reads ``S(lambda) >= 0`` for all real
``lambda``, with ``S(lambda) = sum_{k,m} Q_{m mbar k kbar}(lambda_k^2 - lambda_k lambda_m)``.
``S`` is the quadratic form of ``M = diag(d) - (q + q^T)/2`` where
``q[k, m] = Re Q_{m mbar k kbar}`` and ``d_k = sum_m q[k, m]``.  The vector
``(1, ..., 1)`` is always in the kernel of ``M``, so the minimum eigenvalue is
taken on its orthogonal complement.

Sampling finitely many frames cannot prove nonnegativity; a certificate
without violation only records that none was found.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .catalog import DomainError, MetricModel
from .identities import KAHLER_TOL, PreconditionError, orthonormal_basis
from .tensors import Geometry

DEFAULT_TOL = 1e-8
IMAG_TOL = 1e-10
NOT_A_PROOF = (
    "Monte Carlo evidence over sampled orthonormal frames; absence of a violation is not a proof"
)


class FrameDataError(ValueError):
    """Quadratic-form entries that should be real are not (upstream frame bug)."""


@dataclass(frozen=True)
class FrameData:
    E: np.ndarray  # base orthonormal frame, columns are frame vectors
    U: np.ndarray
    F: np.ndarray  # E @ U


@dataclass(frozen=True)
class QuadraticFormMatrix:
    M: np.ndarray
    q: np.ndarray


@dataclass
class PositivityCertificate:
    model: dict
    seed: int
    n_points: int
    n_frames: int
    tol: float
    min_eigenvalue: float
    verdict: str
    witness: dict | None = None
    note: str = NOT_A_PROOF
    points: list = field(default_factory=list)
    kind: str = "q_nonneg"

    def to_json(self) -> dict:
        out = {
            "kind": self.kind,
            "model": self.model,
            "seed": self.seed,
            "n_points": self.n_points,
            "n_frames": self.n_frames,
            "tol": self.tol,
            "min_eigenvalue": self.min_eigenvalue,
            "verdict": self.verdict,
            "note": self.note,
            "points": self.points,
        }
        if self.witness is not None:
            out["witness"] = self.witness
        return out

    @property
    def violated(self) -> bool:
        return self.verdict != "no-violation-found"


def orthonormal_frame(g: np.ndarray, U: np.ndarray | None = None) -> FrameData:
    """Frame ``F = E U`` with ``F^i_a conj(F^j_b) g_{i jbar} = delta_ab``.

    ``E`` is the inverse conjugate transpose of a Cholesky factor of ``g^T``.
    """
    g = np.asarray(g, dtype=complex)
    n = g.shape[0]
    lam_min = float(np.linalg.eigvalsh(0.5 * (g + g.conj().T))[0])
    if lam_min <= 0:
        raise ValueError(f"metric is not positive definite (min eigenvalue {lam_min:.3e})")
    U = np.eye(n, dtype=complex) if U is None else np.asarray(U, dtype=complex)
    if np.abs(U.conj().T @ U - np.eye(n)).max() > 1e-12:
        raise ValueError("U is not unitary")
    E = orthonormal_basis(g)
    return FrameData(E, U, E @ U)


def haar_unitaries(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """``count`` Haar-distributed unitaries: QR of complex Ginibre matrices with phase fix."""
    z = (rng.standard_normal((count, n, n)) + 1j * rng.standard_normal((count, n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    return q * (d / np.abs(d))[:, None, :]


def haar_unitary(n: int, seed) -> np.ndarray:
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return haar_unitaries(n, 1, rng)[0]


def transform_to_frame(X: np.ndarray, F: np.ndarray) -> np.ndarray:
    """``X'_{a bbar c dbar} = F^i_a conj(F^j_b) F^k_c conj(F^l_d) X_{i jbar k lbar}``."""
    Fc = F.conj()
    return np.einsum("ia,jb,kc,ld,ijkl->abcd", F, Fc, F, Fc, X, optimize=True)


def quadratic_form_matrix(Q_frame: np.ndarray, symmetric: bool = False) -> QuadraticFormMatrix:
    """Matrix of ``S(lambda)`` from the diagonal-pair entries ``Q_{m mbar k kbar}``.

    With ``symmetric`` the pair matrix is symmetrised first (the Kahler form
    ``sum q_km (lambda_k - lambda_m)^2 / 2``).
    """
    pairs = np.einsum("mmkk->km", Q_frame)
    scale = max(1.0, float(np.abs(pairs).max(initial=0.0)))
    if np.abs(pairs.imag).max(initial=0.0) > IMAG_TOL * scale:
        raise FrameDataError(
            f"Q_(m mbar k kbar) has imaginary part {np.abs(pairs.imag).max():.3e}; frame is not orthonormal?"
        )
    q = pairs.real
    if symmetric:
        q = 0.5 * (q + q.T)
    M = np.diag(q.sum(axis=1)) - 0.5 * (q + q.T)
    return QuadraticFormMatrix(M, q)


def s_direct(Q_frame: np.ndarray, lam: np.ndarray) -> float:
    """``sum_{k,m} Q_{m mbar k kbar}(lambda_k^2 - lambda_k lambda_m)`` evaluated literally."""
    lam = np.asarray(lam, dtype=float)
    pairs = np.einsum("mmkk->mk", Q_frame)
    return float(np.real(np.sum(pairs * (lam[None, :] ** 2 - lam[None, :] * lam[:, None]))))


def _hyperplane_basis(n: int) -> np.ndarray:
    """Orthonormal basis (n, n-1) of the complement of (1, ..., 1)."""
    ones = np.ones((n, 1)) / np.sqrt(n)
    q, _ = np.linalg.qr(np.hstack([ones, np.eye(n)[:, : n - 1]]))
    return q[:, 1:]


def deflated_min_eig(M: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Minimum eigenvalue of ``M`` (or a stack) on the complement of (1, ..., 1).

    Returns ``(values, vectors)``; for ``n = 1`` the value is 0.
    """
    M = np.asarray(M)
    n = M.shape[-1]
    if n == 1:
        return np.zeros(M.shape[:-2]), np.zeros(M.shape[:-2] + (1,))
    V = _hyperplane_basis(n)
    red = np.swapaxes(V, 0, 1) @ M @ V
    w, v = np.linalg.eigh(red)
    return w[..., 0], (V @ v[..., :, :1])[..., 0]


def frame_seed(seed: int, point_index: int) -> np.random.SeedSequence:
    """Per-point seed sequence derived from the master seed."""
    return np.random.SeedSequence([int(seed), int(point_index)])


def torsion_eigenframe(T_frame: np.ndarray) -> np.ndarray:
    """Eigenvectors of ``C[m, m'] = sum_{k,p} T_{k p mbar} conj(T_{k p m'bar})``."""
    C = np.einsum("kpm,kpn->mn", T_frame, T_frame.conj())
    _, V = np.linalg.eigh(0.5 * (C + C.conj().T))
    return V


@dataclass
class PointResult:
    min_eigenvalue: float
    scale: float
    frame: np.ndarray
    lam: np.ndarray
    violated: bool


def certify_point(g: np.ndarray, Q: np.ndarray, T_low: np.ndarray | None, n_frames: int,
                  rng: np.random.Generator, tol: float = DEFAULT_TOL, symmetric: bool = False) -> PointResult:
    """Search frames at one point for ``S(lambda) < -tol * max(1, ||M||)``."""
    n = g.shape[0]
    E = orthonormal_basis(g)
    units = [np.eye(n, dtype=complex)]
    if T_low is not None:
        Tf = np.einsum("ka,pb,mc,kpm->abc", E, E, E.conj(), T_low)
        units.append(torsion_eigenframe(Tf))
    U = np.concatenate([np.stack(units), haar_unitaries(n, n_frames, rng)]) if n_frames else np.stack(units)
    F = E[None] @ U
    # pair matrix P[f, k, m] = Q'_{m mbar k kbar} via P_f = W_f^T Qmat W_f
    W = np.einsum("fia,fja->fija", F, F.conj()).reshape(len(F), n * n, n)
    Qmat = Q.reshape(n * n, n * n)
    pairs = np.einsum("fAm,AB,fBk->fkm", W, Qmat, W, optimize=True)
    pscale = np.maximum(1.0, np.abs(pairs).max(axis=(1, 2)))
    if np.any(np.abs(pairs.imag).max(axis=(1, 2)) > IMAG_TOL * pscale):
        raise FrameDataError("imaginary diagonal-pair entries in an orthonormal frame")
    q = pairs.real
    if symmetric:
        q = 0.5 * (q + np.swapaxes(q, 1, 2))
    M = np.zeros_like(q)
    idx = np.arange(n)
    M[:, idx, idx] = q.sum(axis=2)
    M -= 0.5 * (q + np.swapaxes(q, 1, 2))
    mins, vecs = deflated_min_eig(M)
    w, v = np.linalg.eigh(M)
    norms = np.maximum(1.0, np.abs(w).max(axis=1))
    # (1,...,1) is null only when q has equal row and column sums (e.g. Q-symmetric models);
    # otherwise the form is indefinite along it and deflation would hide that
    leak = np.abs(M.sum(axis=2)).max(axis=1) > tol * norms
    mins = np.where(leak, w[:, 0], mins)
    vecs = np.where(leak[:, None], v[:, :, 0], vecs)
    rel = mins / norms
    k = int(np.argmin(rel))
    return PointResult(float(mins[k]), float(norms[k]), F[k], vecs[k], bool(mins[k] < -tol * norms[k]))


def _matrix_json(A: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(A, dtype=complex)]


def _point_json(p) -> list:
    return [[float(v.real), float(v.imag)] for v in np.asarray(p, dtype=complex)]


def _certify(model: MetricModel, points, n_frames, seed, tol, kind, use_chern) -> PositivityCertificate:
    best = None
    used = []
    for p in points:
        try:
            geo = Geometry(model.jet(p, 2))
        except DomainError:
            continue
        idx = len(used)  # frame seeds follow evaluated points so stored point lists replay exactly
        if use_chern:
            if np.abs(geo.torsion.low).max() > KAHLER_TOL * max(1.0, np.abs(geo.g).max()):
                raise PreconditionError(f"{model.name} is not Kahler")
            tensor, T = geo.chern, None
        else:
            tensor, T = geo.q, geo.torsion.low
        rng = np.random.default_rng(frame_seed(seed, idx))
        res = certify_point(geo.g, tensor, T, n_frames, rng, tol, symmetric=use_chern)
        used.append(_point_json(p))
        if best is None or res.min_eigenvalue / res.scale < best[1].min_eigenvalue / best[1].scale:
            best = (p, res)
    if best is None:
        raise DomainError("no valid points to certify")
    p, res = best
    cert = PositivityCertificate(
        model=model.spec(), seed=int(seed), n_points=len(used), n_frames=int(n_frames), tol=float(tol),
        min_eigenvalue=res.min_eigenvalue, verdict="no-violation-found", points=used, kind=kind,
    )
    if res.violated:
        cert.verdict = "violation"
        cert.witness = {
            "point": _point_json(p),
            "frame": _matrix_json(res.frame),
            "lambda": [float(v) for v in res.lam],
        }
    return cert


def q_nonneg_certify(model: MetricModel, points, n_frames: int = 1000, seed: int = 0,
                     tol: float = DEFAULT_TOL) -> PositivityCertificate:
    return _certify(model, points, n_frames, seed, tol, "q_nonneg", use_chern=False)


def qob_check_kahler(model: MetricModel, points, n_frames: int = 500, seed: int = 0,
                     tol: float = DEFAULT_TOL) -> PositivityCertificate:
    """Nonnegative quadratic orthogonal bisectional curvature of a Kahler model."""
    return _certify(model, points, n_frames, seed, tol, "qob", use_chern=True)


def witness_value(model: MetricModel, witness: dict) -> float:
    """Re-evaluate ``S(lambda)`` for a stored witness directly from Q."""
    p = np.array([complex(a, b) for a, b in witness["point"]])
    F = np.array([[complex(a, b) for a, b in row] for row in witness["frame"]])
    Q = Geometry(model.jet(p, 2)).q
    return s_direct(transform_to_frame(Q, F), np.array(witness["lambda"]))


@dataclass
class PairBound:
    m: int
    k: int
    value: float  # Q_{m mbar k kbar} - c phi^-1 R^{ddbar phi}_{m mbar k kbar}
    predicted: float  # c phi^-1 (1/phi - (|phi_k|^2 + |phi_m|^2)/phi^2)
    ok: bool


def vaisman_reduction_bound(model: MetricModel, point, frame: np.ndarray | None = None,
                            tol: float = 1e-9) -> list[PairBound]:
    """Per-pair lower bound on ``Q_{m mbar k kbar}`` for a metric ``c phi^-1 ddbar phi``.

    ``frame`` must be orthonormal for ``ddbar phi``; by default a Cholesky frame.
    """
    phi = model.potential
    if phi is None or model.potential_scale is None:
        raise PreconditionError(f"{model.name} is not built from a potential")
    c = model.potential_scale
    pj = phi.jet(point, 4)
    p0 = float(pj.value.real)
    from .jets import ddbar  # local: keeps the module header light

    hess_jet = ddbar(pj)
    hess = hess_jet.value
    base = Geometry(hess_jet)
    F = orthonormal_basis(hess) if frame is None else np.asarray(frame, dtype=complex)
    if np.abs(np.einsum("ia,jb,ij->ab", F, F.conj(), hess) - np.eye(len(F))).max() > 1e-10:
        raise PreconditionError("frame is not orthonormal for ddbar phi")
    Qf = transform_to_frame(Geometry(model.jet(point, 2)).q, F)
    Rf = transform_to_frame(base.chern, F)
    dphi = F.T @ pj.grad().value
    out = []
    n = len(F)
    for m in range(n):
        for k in range(n):
            if m == k:
                continue
            value = float((Qf[m, m, k, k] - c / p0 * Rf[m, m, k, k]).real)
            pred = c / p0 * (1 / p0 - (abs(dphi[k]) ** 2 + abs(dphi[m]) ** 2) / p0**2)
            out.append(PairBound(m, k, value, float(pred), value >= -tol))
    return out
