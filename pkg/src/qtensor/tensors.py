"""Pointwise Chern/Bismut tensors from a metric jet.

Array conventions (all indices are chart indices, barred ones noted):

* ``g[i, j] = g_{i jbar}``; ``ginv[p, q] = g^{p qbar}``.
* ``gamma[k, i, j] = Gamma^j_{ki} = g^{j mbar} d_k g_{i mbar}``.
* ``torsion.up[i, j, k] = T^k_{ij}``, ``torsion.low[i, j, k] = T_{i j kbar}``.
* rank-4 tensors ``X[i, j, k, l] = X_{i jbar k lbar}``.
* ``bismut.hol[i, k, l] = A^l_{ik}``, ``bismut.antihol[j, k, l] = A^l_{jbar k}``.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .jets import Jet, JetError, jeinsum


def inverse_metric(g: Jet) -> Jet:
    """Jet of ``g^{p qbar}`` (so that ``g^{p qbar} g_{i qbar} = delta``)."""
    return g.inv().transpose(1, 0)


def _require_order(jet: Jet, order: int, what: str) -> None:
    if jet.order < order:
        raise JetError(f"{what} needs a jet of order >= {order}, got {jet.order}")


@dataclass(frozen=True)
class ConnectionCoeffs:
    gamma: np.ndarray


@dataclass(frozen=True)
class TorsionTensor:
    up: np.ndarray
    low: np.ndarray


@dataclass(frozen=True)
class BismutCoeffs:
    hol: np.ndarray
    antihol: np.ndarray


@dataclass(frozen=True)
class ConnectionJets:
    """Jets of connection coefficients on ``T^{1,0}``.

    ``nabla_i X^l = d_i X^l + hol[i, k, l] X^k`` and
    ``nabla_{ibar} X^l = dbar_i X^l + antihol[i, k, l] X^k``.
    """

    hol: Jet
    antihol: Jet


@dataclass(frozen=True)
class LeeData:
    theta: np.ndarray  # theta_i = -d_i log phi
    theta_bar: np.ndarray  # theta_{ibar} = -dbar_i log phi
    norm2: float  # |d log phi|^2 measured with phi^-1 ddbar phi
    scale: float | None = None  # c with g = c phi^-1 ddbar phi, when a metric is given


class Geometry:
    """All pointwise tensors of a metric jet, computed lazily.

    ``g`` needs order >= 1 for connection and torsion data and >= 2 for
    curvature data.
    """

    def __init__(self, g: Jet):
        if len(g.shape) != 2 or g.shape[0] != g.shape[1] or g.shape[0] != g.dim:
            raise JetError(f"metric jet must have shape (n, n) with n = {g.dim}")
        _require_order(g, 1, "connection data")
        self.g_jet = g
        self.n = g.dim

    @functools.cached_property
    def g(self) -> np.ndarray:
        return self.g_jet.value

    @functools.cached_property
    def ginv_jet(self) -> Jet:
        return inverse_metric(self.g_jet)

    @functools.cached_property
    def ginv(self) -> np.ndarray:
        return self.ginv_jet.value

    @functools.cached_property
    def dg_jet(self) -> Jet:
        """``[k, i, j] = d_k g_{i jbar}``."""
        return self.g_jet.grad()

    @functools.cached_property
    def gamma_jet(self) -> Jet:
        k = self.g_jet.order - 1
        return jeinsum("jm,kim->kij", self.ginv_jet.truncate(k), self.dg_jet)

    @functools.cached_property
    def gamma(self) -> np.ndarray:
        return self.gamma_jet.value

    @functools.cached_property
    def torsion_low_jet(self) -> Jet:
        dg = self.dg_jet
        return dg - dg.transpose(1, 0, 2)

    @functools.cached_property
    def torsion(self) -> TorsionTensor:
        up = self.gamma - self.gamma.transpose(1, 0, 2)
        low = self.torsion_low_jet.value
        return TorsionTensor(up=up, low=low)

    @functools.cached_property
    def chern_jets(self) -> ConnectionJets:
        gam = self.gamma_jet
        return ConnectionJets(hol=gam, antihol=gam.zeros_like(gam.shape))

    @functools.cached_property
    def bismut_jets(self) -> ConnectionJets:
        k = self.g_jet.order - 1
        hol = self.gamma_jet.transpose(1, 0, 2)
        antihol = jeinsum("lq,jqk->jkl", self.ginv_jet.truncate(k), self.torsion_low_jet.conj())
        return ConnectionJets(hol=hol, antihol=antihol)

    @functools.cached_property
    def bismut(self) -> BismutCoeffs:
        return BismutCoeffs(hol=self.bismut_jets.hol.value, antihol=self.bismut_jets.antihol.value)

    # -- curvature ----------------------------------------------------------

    def _need_curvature(self):
        _require_order(self.g_jet, 2, "curvature")

    @functools.cached_property
    def chern_up_jet(self) -> Jet:
        """``[i, j, k, l] = R_{i jbar k}^l = -dbar_j Gamma^l_{ik}``."""
        self._need_curvature()
        return -self.gamma_jet.gradbar().transpose(1, 0, 2, 3)

    @functools.cached_property
    def chern_up(self) -> np.ndarray:
        return self.chern_up_jet.value

    @functools.cached_property
    def chern_jet(self) -> Jet:
        up = self.chern_up_jet
        return jeinsum("ml,ijkm->ijkl", self.g_jet.truncate(up.order), up)

    @functools.cached_property
    def chern(self) -> np.ndarray:
        return self.chern_jet.value

    @functools.cached_property
    def q(self) -> np.ndarray:
        return q_tensor(self.ginv, self.chern, self.torsion.low)

    @functools.cached_property
    def bismut_direct(self) -> np.ndarray:
        self._need_curvature()
        hol, anti = self.bismut_jets.hol, self.bismut_jets.antihol
        d_anti = anti.grad().value  # [i, j, m, k] = d_i A^k_{jbar m}
        dbar_hol = hol.gradbar().value  # [j, i, m, k] = dbar_j A^k_{im}
        Ah, Aa = hol.value, anti.value
        up = (
            d_anti
            - dbar_hol.transpose(1, 0, 2, 3)
            + np.einsum("ilk,jml->ijmk", Ah, Aa)
            - np.einsum("jlk,iml->ijmk", Aa, Ah)
        )
        return np.einsum("kp,ijmk->ijmp", self.g, up)

    @functools.cached_property
    def bismut_closed_form(self) -> np.ndarray:
        return bismut_from_chern(self.ginv, self.chern, self.torsion)

    @functools.cached_property
    def d2g(self) -> np.ndarray:
        """``[a, b, p, q] = d_a dbar_b g_{p qbar}``."""
        self._need_curvature()
        return self.dg_jet.gradbar().value.transpose(1, 0, 2, 3)

    @functools.cached_property
    def ddbar_omega(self) -> np.ndarray:
        d2 = self.d2g
        return (
            d2.transpose(0, 3, 2, 1)  # d_lbar d_i g_{k jbar}: [i, l, k, j] -> [i, j, k, l]
            - d2.transpose(2, 3, 0, 1)  # d_lbar d_k g_{i jbar}: [k, l, i, j]
            - d2  # d_jbar d_i g_{k lbar}
            + d2.transpose(2, 1, 0, 3)  # d_jbar d_k g_{i lbar}: [k, j, i, l]
        )


# -- functional interface ---------------------------------------------------


def chern_connection(g_jet: Jet) -> ConnectionCoeffs:
    return ConnectionCoeffs(Geometry(g_jet).gamma)


def torsion(g_jet: Jet) -> TorsionTensor:
    return Geometry(g_jet).torsion


def chern_curvature(g_jet: Jet) -> np.ndarray:
    return Geometry(g_jet).chern


def q_tensor(ginv: np.ndarray, R: np.ndarray, T_low) -> np.ndarray:
    """``Q_{i jbar k lbar} = R_{i jbar k lbar} - g^{p qbar} T_{k p jbar} conj(T_{l q ibar})``."""
    if isinstance(T_low, TorsionTensor):
        T_low = T_low.low
    return R - np.einsum("pq,kpj,lqi->ijkl", ginv, T_low, T_low.conj())


def bismut_coeffs(g_jet: Jet) -> BismutCoeffs:
    return Geometry(g_jet).bismut


def bismut_curvature_direct(g_jet: Jet) -> np.ndarray:
    return Geometry(g_jet).bismut_direct


def bismut_from_chern(ginv: np.ndarray, R: np.ndarray, T: TorsionTensor) -> np.ndarray:
    """Closed form of the (1,1)-part of the Bismut curvature in Chern data."""
    return (
        R.transpose(2, 1, 0, 3)  # R_{k jbar i lbar}
        - R
        + R.transpose(0, 3, 2, 1)  # R_{i lbar k jbar}
        - np.einsum("kig,jlg->ijkl", T.low, T.up.conj())
        - np.einsum("gh,igl,jhk->ijkl", ginv, T.low, T.low.conj())
    )


def bismut_curvature_lemma(g: np.ndarray, R: np.ndarray, T: TorsionTensor) -> np.ndarray:
    return bismut_from_chern(np.linalg.inv(g).T, R, T)


def ddbar_omega_block(g_jet: Jet) -> np.ndarray:
    return Geometry(g_jet).ddbar_omega


def covariant_derivative(tensor: Jet, signature: str, conn: ConnectionJets) -> tuple[Jet, Jet]:
    """Covariant derivatives of a tensor with lower indices of the given types.

    ``signature`` has one letter per tensor axis: ``u`` (unbarred) or ``b``
    (barred).  Barred slots are acted on by the conjugate coefficients.
    Returns ``(nabla, nabla_bar)`` as jets with the derivative index first.
    """
    if len(signature) != len(tensor.shape) or set(signature) - {"u", "b"}:
        raise JetError(f"signature {signature!r} does not describe a tensor of shape {tensor.shape}")
    order = min(tensor.order - 1, conn.hol.order)
    if order < 0:
        raise JetError("tensor jet must have order >= 1")
    hol = conn.hol.truncate(order)
    anti = conn.antihol.truncate(order)
    hol_c, anti_c = hol.conj(), anti.conj()
    X = tensor.truncate(order + 1)
    nab = X.grad().truncate(order)
    nab_bar = X.gradbar().truncate(order)
    X = X.truncate(order)
    letters = "abcdefgh"[: len(signature)]
    for pos, kind in enumerate(signature):
        src = letters[:pos] + "m" + letters[pos + 1:]
        spec_ = f"x{letters[pos]}m,{src}->x{letters}"
        if kind == "u":
            nab = nab - jeinsum(spec_, hol, X)
            nab_bar = nab_bar - jeinsum(spec_, anti, X)
        else:
            nab = nab - jeinsum(spec_, anti_c, X)
            nab_bar = nab_bar - jeinsum(spec_, hol_c, X)
    return nab, nab_bar


def lee_data(phi, point, metric=None, order: int = 2) -> LeeData:
    """Lee-form data of the potential ``phi`` at ``point``.

    If ``metric`` is given it must equal ``c phi^-1 ddbar phi`` at the point;
    ``c`` is returned in :attr:`LeeData.scale`.
    """
    from .catalog import DomainError  # circular at import time otherwise

    p = phi.jet(point, max(order, 2))
    p0 = p.value.real
    if p0 <= 0:
        raise DomainError(f"potential must be positive, got {p0:.3e}")
    dp = p.grad().value
    dpb = p.gradbar().value
    h = np.array([[p.partial(_unit(p.dim, i), _unit(p.dim, j)) for j in range(p.dim)] for i in range(p.dim)]) / p0
    hinv = np.linalg.inv(h).T
    a, b = dp / p0, dpb / p0
    norm2 = np.einsum("pq,p,q->", hinv, a, b)
    scale = None
    if metric is not None:
        gv = metric(point)
        scale = float(np.real(np.trace(gv) / np.trace(h)))
        if not np.allclose(gv, scale * h, rtol=1e-10, atol=1e-12):
            raise ValueError("metric is not a constant multiple of phi^-1 ddbar phi")
    return LeeData(theta=-a, theta_bar=-b, norm2=float(norm2.real), scale=scale)


def _unit(n, i):
    e = [0] * n
    e[i] = 1
    return e


def rel_residual(a: np.ndarray, b: np.ndarray) -> float:
    """``max|a - b| / max(1, max|a|, max|b|)``."""
    scale = max(1.0, float(np.max(np.abs(a), initial=0.0)), float(np.max(np.abs(b), initial=0.0)))
    return float(np.max(np.abs(a - b), initial=0.0)) / scale
