"""Named Hermitian metric fields, scalar fields and closed (1,1)-forms.

Every model is an evaluator from coordinate jets ``(z, zbar)`` to a jet.
Working from coordinate jets rather than from a point means a model can be
pulled back along a holomorphic change of coordinates by feeding it
different coordinate jets (see :func:`linear_pullback`).

Conventions:

* ``g[i, j]`` stores ``g_{i jbar}``; ``omega = sqrt(-1) g_{i jbar} dz^i ^ dzbar^j``.
* ``sqrt(-1) ddbar u`` has components ``d_i dbar_j u``.
* Fubini-Study: ``g_{i jbar} = d_i dbar_j log(1 + |z|^2)``.
* Hopf: ``g_{i jbar} = 4 delta_ij / |z|^2``.
* Hyperbolic ball: ``g_{i jbar} = -d_i dbar_j log(1 - |z|^2)``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .jets import Jet, JetError, coordinate_jets, ddbar, get_basis, jeinsum

HOPF_MIN_NORM2 = 1e-8
HOPF_SHELL = (0.5, 2.0)

EvalFn = Callable[[Jet, Jet], Jet]


class ModelError(ValueError):
    """Unknown model name or invalid parameters."""


class DomainError(ValueError):
    """Point outside the chart domain of a model."""


def _truncate_all(jets, order):
    return [j.truncate(order) for j in jets]


@dataclass(frozen=True, eq=False)
class ScalarFieldModel:
    """A scalar function given by an evaluator on coordinate jets."""

    name: str
    dim: int
    evaluate: EvalFn
    loss: int = 0
    real: bool = True
    params: dict = field(default_factory=dict)

    def jet(self, point, order: int = 4) -> Jet:
        z, zb = coordinate_jets(point, order + self.loss)
        return self.evaluate(z, zb).truncate(order)

    def __call__(self, point) -> complex:
        return self.jet(point, 0).value


@dataclass(frozen=True, eq=False)
class OneOneFormModel:
    """A Hermitian (1,1)-form field ``rho[i, j] = rho_{i jbar}``."""

    name: str
    dim: int
    evaluate: EvalFn
    loss: int = 0
    closed: bool = False
    params: dict = field(default_factory=dict)

    def jet(self, point, order: int = 4) -> Jet:
        z, zb = coordinate_jets(point, order + self.loss)
        return self.evaluate(z, zb).truncate(order)

    def __call__(self, point) -> np.ndarray:
        return self.jet(point, 0).value


@dataclass(frozen=True, eq=False)
class MetricModel:
    """A chart-level Hermitian metric field.

    ``evaluate(z, zbar)`` returns the jet of ``g_{i jbar}`` with order
    ``coords order - loss``.  ``domain`` and ``sample`` describe where the
    model is valid and where random points are drawn.
    """

    name: str
    dim: int
    evaluate: EvalFn
    loss: int = 0
    params: dict = field(default_factory=dict)
    seed: int | None = None
    domain: Callable[[np.ndarray], bool] = lambda z: True
    sample: Callable[[np.random.Generator], np.ndarray] | None = None
    kahler: bool = False
    # Q_{i jbar k lbar} = Q_{k lbar i jbar} is expected (LCK with potential or Kahler)
    q_symmetric: bool = False
    potential: ScalarFieldModel | None = None
    potential_scale: float | None = None
    base: "MetricModel | None" = None
    conformal_factor: ScalarFieldModel | None = None

    def is_valid(self, point) -> bool:
        z = np.asarray(point, dtype=complex)
        return z.shape == (self.dim,) and bool(self.domain(z))

    def jet(self, point, order: int = 4) -> Jet:
        point = np.asarray(point, dtype=complex)
        if not self.is_valid(point):
            raise DomainError(f"point {point.tolist()} is outside the domain of {self.name}")
        z, zb = coordinate_jets(point, order + self.loss)
        return self.evaluate(z, zb).truncate(order)

    def __call__(self, point) -> np.ndarray:
        return self.jet(point, 0).value

    def sample_points(self, count: int, seed: int) -> list[np.ndarray]:
        rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5EED]))
        sampler = self.sample or (lambda r: _polydisk(r, self.dim, 0.5))
        return [sampler(rng) for _ in range(count)]

    def spec(self) -> dict:
        """JSON-serialisable record ``{name, dim, params, seed}``."""
        return {"name": self.name, "dim": self.dim, "params": self.params, "seed": self.seed}


# -- sampling helpers -------------------------------------------------------


def _complex_normal(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def _polydisk(rng, n, radius):
    r = radius * np.sqrt(rng.random(n))
    return r * np.exp(2j * np.pi * rng.random(n))


def _ball(rng, n, radius):
    v = _complex_normal(rng, n)
    v /= np.linalg.norm(v)
    return radius * rng.random() ** (1 / (2 * n)) * v


def hopf_domain_check(point) -> bool:
    """Valid iff ``|z|^2`` is at least the exclusion threshold around the origin."""
    z = np.asarray(point, dtype=complex)
    return float(np.vdot(z, z).real) >= HOPF_MIN_NORM2


def _shell(rng, n, lo=HOPF_SHELL[0], hi=HOPF_SHELL[1]):
    v = _complex_normal(rng, n)
    v /= np.linalg.norm(v)
    return rng.uniform(lo, hi) * v


def _norm2(z: Jet, zb: Jet) -> Jet:
    return (z * zb).sum()


def _outer(zb: Jet, z: Jet) -> Jet:
    return jeinsum("i,j->ij", zb, z)


# -- scalar fields ----------------------------------------------------------


def _poly_scalar(dim, seed, degree=3, amplitude=0.3):
    """A seeded real polynomial ``u = Re(sum c z^a zbar^b)`` with 1 <= deg <= degree."""
    exps = _poly_exponents(dim, degree)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xF1E1D]))
    c = amplitude * _complex_normal(rng, len(exps)) / np.sqrt(len(exps))

    def ev(z, zb):
        mono = _monomials(z, zb, exps)
        u = jeinsum("m,m->", mono, c)
        return 0.5 * (u + u.conj())

    return ev


SCALAR_FIELDS = {
    "zero": lambda n, seed: lambda z, zb: 0.0 * z[0],
    "const": lambda n, seed: lambda z, zb: 0.0 * z[0] + 0.7,
    "abs2": lambda n, seed: _norm2,
    "one_plus_abs2": lambda n, seed: lambda z, zb: 1.0 + _norm2(z, zb),
    "log_abs2": lambda n, seed: lambda z, zb: _norm2(z, zb).log(),
    "z1z1bar": lambda n, seed: lambda z, zb: z[0] * zb[0],
    "re_z1": lambda n, seed: lambda z, zb: 0.5 * (z[0] + zb[0]),
    "re_z1sq_z2bar": lambda n, seed: lambda z, zb: 0.5 * (z[0] * z[0] * zb[1] + zb[0] * zb[0] * z[1]),
    "poly_random": lambda n, seed: _poly_scalar(n, 0 if seed is None else seed),
}


def scalar_field(name: str, dim: int, seed: int | None = None) -> ScalarFieldModel:
    if name not in SCALAR_FIELDS:
        raise ModelError(f"unknown scalar field {name!r}; choose from {sorted(SCALAR_FIELDS)}")
    if name == "re_z1sq_z2bar" and dim < 2:
        raise ModelError("re_z1sq_z2bar needs dim >= 2")
    params = {"seed": seed} if name == "poly_random" else {}
    return ScalarFieldModel(name, dim, SCALAR_FIELDS[name](dim, seed), params=params)


def _rho_eval(rho0, u: ScalarFieldModel, scale):
    total_loss = u.loss + 2

    def ev(z, zb):
        order = z.order - total_loss
        if order < 0:
            raise JetError(f"potential needs jet order >= {total_loss}, got {z.order}")
        h = ddbar(u.evaluate(z, zb)).truncate(order)
        return h * scale + rho0

    return ev


def rho_from_potential(rho0, u: ScalarFieldModel, scale: float = 1.0) -> OneOneFormModel:
    """``rho_{i jbar} = rho0_{i jbar} + scale * d_i dbar_j u``; closed by construction."""
    rho0 = np.zeros((u.dim, u.dim)) if rho0 is None else np.asarray(rho0, dtype=complex)
    if rho0.shape != (u.dim, u.dim):
        raise ModelError("rho0 has the wrong shape")
    if not np.allclose(rho0, rho0.conj().T, atol=1e-14):
        raise ModelError("rho0 must be Hermitian")
    return OneOneFormModel(
        f"rho[{u.name}]",
        u.dim,
        _rho_eval(rho0, u, scale),
        loss=u.loss + 2,
        closed=True,
        params={"potential": u.name, "scale": scale, "rho0": rho0.tolist() if rho0.any() else 0},
    )


# -- metric constructors ----------------------------------------------------


def flat(n: int) -> MetricModel:
    eye = np.eye(n)
    return MetricModel(
        "flat", n, lambda z, zb: 0.0 * _outer(zb, z) + eye,
        sample=lambda r: _polydisk(r, n, 1.0), kahler=True, q_symmetric=True,
    )


def fubini_study(n: int) -> MetricModel:
    eye = np.eye(n)

    def ev(z, zb):
        w = (1.0 + _norm2(z, zb)).reciprocal()
        return eye * w - _outer(zb, z) * (w * w)

    return MetricModel(
        "fubini_study", n, ev, sample=lambda r: _ball(r, n, 2.0), kahler=True, q_symmetric=True,
    )


def hyperbolic_ball(n: int) -> MetricModel:
    """Complex hyperbolic metric on the unit ball (negative bisectional curvature)."""
    eye = np.eye(n)

    def ev(z, zb):
        w = (1.0 - _norm2(z, zb)).reciprocal()
        return eye * w + _outer(zb, z) * (w * w)

    return MetricModel(
        "hyperbolic_ball", n, ev,
        domain=lambda z: float(np.vdot(z, z).real) < 0.99,
        sample=lambda r: _ball(r, n, 0.8), kahler=True, q_symmetric=True,
    )


def hopf(n: int) -> MetricModel:
    if n < 2:
        raise ModelError("hopf needs dim >= 2")
    eye4 = 4.0 * np.eye(n)

    def ev(z, zb):
        return _norm2(z, zb).reciprocal() * eye4

    return MetricModel(
        "hopf", n, ev, domain=hopf_domain_check, sample=lambda r: _shell(r, n),
        q_symmetric=True, potential=scalar_field("abs2", n), potential_scale=4.0,
    )


def lck_potential(n: int, potential: str = "abs2", c: float = 1.0) -> MetricModel:
    """``g = c * phi^-1 ddbar phi`` for a positive potential ``phi``."""
    phi = scalar_field(potential, n)
    if potential not in ("abs2", "one_plus_abs2"):
        raise ModelError("lck_potential supports potentials 'abs2' and 'one_plus_abs2'")

    def ev(z, zb):
        p = phi.evaluate(z, zb)
        h = ddbar(p)
        return h * (p.truncate(h.order).reciprocal() * c)

    domain = hopf_domain_check if potential == "abs2" else (lambda z: True)
    sampler = (lambda r: _shell(r, n)) if potential == "abs2" else (lambda r: _ball(r, n, 1.5))
    return MetricModel(
        "lck_potential", n, ev, loss=2, params={"potential": potential, "c": c},
        domain=domain, sample=sampler, q_symmetric=True, potential=phi, potential_scale=c,
    )


def conformal(base: MetricModel, f: ScalarFieldModel) -> MetricModel:
    """``e^f g_base``."""
    if f.dim != base.dim:
        raise ModelError("conformal factor and base have different dimensions")
    loss = max(base.loss, f.loss)

    def ev(z, zb):
        order = z.order - loss
        gb, fb = _truncate_all([base.evaluate(z, zb), f.evaluate(z, zb)], order)
        return gb * fb.exp()

    return MetricModel(
        "conformal", base.dim, ev, loss=loss,
        params={"base": base.spec(), "f": f.name, **({"f_seed": f.params["seed"]} if "seed" in f.params else {})},
        domain=base.domain, sample=base.sample, q_symmetric=base.kahler and f.name in ("zero", "const"),
        kahler=base.kahler and f.name in ("zero", "const"),
        base=base, conformal_factor=f,
    )


def product(m1: MetricModel, m2: MetricModel) -> MetricModel:
    """Block-diagonal metric on concatenated coordinates."""
    n1, n = m1.dim, m1.dim + m2.dim
    loss = max(m1.loss, m2.loss)

    def ev(z, zb):
        order = z.order - loss
        g1 = m1.evaluate(z[:n1], zb[:n1]).truncate(order)
        g2 = m2.evaluate(z[n1:], zb[n1:]).truncate(order)
        coeffs = np.zeros((n, n, g1.basis.size), complex)
        coeffs[:n1, :n1] = g1.coeffs
        coeffs[n1:, n1:] = g2.coeffs
        return Jet(coeffs, g1.basis, g1.base_point)

    def sampler(r):
        s1 = m1.sample or (lambda q: _polydisk(q, m1.dim, 0.5))
        s2 = m2.sample or (lambda q: _polydisk(q, m2.dim, 0.5))
        return np.concatenate([s1(r), s2(r)])

    return MetricModel(
        "product", n, ev, loss=loss, params={"factors": [m1.spec(), m2.spec()]},
        domain=lambda z: m1.domain(z[:n1]) and m2.domain(z[n1:]), sample=sampler,
        kahler=m1.kahler and m2.kahler, q_symmetric=m1.kahler and m2.kahler,
    )


def _poly_exponents(dim, degree):
    basis = get_basis(2 * dim, degree)
    return basis.exponents[1:]


def _monomials(z: Jet, zb: Jet, exps: np.ndarray) -> Jet:
    """Jet of all monomials ``z^a zbar^b`` listed in ``exps`` (rows of length 2n)."""
    coords = Jet.stack([z[i] for i in range(z.shape[0])] + [zb[i] for i in range(zb.shape[0])])
    cache = {}
    one = 0.0 * coords[0] + 1.0

    def mono(e):
        key = tuple(e)
        if key in cache:
            return cache[key]
        if not any(key):
            return one
        v = int(np.nonzero(e)[0][-1])
        lower = np.array(e)
        lower[v] -= 1
        out = mono(lower) * coords[v]
        cache[key] = out
        return out

    return Jet.stack([mono(e) for e in exps])


def polynomial_random(n: int, degree: int = 3, seed: int = 0, amplitude: float = 0.05) -> MetricModel:
    """``delta_ij`` plus a seeded Hermitian polynomial perturbation.

    Coefficients are normalised so every entry is bounded by 1 on the unit
    polydisk; the Gershgorin radius ``amplitude * n`` must stay below 1.
    """
    if not 1 <= degree <= 3:
        raise ModelError("polynomial_random supports degree 1..3")
    exps = _poly_exponents(n, degree)
    swap = np.concatenate([exps[:, n:], exps[:, :n]], axis=1)
    index = {tuple(e): k for k, e in enumerate(exps)}
    swap_idx = np.array([index[tuple(e)] for e in swap])
    rng = np.random.default_rng(np.random.SeedSequence([seed, n, degree]))
    raw = rng.standard_normal((len(exps), n, n)) + 1j * rng.standard_normal((len(exps), n, n))
    coef = raw + raw[swap_idx].conj().transpose(0, 2, 1)
    coef /= np.abs(coef).sum(axis=0).max()
    gersh = amplitude * np.abs(coef).sum(axis=0).sum(axis=1).max()
    if gersh >= 1.0:
        raise ModelError(
            f"perturbation not guaranteed positive definite (Gershgorin radius {gersh:.3f} >= 1)"
        )
    eye = np.eye(n)

    def ev(z, zb):
        mono = _monomials(z, zb, exps)
        return jeinsum("m,mij->ij", mono, amplitude * coef) + eye

    return MetricModel(
        "polynomial_random", n, ev, params={"degree": degree, "amplitude": amplitude}, seed=seed,
        domain=lambda z: bool(np.all(np.abs(z) <= 1.0)), sample=lambda r: _polydisk(r, n, 0.5),
    )


def linear_pullback(base: MetricModel, A) -> MetricModel:
    """Metric in coordinates ``w`` with ``z = A w``: ``g'_{a bbar} = A_ia conj(A_jb) g_{i jbar}``."""
    A = np.asarray(A, dtype=complex)
    Ab = A.conj()

    def ev(w, wb):
        z = jeinsum("ia,a->i", A, w)
        zb = jeinsum("ia,a->i", Ab, wb)
        return jeinsum("ia,jb,ij->ab", A, Ab, base.evaluate(z, zb))

    return MetricModel(
        "linear_pullback", base.dim, ev, loss=base.loss,
        params={"base": base.spec(), "A": [[[v.real, v.imag] for v in row] for row in A]},
        domain=lambda w: base.domain(A @ w), kahler=base.kahler, q_symmetric=base.q_symmetric,
    )


# -- registry ---------------------------------------------------------------

CATALOG = (
    "flat", "fubini_study", "hopf", "conformal", "product", "polynomial_random",
    "lck_potential", "hyperbolic_ball",
)


def catalog_get(name: str, dim: int | None = None, params: dict | None = None, seed: int | None = None) -> MetricModel:
    """Build a model from its name, dimension, parameters and seed."""
    params = dict(params or {})
    if name not in CATALOG:
        raise ModelError(f"unknown model {name!r}; choose from {list(CATALOG)}")
    if name == "product":
        factors = params.get("factors")
        if not factors or len(factors) != 2:
            raise ModelError("product needs params.factors = [spec, spec]")
        return product(from_spec(factors[0]), from_spec(factors[1]))
    if name == "conformal":
        base = params.get("base", "flat")
        base_model = from_spec(base) if isinstance(base, dict) else catalog_get(base, dim)
        if base_model.dim is None:
            raise ModelError("conformal needs a dimension")
        fseed = params.get("f_seed", seed)
        return conformal(base_model, scalar_field(params.get("f", "zero"), base_model.dim, fseed))
    if dim is None or int(dim) < 1:
        raise ModelError(f"model {name!r} needs a positive dimension")
    dim = int(dim)
    if dim > 4:
        raise ModelError("dimensions above 4 are not supported")
    try:
        if name == "flat":
            return flat(dim)
        if name == "fubini_study":
            return fubini_study(dim)
        if name == "hyperbolic_ball":
            return hyperbolic_ball(dim)
        if name == "hopf":
            return hopf(dim)
        if name == "lck_potential":
            return lck_potential(dim, params.get("potential", "abs2"), float(params.get("c", 1.0)))
        return polynomial_random(
            dim, int(params.get("degree", 3)), 0 if seed is None else int(seed),
            float(params.get("amplitude", 0.05)),
        )
    except TypeError as exc:  # bad parameter types from JSON
        raise ModelError(str(exc)) from exc


def from_spec(spec: dict | str) -> MetricModel:
    """Inverse of :meth:`MetricModel.spec`; also accepts a JSON string."""
    if isinstance(spec, str):
        spec = json.loads(spec)
    if not isinstance(spec, dict) or "name" not in spec:
        raise ModelError("model spec must be an object with a 'name'")
    return catalog_get(spec["name"], spec.get("dim"), spec.get("params"), spec.get("seed"))


def default_rho(model: MetricModel, seed: int = 0) -> tuple[OneOneFormModel, bool]:
    """A closed (1,1)-form for identity checks, and whether its trace is constant.

    Constant trace holds by construction for: flat with a trace-free
    potential, Kahler models with ``rho = omega``, and Hopf-type models with
    ``rho = ddbar log |z|^2``.
    """
    n = model.dim
    if model.name == "flat":
        if n >= 2:
            return rho_from_potential(np.eye(n), scalar_field("re_z1sq_z2bar", n)), True
        return rho_from_potential(np.eye(n), scalar_field("zero", n)), True
    if model.name == "fubini_study":
        return omega_form(model), True
    if model.name == "hopf" or (model.name == "lck_potential" and model.params.get("potential") == "abs2"):
        return rho_from_potential(None, scalar_field("log_abs2", n)), True
    return rho_from_potential(None, scalar_field("poly_random", n, seed)), False


def omega_form(model: MetricModel) -> OneOneFormModel:
    """The fundamental form of ``model`` viewed as a (1,1)-form field; closed iff Kahler."""
    return OneOneFormModel(f"omega[{model.name}]", model.dim, model.evaluate, loss=model.loss,
                           closed=model.kahler)
