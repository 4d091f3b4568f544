"""Sweep structural identities over random polynomial metrics of varying size and strength."""

import itertools
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from _config import parse
from qtensor import Geometry, ModelError, polynomial_random, rel_residual, rho_from_potential, scalar_field
from qtensor.identities import commutation_sides


@dataclass
class Config:
    """Worst residuals of the Q/Bismut identity, the two Bismut routes and the commutation identity."""

    dims: list = field(default_factory=lambda: [2, 3, 4])
    degrees: list = field(default_factory=lambda: [1, 2, 3])
    amplitudes: list = field(default_factory=lambda: [0.01, 0.05, 0.2])
    seeds: int = 20
    points: int = 3
    out: str = ""


def sweep(cfg: Config) -> list[dict]:
    rows = []
    for n, deg, amp in itertools.product(cfg.dims, cfg.degrees, cfg.amplitudes):
        worst = {"proposition": 0.0, "bismut_two_route": 0.0, "commutation": 0.0}
        used = 0
        for s in range(cfg.seeds):
            try:
                m = polynomial_random(n, deg, s, amp)
            except ModelError:  # amplitude too large for a guaranteed positive metric
                continue
            used += 1
            rho = rho_from_potential(None, scalar_field("poly_random", n, s))
            for p in m.sample_points(cfg.points, s):
                geo = Geometry(m.jet(p, 2))
                rhs = geo.bismut_direct.transpose(2, 3, 0, 1) + geo.ddbar_omega
                worst["proposition"] = max(worst["proposition"], rel_residual(geo.q, rhs))
                worst["bismut_two_route"] = max(worst["bismut_two_route"],
                                                rel_residual(geo.bismut_direct, geo.bismut_closed_form))
                worst["commutation"] = max(worst["commutation"], rel_residual(*commutation_sides(geo, rho.jet(p, 2))))
        rows.append({"dim": n, "degree": deg, "amplitude": amp, "models": used, **worst})
    return rows


if __name__ == "__main__":
    cfg = parse(Config)
    rows = sweep(cfg)
    print(f"{'n':>2} {'deg':>3} {'amp':>5} {'models':>6}  {'proposition':>11}  {'two-route':>10}  {'commutation':>11}")
    for r in rows:
        print(f"{r['dim']:>2} {r['degree']:>3} {r['amplitude']:>5} {r['models']:>6}  {r['proposition']:>11.2e}"
              f"  {r['bismut_two_route']:>10.2e}  {r['commutation']:>11.2e}")
    if not np.all([max(r["proposition"], r["bismut_two_route"]) < 1e-9 for r in rows if r["models"]]):
        print("some residual exceeded 1e-9")
    if cfg.out:
        with open(cfg.out, "w") as fh:
            json.dump({"config": asdict(cfg), "results": rows}, fh, indent=2)
