"""Per-pair lower bounds on Q for metrics c * phi^-1 ddbar phi, compared to the predicted values."""

from dataclasses import dataclass

import numpy as np

from _config import parse
from qtensor import hopf, lck_potential, vaisman_reduction_bound


@dataclass
class Config:
    """Tabulate Q_(m mbar k kbar) - c phi^-1 R_(m mbar k kbar) against its closed form."""

    dim: int = 3
    points: int = 5
    seed: int = 0
    potential: str = "abs2"  # or one_plus_abs2: LCK with potential, not Vaisman


if __name__ == "__main__":
    cfg = parse(Config)
    model = hopf(cfg.dim) if cfg.potential == "abs2" else lck_potential(cfg.dim, cfg.potential, 1.0)
    print(f"{model.name}({cfg.dim}), potential {cfg.potential}")
    for p in model.sample_points(cfg.points, cfg.seed):
        bounds = vaisman_reduction_bound(model, p)
        worst = min(b.value for b in bounds)
        gap = max(b.value - b.predicted for b in bounds)
        flag = "ok" if all(b.ok for b in bounds) else "VIOLATED"
        print(f"|z| = {np.linalg.norm(p):.3f}  min pair value {worst:+.4f}  max(value - predicted) {gap:.2e}  {flag}")
