"""Seeded random search over ``(lambda, tau / lambda)``."""
from __future__ import annotations

import math
import zlib
from dataclasses import dataclass, field

import numpy as np

# tau is clipped just above mu: the Z-step needs tau > mu strictly
TAU_MARGIN = 1.01


def derive_seed(seed: int, *keys) -> int:
    """Deterministic 64-bit child seed from a base seed and int/str keys."""
    words = [int(seed) & 0xFFFFFFFF, (int(seed) >> 32) & 0xFFFFFFFF]
    for key in keys:
        words.append(zlib.crc32(key.encode()) if isinstance(key, str) else int(key) & 0xFFFFFFFF)
    state = np.random.SeedSequence(words).generate_state(2, dtype=np.uint32)
    return int(state[0]) | (int(state[1]) << 32)


def clip_tau(tau: float, mu: float) -> float:
    return max(tau, TAU_MARGIN * mu) if mu > 0 else tau


@dataclass(frozen=True)
class SearchSpace:
    """Log-uniform box: ``lambda / sigma`` in ``lam_range``, ``tau / lambda`` in ``tau_ratio_range``."""

    sigma: float = 1.0
    mu: float = 0.0
    lam_range: tuple = (1e-3, 1e3)
    tau_ratio_range: tuple = (1e-2, 1e2)

    def sample(self, rng: np.random.Generator) -> dict:
        lo, hi = np.log(self.lam_range)
        lam = self.sigma * float(np.exp(rng.uniform(lo, hi)))
        lo, hi = np.log(self.tau_ratio_range)
        ratio = float(np.exp(rng.uniform(lo, hi)))
        return {"lam": lam, "tau": clip_tau(ratio * lam, self.mu)}


@dataclass
class TuneResult:
    best: dict
    best_score: float
    trace: list = field(default_factory=list)


def random_search_tune(objective_fn, space: SearchSpace, budget: int, seed: int = 0) -> TuneResult:
    """Maximize ``objective_fn(lam=..., tau=...)`` over ``budget`` random draws.

    Non-finite scores (failed solves) rank below every finite score; ties
    keep the earliest draw.
    """
    if budget < 1:
        raise ValueError("budget must be >= 1")
    rng = np.random.default_rng(seed)
    trace = []
    best, best_score = None, -math.inf
    for _ in range(budget):
        params = space.sample(rng)
        score = float(objective_fn(**params))
        trace.append({**params, "score": score})
        rank = score if math.isfinite(score) or score == math.inf else -math.inf
        if best is None or rank > best_score:
            best, best_score = params, rank
    return TuneResult(best=best, best_score=best_score, trace=trace)
