"""Role-conditioned advantage estimation.

One exponential-moving-average baseline per (game, role). Each return is
first folded into its baseline and the advantage is then taken against the
updated value, so for a single update ``A = alpha * (R - b_old)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels

DEFAULT_ALPHA = 0.95


@dataclass(frozen=True)
class AdvantageRecord:
    game: str
    role: int
    return_value: float
    advantage: float


@dataclass
class BaselineTable:
    alpha: float = DEFAULT_ALPHA
    b: dict = field(default_factory=dict)
    update_count: dict = field(default_factory=dict)

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    def get(self, game: str, role: int) -> float:
        return self.b.get((game, role), 0.0)

    def update_baseline(self, game: str, role: int, return_value: float) -> "BaselineTable":
        if not np.isfinite(return_value):
            raise ValueError("return must be finite")
        key = (game, role)
        self.b[key] = self.alpha * self.b.get(key, 0.0) + (1.0 - self.alpha) * float(return_value)
        self.update_count[key] = self.update_count.get(key, 0) + 1
        return self

    def advantage(self, game: str, role: int, return_value: float) -> AdvantageRecord:
        return AdvantageRecord(game, role, float(return_value), float(return_value) - self.get(game, role))

    def process_batch(self, batch) -> list[AdvantageRecord]:
        """Update-then-advantage over ``(game, role, R)`` triples in batch order.

        Entries are independent, so each (game, role) stream is scanned in one
        kernel call; results equal the one-at-a-time rule exactly.
        """
        batch = list(batch)
        if not batch:
            raise ValueError("batch must be non-empty")
        groups: dict = {}
        for i, (game, role, r) in enumerate(batch):
            groups.setdefault((game, role), []).append(i)
        out: list = [None] * len(batch)
        for key, idx in groups.items():
            returns = np.array([float(batch[i][2]) for i in idx])
            if not np.all(np.isfinite(returns)):
                raise ValueError("returns must be finite")
            trail = kernels.ema_scan(self.b.get(key, 0.0), self.alpha, returns)
            for j, i in enumerate(idx):
                out[i] = AdvantageRecord(key[0], key[1], float(returns[j]), float(returns[j] - trail[j]))
            self.b[key] = float(trail[-1])
            self.update_count[key] = self.update_count.get(key, 0) + len(idx)
        return out

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "entries": [
                {"game": g, "role": p, "b": self.b[(g, p)], "count": self.update_count.get((g, p), 0)}
                for g, p in sorted(self.b)
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "BaselineTable":
        t = cls(alpha=float(data["alpha"]))
        for e in data["entries"]:
            t.b[(e["game"], int(e["role"]))] = float(e["b"])
            t.update_count[(e["game"], int(e["role"]))] = int(e["count"])
        return t

    def copy(self) -> "BaselineTable":
        return BaselineTable(self.alpha, dict(self.b), dict(self.update_count))


def stationary_std(alpha: float, variance: float) -> float:
    """Standard deviation of an EMA of i.i.d. inputs with the given variance."""
    return float(np.sqrt((1.0 - alpha) / (1.0 + alpha) * variance))
