from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from .core import TRAJECTORY_FORMAT_VERSION, Game

OPPONENT_LOGPROB = float("nan")


@dataclass(frozen=True)
class TurnRecord:
    """One applied action.

    ``mask`` is the action set the sampler normalised over (None = full
    alphabet). Turns played by a fixed opponent have ``learner=False`` and
    carry a NaN log-probability.
    """

    t: int
    role: int
    obs_key: str
    action: int
    logprob: float
    legal: bool
    n_actions: int
    temperature: float = 1.0
    mask: tuple | None = None
    learner: bool = True
    annotation: str = ""


@dataclass
class Trajectory:
    game: str
    seed: int
    turns: list = field(default_factory=list)
    returns: tuple = (0, 0)
    reason: str = "NaturalEnd"
    learner_role: int | None = None
    game_params: dict = field(default_factory=dict)
    rho: int | None = None

    @property
    def outcome_rho(self) -> int:
        """Terminal rho; differs from ``returns[0]`` only under a non-sign payoff."""
        if self.rho is not None:
            return self.rho
        r = self.returns[0]
        return (r > 0) - (r < 0)

    @property
    def length(self) -> int:
        return len(self.turns)

    def to_record(self, game: Game) -> dict:
        turns = []
        for tr in self.turns:
            turns.append(
                {
                    "t": tr.t,
                    "role": tr.role,
                    "obs_key": tr.obs_key,
                    "action": game.alphabet[tr.action],
                    "legal": tr.legal,
                    "logprob": None if math.isnan(tr.logprob) else tr.logprob,
                    "learner": tr.learner,
                    "masked": tr.mask is not None,
                    "temperature": tr.temperature,
                    "annotation": tr.annotation,
                }
            )
        return {
            "format": TRAJECTORY_FORMAT_VERSION,
            "game": self.game,
            "params": self.game_params,
            "seed": self.seed,
            "turns": turns,
            "rho": self.outcome_rho,
            "reason": self.reason,
            "learner_role": self.learner_role,
        }


def dumps_jsonl(trajectories, game_lookup) -> str:
    lines = [
        json.dumps(t.to_record(game_lookup(t)), sort_keys=True, separators=(",", ":"))
        for t in trajectories
    ]
    return "\n".join(lines) + ("\n" if lines else "")
