"""Diagnostic games used by tests and the curse-of-turns experiment.

``ToyHorizon`` runs exactly ``horizon`` turns over an alphabet of
``alphabet_size`` symbols of which the first ``legal_count`` are legal at
every turn, so a uniform full-alphabet policy plays a legal move with
probability ``legal_count / alphabet_size`` per turn. At the horizon
``rho = +1`` if the sum of action indices is even, else ``-1``.
Observation body: ``t=<turn>``.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core import Game, GameState, _finish


@dataclass(frozen=True)
class ToyState:
    action_sum: int


class ToyHorizon(Game):
    name = "ToyHorizon"

    def __init__(self, horizon: int = 2, alphabet_size: int = 2, legal_count: int = 2):
        if not 1 <= legal_count <= alphabet_size:
            raise ValueError("need 1 <= legal_count <= alphabet_size")
        self.horizon = horizon
        self.legal_count = legal_count
        self.alphabet = tuple(f"a{i}" for i in range(alphabet_size))
        self.turn_limit = horizon + 1
        super().__init__()

    def params(self):
        return {"horizon": self.horizon, "alphabet_size": len(self.alphabet), "legal_count": self.legal_count}

    def _initial(self, seed):
        return ToyState(0), 0

    def _legal(self, state):
        return tuple(range(self.legal_count))

    def _advance(self, state, action):
        turn = state.turn + 1
        payload = ToyState(state.payload.action_sum + action)
        if turn >= self.horizon:
            return _finish(state, 1 if payload.action_sum % 2 == 0 else -1, turn=turn, payload=payload)
        return GameState(state.game, turn, payload, seed=state.seed, draws=state.draws)

    def _body(self, state, role):
        return f"t={state.turn}"
