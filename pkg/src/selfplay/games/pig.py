"""Pig dice, alternating-turn form.

Each player keeps a pending turn total. On its move a player either
``roll``s one d6 (a 1 wipes its pending total, 2..6 adds to it) or
``hold``s (banks the pending total). The move always passes to the
opponent, so turn parity decides who acts. Banking to ``target`` or more
wins. The 200-turn limit scores a draw.

Observation body: ``b=<own banked>,<opp banked>|t=<own pending>,<opp pending>``.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core import Game, GameState, _finish, stream_below

ROLL, HOLD = 0, 1


@dataclass(frozen=True)
class PigDiceState:
    banked: tuple[int, int]
    turn_total: tuple[int, int]
    target: int


def pig_apply(payload: PigDiceState, mover: int, action: int, face: int | None = None):
    """Apply ``roll`` (needs ``face``) or ``hold`` for ``mover``.

    Returns ``(payload, winner)`` with ``winner`` None while the game goes on.
    """
    banked = list(payload.banked)
    pend = list(payload.turn_total)
    if action == ROLL:
        pend[mover] = 0 if face == 1 else pend[mover] + face
    else:
        banked[mover] += pend[mover]
        pend[mover] = 0
    new = PigDiceState(tuple(banked), tuple(pend), payload.target)
    winner = mover if banked[mover] >= payload.target else None
    return new, winner


class PigDice(Game):
    name = "PigDice"
    alphabet = ("roll", "hold")
    turn_limit = 200
    perfect_information = True

    def __init__(self, target: int = 100):
        self.target = target
        super().__init__()

    def params(self):
        return {"target": self.target}

    def _initial(self, seed):
        return PigDiceState((0, 0), (0, 0), self.target), 0

    def _legal(self, state):
        return (ROLL, HOLD)

    def _advance(self, state, action):
        mover = state.turn % 2
        draws = state.draws
        face = None
        if action == ROLL:
            face = 1 + stream_below(state.seed, draws, 6)
            draws += 1
        payload, winner = pig_apply(state.payload, mover, action, face)
        turn = state.turn + 1
        if winner is not None:
            return _finish(state, 1 if winner == 0 else -1, turn=turn, payload=payload, draws=draws)
        return GameState(state.game, turn, payload, seed=state.seed, draws=draws)

    def _body(self, state, role):
        p = state.payload
        return f"b={p.banked[role]},{p.banked[1 - role]}|t={p.turn_total[role]},{p.turn_total[1 - role]}"

    def scripts(self):
        return ("hold-at-20",)
