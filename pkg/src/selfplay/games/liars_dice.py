"""Single-challenge Liar's Dice, five dice per player.

Dice are rolled at reset from the match stream: player 0's five faces,
then player 1's. Claims ``<q>x<f>`` assert at least ``q`` dice among all
ten show face ``f``; they are totally ordered quantity-major, face-minor,
and each new claim must exceed the current one. ``challenge`` (legal once
a claim exists) ends the game: the challenger wins iff the claim is false.

Observation body: ``d=<own dice sorted>|c=<current claim or ->``.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core import Game, GameState, _finish, stream_below

N_DICE = 5
FACES = 6
MAX_QUANTITY = 2 * N_DICE
CLAIMS = tuple((q, f) for q in range(1, MAX_QUANTITY + 1) for f in range(1, FACES + 1))
ALPHABET = tuple(f"{q}x{f}" for q, f in CLAIMS) + ("challenge",)
CHALLENGE = len(CLAIMS)


@dataclass(frozen=True)
class LiarsDiceState:
    dice: tuple[tuple[int, ...], tuple[int, ...]]
    current_claim: int | None
    phase: str = "claiming"


def claim_holds(dice, claim: int) -> bool:
    q, f = CLAIMS[claim]
    return sum(d == f for hand in dice for d in hand) >= q


class LiarsDice(Game):
    name = "LiarsDice"
    alphabet = ALPHABET
    turn_limit = 60
    perfect_information = False

    def _initial(self, seed):
        faces = [1 + stream_below(seed, i, FACES) for i in range(2 * N_DICE)]
        dice = (tuple(faces[:N_DICE]), tuple(faces[N_DICE:]))
        return LiarsDiceState(dice, None), 2 * N_DICE

    def _legal(self, state):
        c = state.payload.current_claim
        if c is None:
            return tuple(range(len(CLAIMS)))
        return tuple(range(c + 1, len(CLAIMS))) + (CHALLENGE,)

    def _advance(self, state, action):
        p = state.payload
        turn = state.turn + 1
        if action == CHALLENGE:
            challenger = state.turn % 2
            holds = claim_holds(p.dice, p.current_claim)
            winner = 1 - challenger if holds else challenger
            payload = LiarsDiceState(p.dice, p.current_claim, "resolved")
            return _finish(state, 1 if winner == 0 else -1, turn=turn, payload=payload)
        return GameState(state.game, turn, LiarsDiceState(p.dice, action), seed=state.seed, draws=state.draws)

    def _body(self, state, role):
        p = state.payload
        own = "".join(map(str, sorted(p.dice[role])))
        claim = "-" if p.current_claim is None else ALPHABET[p.current_claim]
        return f"d={own}|c={claim}"

    def scripts(self):
        return ("challenge-if-unlikely",)
