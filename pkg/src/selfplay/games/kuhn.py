"""Kuhn Poker as a best-of-N match.

Each round both players ante 1 and receive distinct cards from {J, Q, K}
drawn from the match stream (first-actor card first). Within a round the
legal actions are ``check``/``bet`` until someone bets, then
``call``/``fold``. The match ends after ``rounds_total`` rounds with
``rho = sign(chip_delta)``.

``payoff`` picks the training return: ``"sign"`` uses rho, ``"chips"``
uses the chip delta itself (the quantity exploitability is measured in).
A forfeit or turn limit under ``"chips"`` scores rho times the largest
possible match stake.

Turn parity fixes who acts, so a round's first actor is whichever role is
on move when the round opens: a two-action round keeps the opener, a
three-action round hands it to the other role.

Observation body (``key_mode``):

* ``infoset`` (default): ``<card>|h=<history>``, e.g. ``K|h=check,bet``
* ``round``: ``<card>|r=<round>|h=<history>``
* ``chips``: ``<card>|c=<sign of own chip delta>|h=<history>``
"""

from __future__ import annotations

from dataclasses import dataclass, replace as _replace

from ..core import Game, GameState, Outcome, Reason, sign, stream_below
from ..errors import NonTerminalHistory

CARDS = "JQK"
ALPHABET = ("check", "bet", "call", "fold")
CHECK, BET, CALL, FOLD = range(4)

TERMINAL_HISTORIES = {
    ("check", "check"),
    ("bet", "call"),
    ("bet", "fold"),
    ("check", "bet", "call"),
    ("check", "bet", "fold"),
}


@dataclass(frozen=True)
class KuhnPokerState:
    round_index: int
    rounds_total: int
    cards: tuple[int, int]
    betting_history: tuple[str, ...]
    chip_delta: int
    round_first_actor: int


def kuhn_round_settle(cards, betting_history, first_actor: int = 0) -> int:
    """Chip delta of a finished round from player 0's perspective.

    ``cards`` is indexed by player (0 = J, 1 = Q, 2 = K).
    """
    h = tuple(betting_history)
    if h not in TERMINAL_HISTORIES:
        raise NonTerminalHistory(f"betting history {h} does not end a round")
    first, second = first_actor, 1 - first_actor
    if h == ("bet", "fold"):
        won = 1  # second folded, first collects the ante
    elif h == ("check", "bet", "fold"):
        won = -1
    else:
        stake = 1 if h == ("check", "check") else 2
        won = stake if cards[first] > cards[second] else -stake
    return won if first == 0 else -won


def _deal(seed: int, counter: int) -> tuple[tuple[int, int], int]:
    a = stream_below(seed, counter, 3)
    b = stream_below(seed, counter + 1, 2)
    rest = [c for c in range(3) if c != a]
    return (a, rest[b]), counter + 2


class KuhnPoker(Game):
    name = "KuhnPoker"
    alphabet = ALPHABET
    perfect_information = False

    def __init__(self, rounds_total: int = 5, key_mode: str = "infoset", payoff: str = "sign"):
        if rounds_total < 1:
            raise ValueError("rounds_total must be >= 1")
        if key_mode not in ("infoset", "round", "chips"):
            raise ValueError(f"unknown key_mode {key_mode!r}")
        if payoff not in ("sign", "chips"):
            raise ValueError(f"unknown payoff {payoff!r}")
        self.rounds_total = rounds_total
        self.key_mode = key_mode
        self.payoff = payoff
        self.turn_limit = 4 * rounds_total
        super().__init__()

    def params(self):
        return {"rounds_total": self.rounds_total, "key_mode": self.key_mode, "payoff": self.payoff}

    def _initial(self, seed):
        cards, draws = _deal(seed, 0)
        return KuhnPokerState(0, self.rounds_total, cards, (), 0, 0), draws

    def _legal(self, state):
        h = state.payload.betting_history
        if not h or h == ("check",):
            return (CHECK, BET)
        return (CALL, FOLD)

    def _advance(self, state, action):
        p = state.payload
        h = p.betting_history + (ALPHABET[action],)
        turn = state.turn + 1
        if h not in TERMINAL_HISTORIES:
            return GameState(state.game, turn, _replace(p, betting_history=h), seed=state.seed, draws=state.draws)
        delta = p.chip_delta + kuhn_round_settle(p.cards, h, p.round_first_actor)
        if p.round_index + 1 >= p.rounds_total:
            payload = _replace(p, betting_history=h, chip_delta=delta)
            return GameState(
                state.game, turn, payload, terminal=True,
                outcome=Outcome(sign(delta), Reason.NATURAL_END), seed=state.seed, draws=state.draws,
            )
        cards, draws = _deal(state.seed, state.draws)
        payload = KuhnPokerState(p.round_index + 1, p.rounds_total, cards, (), delta, turn % 2)
        return GameState(state.game, turn, payload, seed=state.seed, draws=draws)

    def _limit_rho(self, state):
        return sign(state.payload.chip_delta)

    def training_return(self, state):
        if self.payoff == "sign":
            return float(state.outcome.rho)
        if state.outcome.reason is Reason.NATURAL_END:
            return float(state.payload.chip_delta)
        return float(2 * self.rounds_total * state.outcome.rho)

    def _body(self, state, role):
        p = state.payload
        card = CARDS[p.cards[role]]
        hist = ",".join(p.betting_history)
        if self.key_mode == "round":
            return f"{card}|r={p.round_index}|h={hist}"
        if self.key_mode == "chips":
            own = p.chip_delta if role == 0 else -p.chip_delta
            return f"{card}|c={sign(own)}|h={hist}"
        return f"{card}|h={hist}"

    def state_from_deal(self, cards, history=()) -> GameState:
        """Round-0 state with an explicit deal and betting history, for oracles and tests."""
        payload = KuhnPokerState(0, self.rounds_total, tuple(cards), tuple(history), 0, 0)
        return GameState(self.name, len(history), payload, draws=2)

    def scripts(self):
        return ("kuhn-nash",)

