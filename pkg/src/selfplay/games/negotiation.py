"""Two-resource trading game (wood and gold).

Both players start with 10 wood and 10 gold. Player 0 values (wood 5,
gold 10) and player 1 values (wood 10, gold 5); valuations never appear in
an observation. Actions:

* ``offer:gw,gg,tw,tg``: proposer gives ``gw`` wood and ``gg`` gold and takes
  ``tw`` wood and ``tg`` gold, each in 0..5. Legal when the proposer holds
  what it gives and the opponent holds what it asks for. A new offer
  replaces any pending one.
* ``accept``: legal only while an opponent offer is pending; executes it.
* ``deny``: always legal; rejects the pending offer or passes.

The match ends after two consecutive ``deny`` actions or at the 8-turn
limit; ``rho`` then follows :func:`negotiation_settle` in both cases.

Observation body: ``w=<own wood>,g=<own gold>|o=<opp wood>,<opp gold>|pend=<offer or ->|t=<turn>``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import product

from ..core import Game, GameState, sign, _finish

START = ((10, 10), (10, 10))
VALUATIONS = ((5, 10), (10, 5))
MAX_GIVE = 5
OFFERS = tuple(product(range(MAX_GIVE + 1), repeat=4))
ALPHABET = tuple(f"offer:{gw},{gg},{tw},{tg}" for gw, gg, tw, tg in OFFERS) + ("accept", "deny")
ACCEPT = len(OFFERS)
DENY = ACCEPT + 1


@dataclass(frozen=True)
class NegotiationState:
    inventories: tuple[tuple[int, int], tuple[int, int]]
    valuations: tuple[tuple[int, int], tuple[int, int]]
    pending_offer: tuple[int, int, int, int] | None
    denies: int


@lru_cache(maxsize=None)
def _affordable_offers(own, opp) -> tuple[int, ...]:
    return tuple(
        i for i, (gw, gg, tw, tg) in enumerate(OFFERS)
        if gw <= own[0] and gg <= own[1] and tw <= opp[0] and tg <= opp[1]
    )


def portfolio_value(inventory, valuation) -> int:
    return inventory[0] * valuation[0] + inventory[1] * valuation[1]


def negotiation_settle(inventories, valuations=VALUATIONS, initial=START) -> int:
    gains = [
        portfolio_value(inventories[i], valuations[i]) - portfolio_value(initial[i], valuations[i])
        for i in (0, 1)
    ]
    return sign(gains[0] - gains[1])


def execute_trade(inventories, proposer: int, offer):
    gw, gg, tw, tg = offer
    inv = [list(inventories[0]), list(inventories[1])]
    other = 1 - proposer
    inv[proposer][0] += tw - gw
    inv[proposer][1] += tg - gg
    inv[other][0] += gw - tw
    inv[other][1] += gg - tg
    return (tuple(inv[0]), tuple(inv[1]))


class SimpleNegotiation(Game):
    name = "SimpleNegotiation"
    alphabet = ALPHABET
    turn_limit = 8
    perfect_information = False

    def _initial(self, seed):
        return NegotiationState(START, VALUATIONS, None, 0), 0

    def _legal(self, state):
        p = state.payload
        me = state.turn % 2
        legal = _affordable_offers(p.inventories[me], p.inventories[1 - me])
        if p.pending_offer is not None:
            return legal + (ACCEPT, DENY)
        return legal + (DENY,)

    def _allows(self, state, action):
        p = state.payload
        if action == DENY:
            return True
        if action == ACCEPT:
            return p.pending_offer is not None
        me = state.turn % 2
        own, opp = p.inventories[me], p.inventories[1 - me]
        gw, gg, tw, tg = OFFERS[action]
        return gw <= own[0] and gg <= own[1] and tw <= opp[0] and tg <= opp[1]

    def _advance(self, state, action):
        p = state.payload
        me = state.turn % 2
        turn = state.turn + 1
        if action == DENY:
            payload = NegotiationState(p.inventories, p.valuations, None, p.denies + 1)
            if payload.denies >= 2:
                return _finish(state, negotiation_settle(payload.inventories, p.valuations), turn=turn, payload=payload)
        elif action == ACCEPT:
            inv = execute_trade(p.inventories, 1 - me, p.pending_offer)
            payload = NegotiationState(inv, p.valuations, None, 0)
        else:
            payload = NegotiationState(p.inventories, p.valuations, OFFERS[action], 0)
        return GameState(state.game, turn, payload, seed=state.seed, draws=state.draws)

    def _limit_rho(self, state):
        return negotiation_settle(state.payload.inventories, state.payload.valuations)

    def _body(self, state, role):
        p = state.payload
        own, opp = p.inventories[role], p.inventories[1 - role]
        pend = "-" if p.pending_offer is None else ",".join(map(str, p.pending_offer))
        return f"w={own[0]},g={own[1]}|o={opp[0]},{opp[1]}|pend={pend}|t={state.turn}"

    def scripts(self):
        return ("accept-if-gain",)
