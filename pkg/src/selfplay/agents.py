"""Acting agents: tabular policy, uniform-random-legal, and scripted heuristics.

An agent maps ``(game, state, stream)`` to an action index; ``stream`` is
the per-match :class:`~selfplay.core.Stream` supplying uniform draws.
"""

from __future__ import annotations

from collections import Counter

from . import policy as pol
from .core import Game, GameState, Stream
from .errors import UnknownScript


class Agent:
    name = "agent"

    def act(self, game: Game, state: GameState, stream: Stream) -> int:
        raise NotImplementedError


class RandomLegalAgent(Agent):
    name = "UniformRandomLegal"

    def act(self, game, state, stream):
        legal = game.legal_actions(state)
        return legal[stream.below(len(legal))]


class PolicyAgent(Agent):
    """Acts from a PolicyParams snapshot, greedily or by sampling."""

    def __init__(self, params, greedy=True, temperature=1.0, mask="legal", name="policy"):
        self.params = params
        self.greedy = greedy
        self.temperature = temperature
        self.mask = mask
        self.name = name

    def act(self, game, state, stream):
        role = state.turn % 2
        key = game.observe(state, role)
        legal = game.legal_actions(state) if self.mask == "legal" else None
        if self.greedy:
            return pol.greedy(self.params, key, game.n_actions, legal)
        return pol.sample(self.params, key, game.n_actions, self.temperature, legal, stream.uniform()).action


class ScriptedAgent(Agent):
    def __init__(self, script: str):
        if script not in SCRIPTS:
            raise UnknownScript(f"unknown script {script!r}; known: {sorted(SCRIPTS)}")
        self.script = script
        self.name = f"Scripted({script})"
        self._fn = SCRIPTS[script]

    def act(self, game, state, stream):
        return self._fn(game, state, stream)


# ---------------------------------------------------------------------------
# Scripts
# ---------------------------------------------------------------------------


def _win_block_else_random(game, state, stream):
    legal = game.legal_actions(state)
    me = state.turn % 2
    for a in legal:
        nxt = game.apply(state, a)
        if nxt.terminal and nxt.outcome.rho == (1 if me == 0 else -1):
            return a
    # moves the opponent would win with if it were on move
    from dataclasses import replace

    flipped = replace(state, turn=state.turn + 1)
    for a in legal:
        nxt = game.apply(flipped, a)
        if nxt.terminal and nxt.outcome.rho == (1 if me == 1 else -1):
            return a
    return legal[stream.below(len(legal))]


def _ttt_minimax(game, state, stream):
    from .oracles import tictactoe_minimax

    _, best = tictactoe_minimax(state)
    return best[stream.below(len(best))]


def _hold_at(k):
    def script(game, state, stream):
        p = state.payload
        me = state.turn % 2
        pend = p.turn_total[me]
        if pend >= k or p.banked[me] + pend >= p.target:
            return game.symbol_index("hold")
        return game.symbol_index("roll")

    return script


def _kuhn_nash(game, state, stream):
    from .oracles import kuhn_nash_strategy

    p = state.payload
    me = state.turn % 2
    h = p.betting_history
    # the equilibrium is stated for the round opener in seat 0
    pos = (me - p.round_first_actor) % 2
    dist = kuhn_nash_strategy()(pos, p.cards[me], h)
    u = stream.uniform()
    c = 0.0
    for act in sorted(dist):
        c += float(dist[act])
        if u < c:
            return game.symbol_index(act)
    return game.symbol_index(max(dist, key=lambda a: dist[a]))


def _challenge_if_unlikely(game, state, stream):
    from .games.liars_dice import CHALLENGE, CLAIMS, N_DICE

    p = state.payload
    me = state.turn % 2
    own = Counter(p.dice[me])
    expected_other = N_DICE / 6.0
    if p.current_claim is not None:
        q, f = CLAIMS[p.current_claim]
        if q > own[f] + expected_other + 0.5:
            return CHALLENGE
    start = 0 if p.current_claim is None else p.current_claim + 1
    for c in range(start, len(CLAIMS)):
        q, f = CLAIMS[c]
        if q <= own[f] + expected_other:
            return c
    return CHALLENGE if p.current_claim is not None else 0


def _accept_if_gain(game, state, stream):
    from .games.negotiation import ACCEPT, DENY, OFFERS, execute_trade, portfolio_value

    p = state.payload
    me = state.turn % 2
    if p.pending_offer is not None:
        after = execute_trade(p.inventories, 1 - me, p.pending_offer)
        gain = portfolio_value(after[me], p.valuations[me]) - portfolio_value(p.inventories[me], p.valuations[me])
        if gain > 0:
            return ACCEPT
    # give one unit of the resource valued less for one valued more
    low = 0 if p.valuations[me][0] < p.valuations[me][1] else 1
    offer = (1, 0, 0, 1) if low == 0 else (0, 1, 1, 0)
    a = OFFERS.index(offer)
    if a in game.legal_actions(state) and p.pending_offer is None:
        return a
    return DENY


SCRIPTS = {
    "win-block-else-random": _win_block_else_random,
    "minimax": _ttt_minimax,
    "hold-at-20": _hold_at(20),
    "kuhn-nash": _kuhn_nash,
    "challenge-if-unlikely": _challenge_if_unlikely,
    "accept-if-gain": _accept_if_gain,
}


def default_script(game: Game) -> str:
    names = game.scripts()
    if not names:
        raise UnknownScript(f"{game.name} has no scripted opponent")
    return names[0]


def opponent_action(kind: str, game: Game, state: GameState, stream: Stream, script="", params=None, greedy=False, mask="legal"):
    """Single opponent decision for the runtime's fixed-opponent modes."""
    if kind == "UniformRandomLegal":
        return RandomLegalAgent().act(game, state, stream)
    if kind == "Scripted":
        return ScriptedAgent(script or default_script(game)).act(game, state, stream)
    if kind == "FrozenCheckpoint":
        return PolicyAgent(params, greedy=greedy, mask=mask).act(game, state, stream)
    raise UnknownScript(f"no fixed opponent of kind {kind!r}")

