"""Exact reference computations used to check the learning machinery.

Everything here is independent of the training path: TicTacToe minimax,
Kuhn Poker best responses and exploitability by enumeration, exact
expected returns for small games, and the exact win probability of Pig
under a hold-at-k policy.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .core import Game, GameState, default_game, make_game
from .errors import GameTooLarge, IllegalPosition
from .games.kuhn import ALPHABET as KUHN_ALPHABET
from .games.kuhn import CARDS, TERMINAL_HISTORIES, KuhnPoker, kuhn_round_settle
from .games.tictactoe import EMPTY, LINES, O, X, is_reachable, tictactoe_winner

KUHN_GAME_VALUE = (-1.0 / 18.0, 1.0 / 18.0)
MAX_BRANCHES = 10**6

# ---------------------------------------------------------------------------
# TicTacToe minimax
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _negamax(cells: tuple) -> int:
    result = tictactoe_winner(cells)
    if result != "ongoing":
        if result == "draw":
            return 0
        # the side that just moved won, so the side to move lost
        return -1
    mover = X if sum(c != EMPTY for c in cells) % 2 == 0 else O
    best = -2
    for i in range(9):
        if cells[i] == EMPTY:
            child = cells[:i] + (mover,) + cells[i + 1:]
            best = max(best, -_negamax(child))
            if best == 1:
                break
    return best


def tictactoe_minimax(position) -> tuple[int, tuple[int, ...]]:
    """Exact value for the side to move and every value-preserving move.

    ``position`` is a GameState or a 9-tuple of cells (0 empty, 1 X, 2 O).
    """
    cells = tuple(position.payload.cells) if isinstance(position, GameState) else tuple(position)
    if len(cells) != 9 or not is_reachable(cells):
        raise IllegalPosition(f"{cells} is not reachable by legal play")
    value = _negamax(cells)
    if tictactoe_winner(cells) != "ongoing":
        return value, ()
    mover = X if sum(c != EMPTY for c in cells) % 2 == 0 else O
    best = tuple(
        i for i in range(9)
        if cells[i] == EMPTY and -_negamax(cells[:i] + (mover,) + cells[i + 1:]) == value
    )
    return value, best


# ---------------------------------------------------------------------------
# Kuhn Poker, single round
# ---------------------------------------------------------------------------

DEALS = tuple((a, b) for a in range(3) for b in range(3) if a != b)
DECISION_HISTORIES = ((), ("check",), ("bet",), ("check", "bet"))


def _kuhn_legal(h):
    return ("check", "bet") if h in ((), ("check",)) else ("call", "fold")


def kuhn_nash_strategy(alpha=Fraction(1, 6)):
    """Classic one-parameter Kuhn equilibrium, alpha in [0, 1/3].

    Returns a strategy callable ``(role, card, history) -> {action: prob}``.
    Cards are 0 = J, 1 = Q, 2 = K.
    """
    a = alpha
    table = {
        (0, 0, ()): {"bet": a, "check": 1 - a},
        (0, 1, ()): {"bet": 0, "check": 1},
        (0, 2, ()): {"bet": 3 * a, "check": 1 - 3 * a},
        (0, 0, ("check", "bet")): {"call": 0, "fold": 1},
        (0, 1, ("check", "bet")): {"call": a + Fraction(1, 3), "fold": Fraction(2, 3) - a},
        (0, 2, ("check", "bet")): {"call": 1, "fold": 0},
        (1, 0, ("bet",)): {"call": 0, "fold": 1},
        (1, 1, ("bet",)): {"call": Fraction(1, 3), "fold": Fraction(2, 3)},
        (1, 2, ("bet",)): {"call": 1, "fold": 0},
        (1, 0, ("check",)): {"bet": Fraction(1, 3), "check": Fraction(2, 3)},
        (1, 1, ("check",)): {"bet": 0, "check": 1},
        (1, 2, ("check",)): {"bet": 1, "check": 0},
    }

    def strategy(role, card, history):
        return table[(role, card, tuple(history))]

    return strategy


def kuhn_strategy_from_params(params, temperature=1.0):
    """Within-round strategy of a tabular policy with illegal mass renormalised away."""
    from .policy import action_distribution

    def strategy(role, card, history):
        h = tuple(history)
        key = f"KuhnPoker/p{role}/{CARDS[card]}|h={','.join(h)}"
        legal = [KUHN_ALPHABET.index(x) for x in _kuhn_legal(h)]
        probs = action_distribution(params, key, len(KUHN_ALPHABET), temperature, legal)
        return {KUHN_ALPHABET[i]: float(probs[i]) for i in legal}

    return strategy


def uniform_kuhn_strategy(role, card, history):
    acts = _kuhn_legal(tuple(history))
    return {a: 0.5 for a in acts}


def _kuhn_node_value(deal, h, strategies, p, choice):
    """Value to player ``p`` of node ``(deal, h)``; ``choice`` fixes p's actions if given."""
    if h in TERMINAL_HISTORIES:
        d = kuhn_round_settle(deal, h, 0)
        return d if p == 0 else -d
    actor = len(h) % 2
    if choice is not None and actor == p:
        return _kuhn_node_value(deal, h + (choice[(deal[p], h)],), strategies, p, choice)
    dist = strategies[actor](actor, deal[actor], h)
    return sum(pr * _kuhn_node_value(deal, h + (a,), strategies, p, choice) for a, pr in dist.items() if pr)


def kuhn_profile_value(strategy0, strategy1):
    """Expected chip delta to player 0 when player 0 follows strategy0 and player 1 strategy1."""
    s = (strategy0, strategy1)
    return sum(_kuhn_node_value(d, (), s, 0, None) for d in DEALS) / 6


def _opp_reach(deal, h, strategy, opp):
    r = 1
    for i in range(len(h)):
        if i % 2 == opp:
            r *= strategy(opp, deal[opp], h[:i]).get(h[i], 0)
    return r


def kuhn_best_response(strategy, p):
    """Best-response value for player ``p`` against ``strategy`` playing the other seat.

    Returns (value, pure best-response choice per infoset).
    """
    opp = 1 - p
    strategies = [strategy, strategy]
    choice = {}
    for h in sorted((h for h in DECISION_HISTORIES if len(h) % 2 == p), key=len, reverse=True):
        for card in range(3):
            best_a, best_v = None, None
            for a in _kuhn_legal(h):
                v = 0
                for oc in range(3):
                    if oc == card:
                        continue
                    deal = (card, oc) if p == 0 else (oc, card)
                    reach = _opp_reach(deal, h, strategy, opp)
                    if reach:
                        v += reach * _kuhn_node_value(deal, h + (a,), strategies, p, choice)
                if best_v is None or v > best_v:
                    best_a, best_v = a, v
            choice[(card, h)] = best_a
    value = sum(_kuhn_node_value(d, (), strategies, p, choice) for d in DEALS) / 6
    return value, choice


@dataclass
class ExploitabilityReport:
    policy_id: str
    best_response_value: tuple
    self_play_value: tuple
    exploitability: float
    nash_gap: tuple
    best_response: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "best_response_value": [float(x) for x in self.best_response_value],
            "self_play_value": [float(x) for x in self.self_play_value],
            "exploitability": float(self.exploitability),
            "nash_gap": [float(x) for x in self.nash_gap],
        }


def kuhn_exploitability(policy, policy_id: str = "") -> ExploitabilityReport:
    """Average best-response gain over the game value across both seats.

    ``policy`` is a strategy callable or a PolicyParams (read with the
    default infoset keys, illegal mass renormalised away).
    """
    strategy = policy if callable(policy) else kuhn_strategy_from_params(policy)
    br0, c0 = kuhn_best_response(strategy, 0)
    br1, c1 = kuhn_best_response(strategy, 1)
    v0 = kuhn_profile_value(strategy, strategy)
    gaps = (br0 - KUHN_GAME_VALUE[0], br1 - KUHN_GAME_VALUE[1])
    return ExploitabilityReport(
        policy_id,
        (br0, br1),
        (v0, -v0),
        0.5 * (gaps[0] + gaps[1]),
        gaps,
        {"p0": {f"{CARDS[c]}|{','.join(h)}": a for (c, h), a in c0.items()},
         "p1": {f"{CARDS[c]}|{','.join(h)}": a for (c, h), a in c1.items()}},
    )


# ---------------------------------------------------------------------------
# Exact expected return by enumeration
# ---------------------------------------------------------------------------


def params_policy(params, temperature=1.0, mask="legal"):
    """Wrap PolicyParams as ``(game, state, role) -> probability vector``."""
    from .policy import action_distribution

    def policy(game, state, role):
        legal = game.legal_actions(state) if mask == "legal" else None
        return action_distribution(params, game.observe(state, role), game.n_actions, temperature, legal)

    return policy


def uniform_legal_policy(game, state, role):
    p = np.zeros(game.n_actions)
    legal = game.legal_actions(state)
    p[list(legal)] = 1.0 / len(legal)
    return p


def chance_roots(game: Game):
    """Initial states with their probabilities, for games enumerable from the root."""
    if game.name == "KuhnPoker":
        if game.rounds_total != 1:
            raise GameTooLarge("only single-round Kuhn Poker is enumerable")
        return [(1.0 / 6.0, game.state_from_deal(d)) for d in DEALS]
    if game.name in ("TicTacToe", "ToyHorizon", "ConnectFour"):
        return [(1.0, game.reset(0))]
    raise GameTooLarge(f"{game.name} has chance events after reset or an unbounded tree")


def _key(state):
    return state.turn, state.payload


def count_branches(game: Game, policies, limit=MAX_BRANCHES) -> int:
    memo = {}

    def count(state):
        if state.terminal:
            return 1
        k = _key(state)
        if k in memo:
            return memo[k]
        role = state.turn % 2
        probs = policies[role](game, state, role)
        total = 0
        for a in np.flatnonzero(probs > 0):
            total += count(game.apply(state, int(a)))
            if total > limit:
                raise GameTooLarge(f"more than {limit} trajectory branches")
        memo[k] = total
        return total

    return sum(count(s) for _, s in chance_roots(game))


def _moments(game, policies, max_branches):
    """(E[R_0], E[R_0^2]) by exhaustive enumeration with memoised subtrees."""
    roots = chance_roots(game)
    count_branches(game, policies, max_branches)
    memo = {}

    def moments(state):
        if state.terminal:
            r = game.training_return(state)
            return r, r * r
        k = _key(state)
        if k in memo:
            return memo[k]
        role = state.turn % 2
        probs = policies[role](game, state, role)
        m1 = m2 = 0.0
        for a in np.flatnonzero(probs > 0):
            c1, c2 = moments(game.apply(state, int(a)))
            m1 += probs[a] * c1
            m2 += probs[a] * c2
        memo[k] = (m1, m2)
        return m1, m2

    e = [0.0, 0.0]
    for p, s in roots:
        c1, c2 = moments(s)
        e[0] += p * c1
        e[1] += p * c2
    return e[0], e[1]


def _as_game(game):
    if isinstance(game, str):
        return make_game("KuhnPoker", rounds_total=1) if game == "KuhnPoker" else default_game(game)
    return game


def enumerate_expected_return(game, policy0, policy1, max_branches=MAX_BRANCHES):
    """(E[R_0], E[R_1]) by summing over every chance outcome and action branch.

    R is the game's training return, which is rho unless the game is
    configured with a different payoff.

    Policies are callables ``(game, state, role) -> probability vector``.
    """
    e0, _ = _moments(_as_game(game), (policy0, policy1), max_branches)
    return e0, -e0


def return_variance(game, policy0, policy1, max_branches=MAX_BRANCHES) -> float:
    """Var(R_0), which equals Var(R_1), under the policy pair."""
    e0, m2 = _moments(_as_game(game), (policy0, policy1), max_branches)
    return m2 - e0 * e0


# ---------------------------------------------------------------------------
# Pig hold-at-k, exact
# ---------------------------------------------------------------------------


def pig_turns_to_win(hold_at=20, target=100, max_turns=100) -> np.ndarray:
    """P(a lone hold-at-k player banks ``target`` on exactly its n-th action), n = 1..max_turns."""
    dist = {(0, 0): 1.0}
    out = np.zeros(max_turns + 1)
    for n in range(1, max_turns + 1):
        nxt: dict = {}
        for (b, pend), pr in dist.items():
            if pend >= hold_at or b + pend >= target:
                nb = b + pend
                if nb >= target:
                    out[n] += pr
                else:
                    nxt[(nb, 0)] = nxt.get((nb, 0), 0.0) + pr
            else:
                nxt[(b, 0)] = nxt.get((b, 0), 0.0) + pr / 6
                for f in range(2, 7):
                    k = (b, pend + f)
                    nxt[k] = nxt.get(k, 0.0) + pr / 6
        dist = nxt
    return out


def pig_first_actor_win_probability(hold_at=20, target=100, turn_limit=200) -> tuple[float, float, float]:
    """(P first actor wins, P second wins, P draw) when both hold at ``hold_at``.

    Players act alternately and do not interact, so the first actor wins iff
    it needs no more own actions than the second player does.
    """
    per_player = turn_limit // 2
    first_actions = (turn_limit + 1) // 2
    p0 = pig_turns_to_win(hold_at, target, first_actions)
    p1 = pig_turns_to_win(hold_at, target, per_player)
    tail1 = 1.0 - np.cumsum(p1)  # P(T1 > k)
    tail0 = 1.0 - np.cumsum(p0)
    win0 = sum(p0[k] * (tail1[k - 1] if k - 1 < len(tail1) else 0.0) for k in range(1, first_actions + 1))
    win1 = sum(p1[k] * tail0[k] for k in range(1, per_player + 1))
    return float(win0), float(win1), float(1.0 - win0 - win1)


def curse_of_turns_valid_fraction(q: float, horizon: int) -> float:
    """Probability that every one of ``horizon`` turns is legal when each is legal w.p. q."""
    return q**horizon
