"""Turn-level two-player zero-sum game abstraction.

Every game is a :class:`Game` subclass working on integer action indices
into a fixed alphabet. The module-level functions (:func:`reset`,
:func:`legal_actions`, :func:`apply`, ...) are the token-level public
surface; the runtime talks to :class:`Game` objects directly with indices.

Role ``p`` acts at turn ``t`` iff ``p == t % 2``. An action outside the
legal set forfeits the match for the actor instead of raising.

Observation keys are strings ``"<game>/p<role>/<body>"`` where ``body`` is
the game-specific information-set encoding documented on each game class.
"""

from __future__ import annotations

import enum
import json
from abc import ABC, abstractmethod
from dataclasses import dataclass, replace
from typing import Any, Callable, NamedTuple

from .errors import AlphabetMismatch, InactiveRole, NotTerminal, TerminalState, UnknownGame

KEY_GRAMMAR_VERSION = 1
TRAJECTORY_FORMAT_VERSION = 1

GAME_IDS = ("TicTacToe", "KuhnPoker", "SimpleNegotiation", "PigDice", "LiarsDice", "ConnectFour")

# ---------------------------------------------------------------------------
# Seeded chance stream (splitmix64, counter based)
# ---------------------------------------------------------------------------

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = (x + _GOLDEN) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def stream_u64(seed: int, counter: int) -> int:
    """The ``counter``-th 64-bit value of the stream keyed by ``seed``."""
    return splitmix64((seed + counter * _GOLDEN) & _MASK64)


def stream_uniform(seed: int, counter: int) -> float:
    """Uniform float in [0, 1) with 53 random bits."""
    return (stream_u64(seed, counter) >> 11) * (1.0 / (1 << 53))


def stream_below(seed: int, counter: int, n: int) -> int:
    return int(stream_uniform(seed, counter) * n)


class Stream:
    """Mutable cursor over a seeded stream, for callers that own a counter."""

    __slots__ = ("seed", "counter")

    def __init__(self, seed: int, counter: int = 0):
        self.seed = seed & _MASK64
        self.counter = counter

    def uniform(self) -> float:
        u = stream_uniform(self.seed, self.counter)
        self.counter += 1
        return u

    def below(self, n: int) -> int:
        return int(self.uniform() * n)


# ---------------------------------------------------------------------------
# Value types
# ---------------------------------------------------------------------------


class Reason(str, enum.Enum):
    NATURAL_END = "NaturalEnd"
    INVALID_MOVE_FORFEIT = "InvalidMoveForfeit"
    TURN_LIMIT = "TurnLimit"


@dataclass(frozen=True)
class Outcome:
    rho: int
    reason: Reason

    @property
    def rewards(self) -> tuple[int, int]:
        return self.rho, -self.rho


@dataclass(frozen=True)
class GameState:
    game: str
    turn: int
    payload: Any
    terminal: bool = False
    outcome: Outcome | None = None
    seed: int = 0
    draws: int = 0


class ActionToken(NamedTuple):
    game: str
    symbol: str


def sign(x) -> int:
    return (x > 0) - (x < 0)


# ---------------------------------------------------------------------------
# Game base class
# ---------------------------------------------------------------------------


class Game(ABC):
    """Rules of one game. Subclasses set ``name``, ``alphabet`` and ``turn_limit``.

    Subclasses implement ``_initial``, ``_legal``, ``_advance`` and ``_body``;
    ``apply`` handles forfeits and the turn limit uniformly.
    """

    name: str
    alphabet: tuple[str, ...]
    turn_limit: int
    perfect_information: bool = True
    has_natural_draw: bool = False

    def __init__(self):
        self._index = {s: i for i, s in enumerate(self.alphabet)}
        self._full = tuple(range(len(self.alphabet)))

    @property
    def n_actions(self) -> int:
        return len(self.alphabet)

    def symbol_index(self, symbol: str) -> int:
        return self._index[symbol]

    # -- contract ---------------------------------------------------------

    def reset(self, seed: int) -> GameState:
        seed &= _MASK64
        payload, draws = self._initial(seed)
        return GameState(self.name, 0, payload, seed=seed, draws=draws)

    def legal_actions(self, state: GameState) -> tuple[int, ...]:
        if state.terminal:
            raise TerminalState(f"{self.name}: no legal actions in a terminal state")
        return self._legal(state)

    def is_legal(self, state: GameState, action: int) -> bool:
        return self._allows(state, action)

    def apply(self, state: GameState, action: int) -> GameState:
        if state.terminal:
            raise TerminalState(f"{self.name}: cannot act in a terminal state")
        if not 0 <= action < len(self.alphabet):
            raise AlphabetMismatch(f"{self.name}: action index {action} outside alphabet")
        role = state.turn % 2
        if not self._allows(state, action):
            return replace(
                state,
                turn=state.turn + 1,
                terminal=True,
                outcome=Outcome(1 if role == 1 else -1, Reason.INVALID_MOVE_FORFEIT),
            )
        nxt = self._advance(state, action)
        if not nxt.terminal and nxt.turn >= self.turn_limit:
            nxt = replace(nxt, terminal=True, outcome=Outcome(self._limit_rho(nxt), Reason.TURN_LIMIT))
        return nxt

    def active_role(self, state: GameState) -> int:
        if state.terminal:
            raise TerminalState(f"{self.name}: terminal state has no active role")
        return state.turn % 2

    def observe(self, state: GameState, role: int) -> str:
        if state.terminal:
            raise TerminalState(f"{self.name}: terminal state has no observation")
        if role != state.turn % 2:
            raise InactiveRole(f"{self.name}: role {role} is not active at turn {state.turn}")
        return f"{self.name}/p{role}/{self._body(state, role)}"

    def outcome(self, state: GameState) -> Outcome:
        if not state.terminal:
            raise NotTerminal(f"{self.name}: state is not terminal")
        return state.outcome

    # -- hooks ------------------------------------------------------------

    def _allows(self, state: GameState, action: int) -> bool:
        """Legality of one action; override when the legal set is large."""
        return action in self._legal(state)

    @abstractmethod
    def _initial(self, seed: int) -> tuple[Any, int]:
        """Return (payload, number of chance draws consumed)."""

    @abstractmethod
    def _legal(self, state: GameState) -> tuple[int, ...]:
        ...

    @abstractmethod
    def _advance(self, state: GameState, action: int) -> GameState:
        """Successor for a legal action (turn + 1 applied by the subclass)."""

    @abstractmethod
    def _body(self, state: GameState, role: int) -> str:
        ...

    def _limit_rho(self, state: GameState) -> int:
        return 0

    def training_return(self, state: GameState) -> float:
        """Learning signal for player 0 at a terminal state; player 1 gets its negation."""
        return float(state.outcome.rho)

    def scripts(self) -> tuple[str, ...]:
        return ()

    def params(self) -> dict:
        return {}

    def __repr__(self):
        args = ", ".join(f"{k}={v!r}" for k, v in self.params().items())
        return f"{type(self).__name__}({args})"


def _finish(state: GameState, rho: int, **changes) -> GameState:
    return replace(state, terminal=True, outcome=Outcome(rho, Reason.NATURAL_END), **changes)


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

_REGISTRY: dict[str, Callable[..., Game]] = {}


def register_game(name: str, factory: Callable[..., Game]) -> None:
    _REGISTRY[name] = factory


def registered_games() -> tuple[str, ...]:
    _ensure_builtin()
    return tuple(_REGISTRY)


def make_game(name: str, **params) -> Game:
    _ensure_builtin()
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise UnknownGame(f"unknown game {name!r}; known: {sorted(_REGISTRY)}") from None
    return factory(**params)


_DEFAULTS: dict[str, Game] = {}


def default_game(name: str) -> Game:
    if name not in _DEFAULTS:
        _DEFAULTS[name] = make_game(name)
    return _DEFAULTS[name]


def _ensure_builtin():
    if not _REGISTRY:
        from . import games  # noqa: F401  (registers on import)


# ---------------------------------------------------------------------------
# Token-level surface
# ---------------------------------------------------------------------------


def reset(game: str | Game, seed: int) -> GameState:
    g = game if isinstance(game, Game) else default_game(game)
    return g.reset(seed)


def _game_of(state: GameState) -> Game:
    return default_game(state.game)


def legal_actions(state: GameState, game: Game | None = None) -> list[ActionToken]:
    g = game or _game_of(state)
    return [ActionToken(g.name, g.alphabet[a]) for a in g.legal_actions(state)]


def apply(state: GameState, action: ActionToken, game: Game | None = None) -> GameState:
    g = game or _game_of(state)
    if action.game != g.name:
        raise AlphabetMismatch(f"action for {action.game!r} applied to {g.name!r}")
    try:
        idx = g.symbol_index(action.symbol)
    except KeyError:
        raise AlphabetMismatch(f"{action.symbol!r} is not in the {g.name} alphabet") from None
    return g.apply(state, idx)


def active_role(state: GameState) -> int:
    if state.terminal:
        raise TerminalState("terminal state has no active role")
    return state.turn % 2


def observe(state: GameState, role: int, game: Game | None = None) -> str:
    return (game or _game_of(state)).observe(state, role)


def outcome(state: GameState) -> Outcome:
    if not state.terminal:
        raise NotTerminal("state is not terminal")
    return state.outcome


# ---------------------------------------------------------------------------
# Trajectory JSONL
# ---------------------------------------------------------------------------


def play_actions(game: Game, seed: int, actions) -> list[GameState]:
    """Replay ``actions`` (indices) from ``reset(seed)``; returns every visited state."""
    states = [game.reset(seed)]
    for a in actions:
        states.append(game.apply(states[-1], a))
    return states


def trajectory_record(game: Game, seed: int, actions, extra_turns=None, **extra) -> dict:
    """Build the JSONL record for a match given as an action sequence."""
    states = play_actions(game, seed, actions)
    turns = []
    for t, (s, a) in enumerate(zip(states, actions)):
        role = t % 2
        row = {
            "t": t,
            "role": role,
            "obs_key": game.observe(s, role),
            "action": game.alphabet[a],
            "legal": a in game.legal_actions(s),
        }
        if extra_turns is not None:
            row.update(extra_turns[t])
        turns.append(row)
    final = states[-1]
    if not final.terminal:
        raise NotTerminal("action sequence does not reach a terminal state")
    rec = {
        "format": TRAJECTORY_FORMAT_VERSION,
        "game": game.name,
        "seed": seed,
        "turns": turns,
        "rho": final.outcome.rho,
        "reason": final.outcome.reason.value,
    }
    rec.update(extra)
    return rec


def dumps_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"))
