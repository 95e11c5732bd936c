"""TicTacToe on a 3x3 board. Role 0 plays X and moves first.

Cells are indexed row-major 0..8; the alphabet is the cell indices as
strings. Observation body: nine characters from ``.xo`` (full board).
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core import Game, GameState, _finish
from ..errors import IllegalPosition

EMPTY, X, O = 0, 1, 2
LINES = (
    (0, 1, 2), (3, 4, 5), (6, 7, 8),
    (0, 3, 6), (1, 4, 7), (2, 5, 8),
    (0, 4, 8), (2, 4, 6),
)
_CHARS = ".xo"


@dataclass(frozen=True)
class TicTacToeState:
    cells: tuple[int, ...]


def tictactoe_winner(cells) -> str:
    """One of ``player0``, ``player1``, ``draw``, ``ongoing``."""
    x_line = any(cells[a] == cells[b] == cells[c] == X for a, b, c in LINES)
    o_line = any(cells[a] == cells[b] == cells[c] == O for a, b, c in LINES)
    if x_line and o_line:
        raise IllegalPosition("both players hold a line")
    if x_line:
        return "player0"
    if o_line:
        return "player1"
    if all(c != EMPTY for c in cells):
        return "draw"
    return "ongoing"


def is_reachable(cells) -> bool:
    """True if ``cells`` can arise from legal alternating play starting with X."""
    nx = sum(c == X for c in cells)
    no = sum(c == O for c in cells)
    if nx - no not in (0, 1):
        return False
    x_line = any(cells[a] == cells[b] == cells[c] == X for a, b, c in LINES)
    o_line = any(cells[a] == cells[b] == cells[c] == O for a, b, c in LINES)
    if x_line and o_line:
        return False
    # the winner must have made the last move
    if x_line and nx != no + 1:
        return False
    if o_line and nx != no:
        return False
    if x_line:
        # removing some X must leave a position without an X line
        return any(
            not _has_line(cells[:i] + (EMPTY,) + cells[i + 1:], X)
            for i in range(9) if cells[i] == X
        )
    if o_line:
        return any(
            not _has_line(cells[:i] + (EMPTY,) + cells[i + 1:], O)
            for i in range(9) if cells[i] == O
        )
    return True


def _has_line(cells, v) -> bool:
    return any(cells[a] == cells[b] == cells[c] == v for a, b, c in LINES)


class TicTacToe(Game):
    name = "TicTacToe"
    alphabet = tuple(str(i) for i in range(9))
    turn_limit = 9
    has_natural_draw = True

    def _initial(self, seed):
        return TicTacToeState((EMPTY,) * 9), 0

    def _legal(self, state):
        return tuple(i for i, c in enumerate(state.payload.cells) if c == EMPTY)

    def _advance(self, state, action):
        cells = list(state.payload.cells)
        mark = X if state.turn % 2 == 0 else O
        cells[action] = mark
        cells = tuple(cells)
        turn = state.turn + 1
        payload = TicTacToeState(cells)
        if _has_line(cells, mark):
            return _finish(state, 1 if mark == X else -1, turn=turn, payload=payload)
        if turn == 9:
            return _finish(state, 0, turn=turn, payload=payload)
        return GameState(state.game, turn, payload, seed=state.seed, draws=state.draws)

    def _body(self, state, role):
        return "".join(_CHARS[c] for c in state.payload.cells)

    def state_from_cells(self, cells) -> GameState:
        """Build a non-terminal state from a board (turn = number of marks)."""
        cells = tuple(cells)
        turn = sum(c != EMPTY for c in cells)
        result = tictactoe_winner(cells)
        state = GameState(self.name, turn, TicTacToeState(cells))
        if result == "ongoing":
            return state
        rho = {"player0": 1, "player1": -1, "draw": 0}[result]
        return _finish(state, rho)

    def scripts(self):
        return ("win-block-else-random", "minimax")
