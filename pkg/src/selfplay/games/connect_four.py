"""Connect Four on a 6x7 grid. Role 0 drops ``x`` discs and moves first.

The grid is stored row-major with row 0 at the bottom. Alphabet: column
tokens ``c0``..``c6``. Observation body: 42 characters from ``.xo``,
bottom row first.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..core import Game, GameState, _finish

ROWS, COLS = 6, 7
_CHARS = ".xo"
_DIRS = ((0, 1), (1, 0), (1, 1), (1, -1))


@dataclass(frozen=True)
class ConnectFourState:
    grid: tuple[int, ...]
    heights: tuple[int, ...]


def wins_through(grid, row: int, col: int) -> bool:
    """True if the disc at (row, col) completes four in a line."""
    v = grid[row * COLS + col]
    for dr, dc in _DIRS:
        run = 1
        for s in (1, -1):
            r, c = row + s * dr, col + s * dc
            while 0 <= r < ROWS and 0 <= c < COLS and grid[r * COLS + c] == v:
                run += 1
                r += s * dr
                c += s * dc
        if run >= 4:
            return True
    return False


class ConnectFour(Game):
    name = "ConnectFour"
    alphabet = tuple(f"c{i}" for i in range(COLS))
    turn_limit = ROWS * COLS
    has_natural_draw = True

    def _initial(self, seed):
        return ConnectFourState((0,) * (ROWS * COLS), (0,) * COLS), 0

    def _legal(self, state):
        return tuple(c for c, h in enumerate(state.payload.heights) if h < ROWS)

    def _advance(self, state, action):
        p = state.payload
        row = p.heights[action]
        grid = list(p.grid)
        grid[row * COLS + action] = 1 if state.turn % 2 == 0 else 2
        heights = list(p.heights)
        heights[action] += 1
        payload = ConnectFourState(tuple(grid), tuple(heights))
        turn = state.turn + 1
        if wins_through(payload.grid, row, action):
            return _finish(state, 1 if state.turn % 2 == 0 else -1, turn=turn, payload=payload)
        if turn == ROWS * COLS:
            return _finish(state, 0, turn=turn, payload=payload)
        return GameState(state.game, turn, payload, seed=state.seed, draws=state.draws)

    def _body(self, state, role):
        return "".join(_CHARS[c] for c in state.payload.grid)

    def scripts(self):
        return ("win-block-else-random",)
