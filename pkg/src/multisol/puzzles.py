"""Puzzle families, validity checking, and exhaustive solution enumeration.

Three constraint puzzles are supported:

* n-queens  -- place exactly n non-attacking queens on an n x n board;
  each cell takes NO_QUEEN or QUEEN.
* futoshiki -- fill an n x n grid with 1..n, no repeats in any row or
  column, honoring optional inequality constraints between adjacent cells.
* sudoku    -- fill a (box_rows*box_cols)^2 grid with 1..side, no repeats
  in any row, column, or box.

A complete board is a flat row-major vector of length r = side^2 with
values in 1..v.  A query is the same vector with BLANK (0) at unknown
positions.  Everything here is a pure function of its inputs; boards are
plain numpy int arrays and are never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ConfigError, InputError

NQUEENS = "nqueens"
FUTOSHIKI = "futoshiki"
SUDOKU = "sudoku"
KINDS = (NQUEENS, FUTOSHIKI, SUDOKU)

BLANK = 0
# n-queens cell values
NO_QUEEN = 1
QUEEN = 2

LESS_THAN = "lt"
GREATER_THAN = "gt"


@dataclass(frozen=True)
class Inequality:
    """Ordering constraint between two orthogonally adjacent cells.

    `left` and `right` are flat cell indices; relation LESS_THAN means
    value[left] < value[right], GREATER_THAN the reverse.
    """

    left: int
    right: int
    relation: str

    def holds(self, values) -> bool:
        if self.relation == LESS_THAN:
            return values[self.left] < values[self.right]
        return values[self.left] > values[self.right]


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    n: int = 0
    box_rows: int = 0
    box_cols: int = 0
    inequalities: tuple[Inequality, ...] = field(default=())

    @staticmethod
    def nqueens(n: int) -> "TaskSpec":
        return TaskSpec(kind=NQUEENS, n=n)

    @staticmethod
    def futoshiki(n: int, inequalities: tuple[Inequality, ...] = ()) -> "TaskSpec":
        return TaskSpec(kind=FUTOSHIKI, n=n, inequalities=tuple(inequalities))

    @staticmethod
    def sudoku(box_rows: int, box_cols: int) -> "TaskSpec":
        return TaskSpec(kind=SUDOKU, box_rows=box_rows, box_cols=box_cols)

    @property
    def side(self) -> int:
        if self.kind == SUDOKU:
            return self.box_rows * self.box_cols
        return self.n

    def geometry(self) -> dict:
        """JSON-ready geometry echo (inequalities excluded; they are per query)."""
        if self.kind == SUDOKU:
            return {"kind": self.kind, "box_rows": self.box_rows, "box_cols": self.box_cols}
        return {"kind": self.kind, "n": self.n}

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown task kind: {self.kind!r}")
        if self.kind == SUDOKU:
            if self.box_rows < 1 or self.box_cols < 1:
                raise ConfigError("sudoku box geometry must be positive")
        elif self.n < 1:
            raise ConfigError(f"{self.kind} board size must be positive")
        if self.kind != FUTOSHIKI and self.inequalities:
            raise ConfigError("inequality constraints only apply to futoshiki")
        side = self.side
        for ineq in self.inequalities:
            if ineq.relation not in (LESS_THAN, GREATER_THAN):
                raise ConfigError(f"bad inequality relation {ineq.relation!r}")
            for cell in (ineq.left, ineq.right):
                if not 0 <= cell < side * side:
                    raise ConfigError(f"inequality cell {cell} out of range")
            if ineq.left == ineq.right:
                raise ConfigError("inequality endpoints must differ")
            ra, ca = divmod(ineq.left, side)
            rb, cb = divmod(ineq.right, side)
            if abs(ra - rb) + abs(ca - cb) != 1:
                raise ConfigError(
                    f"inequality cells {ineq.left},{ineq.right} are not adjacent")


def dims(task: TaskSpec) -> tuple[int, int]:
    """Output dimension r and vocabulary size v for a task."""
    task.validate()
    side = task.side
    if task.kind == NQUEENS:
        return side * side, 2
    return side * side, side


def empty_query(task: TaskSpec) -> np.ndarray:
    r, _ = dims(task)
    return np.zeros(r, dtype=np.int8)


def _check_length(task: TaskSpec, values, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.int8)
    r, _ = dims(task)
    if arr.shape != (r,):
        raise InputError(f"{name} must have length {r}, got shape {arr.shape}")
    return arr


def is_valid(task: TaskSpec, y) -> bool:
    """True iff the complete assignment y satisfies every task constraint."""
    y = _check_length(task, y, "assignment")
    r, v = dims(task)
    if ((y < 1) | (y > v)).any():
        return False
    side = task.side
    grid = y.reshape(side, side)
    if task.kind == NQUEENS:
        queens = np.argwhere(grid == QUEEN)
        if len(queens) != side:
            return False
        for i in range(len(queens)):
            for j in range(i + 1, len(queens)):
                dr = int(queens[i][0]) - int(queens[j][0])
                dc = int(queens[i][1]) - int(queens[j][1])
                if dr == 0 or dc == 0 or abs(dr) == abs(dc):
                    return False
        return True
    # latin-square core shared by futoshiki and sudoku
    for i in range(side):
        if len(set(grid[i, :])) != side or len(set(grid[:, i])) != side:
            return False
    if task.kind == FUTOSHIKI:
        return all(ineq.holds(y) for ineq in task.inequalities)
    for br in range(0, side, task.box_rows):
        for bc in range(0, side, task.box_cols):
            box = grid[br:br + task.box_rows, bc:bc + task.box_cols]
            if len(set(box.ravel())) != side:
                return False
    return True


def respects_givens(x, y) -> bool:
    """True iff y agrees with x on every non-blank position."""
    x = np.asarray(x)
    y = np.asarray(y)
    if x.shape != y.shape:
        raise InputError(f"shape mismatch: query {x.shape} vs assignment {y.shape}")
    given = x != BLANK
    return bool((y[given] == x[given]).all())


@lru_cache(maxsize=64)
def _complete_grids(task: TaskSpec) -> tuple[tuple[int, ...], ...]:
    """All valid complete boards for a task, in canonical order (cached)."""
    base = task if task.kind != FUTOSHIKI else TaskSpec.futoshiki(task.n)
    sols = enumerate_solutions(base, empty_query(base))
    return tuple(tuple(int(c) for c in s) for s in sols)


def complete_grids(task: TaskSpec) -> list[np.ndarray]:
    return [np.array(g, dtype=np.int8) for g in _complete_grids(task)]


def enumerate_solutions(task: TaskSpec, x, cap: int | None = None) -> list[np.ndarray]:
    """All complete valid assignments consistent with the query x.

    Returned in lexicographic order by value vector.  When `cap` is given
    the search stops after cap + 1 solutions, so callers can detect "more
    than cap" without paying for the full enumeration (the result is still
    a lexicographic prefix).
    """
    x = _check_length(task, x, "query")
    _, v = dims(task)
    if ((x < 0) | (x > v)).any():
        raise InputError(f"query values must be blank or in 1..{v}")
    if cap is not None and cap < 0:
        raise InputError("cap must be nonnegative")
    limit = None if cap is None else cap + 1
    if task.kind == NQUEENS:
        sols = _enumerate_nqueens(task, x, limit)
    else:
        sols = _enumerate_cellwise(task, x, limit)
    sols.sort()
    return [np.array(s, dtype=np.int8) for s in sols]


def _enumerate_nqueens(task: TaskSpec, x, limit) -> list[tuple[int, ...]]:
    # exactly one queen per row, so branch on the queen column row by row
    n = task.n
    grid = x.reshape(n, n)
    out: list[tuple[int, ...]] = []
    cols_used = [False] * n
    placed: list[int] = []

    def place(row: int) -> bool:
        if row == n:
            out.append(_board_from_queens(n, placed, grid))
            return limit is not None and len(out) >= limit
        given_q = [c for c in range(n) if grid[row, c] == QUEEN]
        if len(given_q) > 1:
            return False
        candidates = given_q if given_q else [
            c for c in range(n) if grid[row, c] == BLANK]
        for col in candidates:
            if cols_used[col]:
                continue
            if any(abs(row - r2) == abs(col - c2)
                   for r2, c2 in enumerate(placed)):
                continue
            cols_used[col] = True
            placed.append(col)
            done = place(row + 1)
            placed.pop()
            cols_used[col] = False
            if done:
                return True
        return False

    place(0)
    return out


def _board_from_queens(n: int, cols: list[int], grid) -> tuple[int, ...]:
    board = np.full((n, n), NO_QUEEN, dtype=np.int8)
    for r, c in enumerate(cols):
        board[r, c] = QUEEN
    return tuple(int(v) for v in board.ravel())


def _enumerate_cellwise(task: TaskSpec, x, limit) -> list[tuple[int, ...]]:
    side = task.side
    r = side * side
    values = [int(v) for v in x]
    out: list[tuple[int, ...]] = []

    ineqs_by_cell: dict[int, list[Inequality]] = {}
    for ineq in task.inequalities:
        last = max(ineq.left, ineq.right)
        ineqs_by_cell.setdefault(last, []).append(ineq)

    def consistent(cell: int, val: int) -> bool:
        row, col = divmod(cell, side)
        for c2 in range(row * side, row * side + side):
            if c2 != cell and values[c2] == val:
                return False
        for c2 in range(col, r, side):
            if c2 != cell and values[c2] == val:
                return False
        if task.kind == SUDOKU:
            br = (row // task.box_rows) * task.box_rows
            bc = (col // task.box_cols) * task.box_cols
            for r2 in range(br, br + task.box_rows):
                for cc in range(bc, bc + task.box_cols):
                    c2 = r2 * side + cc
                    if c2 != cell and values[c2] == val:
                        return False
        return True

    def ineqs_ok(cell: int) -> bool:
        return all(ineq.holds(values) for ineq in ineqs_by_cell.get(cell, ()))

    def fill(cell: int) -> bool:
        if cell == r:
            out.append(tuple(values))
            return limit is not None and len(out) >= limit
        if values[cell] != BLANK:
            if not consistent(cell, values[cell]) or not ineqs_ok(cell):
                return False
            return fill(cell + 1)
        for val in range(1, side + 1):
            if not consistent(cell, val):
                continue
            values[cell] = val
            if ineqs_ok(cell):
                done = fill(cell + 1)
                if done:
                    values[cell] = BLANK
                    return True
            values[cell] = BLANK
        return False

    fill(0)
    return out
