"""Exact Gauss-Jordan elimination over the rationals."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence


class SingularSystemError(ArithmeticError):
    pass


def solve_exact(matrix: Sequence[Sequence], rhs: Sequence) -> list[Fraction]:
    """Solve ``matrix @ x = rhs`` for a square non-singular system, exactly."""
    n = len(matrix)
    if any(len(row) != n for row in matrix) or len(rhs) != n:
        raise ValueError("solve_exact expects a square system")
    m = [[Fraction(v) for v in row] + [Fraction(b)] for row, b in zip(matrix, rhs)]
    for col in range(n):
        pivot = next((r for r in range(col, n) if m[r][col] != 0), None)
        if pivot is None:
            raise SingularSystemError(f"matrix is singular (column {col})")
        m[col], m[pivot] = m[pivot], m[col]
        inv = 1 / m[col][col]
        m[col] = [v * inv for v in m[col]]
        for r in range(n):
            if r != col and m[r][col] != 0:
                factor = m[r][col]
                row = m[col]
                m[r] = [a - factor * b for a, b in zip(m[r], row)]
    return [m[r][n] for r in range(n)]


def as_integers(values: Sequence[Fraction], what: str = "solution") -> list[int]:
    out = []
    for v in values:
        v = Fraction(v)
        if v.denominator != 1:
            raise ArithmeticError(f"{what} has non-integer entry {v}")
        out.append(int(v))
    return out
