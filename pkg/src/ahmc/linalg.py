"""Exact sparse linear solving over the rationals."""

from fractions import Fraction
from typing import Dict, Hashable, List, Mapping


class SingularSystem(ArithmeticError):
    pass


def solve_sparse(rows: Mapping[Hashable, Mapping[Hashable, Fraction]],
                 rhs: Mapping[Hashable, Fraction]) -> Dict[Hashable, Fraction]:
    """Solve ``sum_j rows[i][j] * x[j] = rhs[i]`` exactly.

    ``rows`` is keyed by unknown: equation ``i`` is the one whose pivot is
    expected at column ``i`` (square system). Gauss-Jordan elimination on
    dict rows; pivots are chosen among the remaining equations so a
    structurally zero diagonal is not fatal.
    """
    eqs: List[Dict[Hashable, Fraction]] = []
    b: List[Fraction] = []
    for i, row in rows.items():
        eqs.append({j: Fraction(v) for j, v in row.items() if v != 0})
        b.append(Fraction(rhs.get(i, 0)))
    unknowns = list(rows)
    pending = set(range(len(eqs)))
    pivot_of: Dict[Hashable, int] = {}
    for col in unknowns:
        best = None
        for r in pending:
            v = eqs[r].get(col)
            if v:
                # prefer short rows to limit fill-in
                if best is None or len(eqs[r]) < len(eqs[best]):
                    best = r
        if best is None:
            raise SingularSystem(f"no pivot for unknown {col!r}")
        pending.discard(best)
        prow = eqs[best]
        inv = 1 / prow[col]
        if inv != 1:
            for j in prow:
                prow[j] *= inv
            b[best] *= inv
        for r in range(len(eqs)):
            if r == best:
                continue
            f = eqs[r].get(col)
            if not f:
                continue
            row = eqs[r]
            for j, v in prow.items():
                nv = row.get(j, 0) - f * v
                if nv:
                    row[j] = nv
                else:
                    row.pop(j, None)
            b[r] -= f * b[best]
        pivot_of[col] = best
    return {col: b[r] for col, r in pivot_of.items()}
