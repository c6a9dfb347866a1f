"""Pure-Python edit-distance kernel (fallback for the compiled extension).

Same algorithm and tie-breaking as ``_editdist.pyx``: two-row Levenshtein
DP over integer id sequences, recovering the operation decomposition with
a fixed preference order of substitution, then deletion, then insertion.
"""
from __future__ import annotations

from typing import Sequence


def edit_ops(ref: Sequence[int], hyp: Sequence[int]) -> tuple[int, int, int]:
    """Return (substitutions, insertions, deletions) turning ``ref`` into ``hyp``.

    The total is the Levenshtein distance with unit costs. Memory is
    O(len(hyp)); only two DP rows are kept, each cell carrying its
    accumulated operation counts so no backtrace matrix is needed.
    """
    m, n = len(ref), len(hyp)
    # Row cells: (distance, subs, ins, dels). Row 0: j insertions.
    prev = [(j, 0, j, 0) for j in range(n + 1)]
    for i in range(1, m + 1):
        cur = [(i, 0, 0, i)] + [(0, 0, 0, 0)] * n
        ri = ref[i - 1]
        for j in range(1, n + 1):
            cost = 0 if ri == hyp[j - 1] else 1
            d_diag = prev[j - 1][0] + cost
            d_up = prev[j][0] + 1
            d_left = cur[j - 1][0] + 1
            # Preference on ties: substitution/match, then deletion, then
            # insertion, so decompositions are reproducible.
            if d_diag <= d_up and d_diag <= d_left:
                _, s, ins, dl = prev[j - 1]
                cur[j] = (d_diag, s + cost, ins, dl)
            elif d_up <= d_left:
                _, s, ins, dl = prev[j]
                cur[j] = (d_up, s, ins, dl + 1)
            else:
                _, s, ins, dl = cur[j - 1]
                cur[j] = (d_left, s, ins + 1, dl)
        prev = cur
    _, s, ins, dl = prev[n]
    return s, ins, dl
