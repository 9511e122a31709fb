"""Independent brute-force oracles for temporal reasoning tests.

These re-derive closure and consistency by exhaustively applying the
dependency rules until nothing changes.  They deliberately share no code
with the optimized implementation under test.
"""
from __future__ import annotations


def naive_closure(
    before: set[tuple[str, str]],
    overlap: set[tuple[str, str]],
) -> tuple[set[tuple[str, str]], set[frozenset[str]]]:
    """Repeat-until-no-change application of the four normalized rules:

    BEFORE(a,b) & BEFORE(b,c)  -> BEFORE(a,c)
    BEFORE(a,b) & OVERLAP{b,c} -> BEFORE(a,c)
    OVERLAP{a,b} & BEFORE(b,c) -> BEFORE(a,c)
    OVERLAP{a,b} & OVERLAP{b,c}-> OVERLAP{a,c}   (a != c)
    """
    b_set = set(before)
    o_set = {frozenset(p) for p in overlap}
    while True:
        o_dir = {(x, y) for p in o_set for x in p for y in p if x != y}
        derived_b = {(a, d) for (a, b) in b_set for (c, d) in b_set if b == c}
        derived_b |= {(a, d) for (a, b) in b_set for (c, d) in o_dir if b == c}
        derived_b |= {(c, b) for (c, d) in o_dir for (a, b) in b_set if d == a}
        derived_o = {
            frozenset((a, d))
            for (a, b) in o_dir
            for (c, d) in o_dir
            if b == c and a != d
        }
        new_b = derived_b - b_set
        new_o = derived_o - o_set
        if not new_b and not new_o:
            return b_set, o_set
        b_set |= new_b
        o_set |= new_o


def naive_consistent(
    before: set[tuple[str, str]],
    overlap: set[tuple[str, str]],
) -> bool:
    b_star, o_star = naive_closure(before, overlap)
    for a, b in b_star:
        if a == b:
            return False
        if (b, a) in b_star:
            return False
        if frozenset((a, b)) in o_star:
            return False
    return True
