"""Homomorphism search, containment, equivalence, cores and inverse-on-image.

Containment follows the classical correspondence: Q1 is contained in Q2 iff
there is a full homomorphism from Q2 into Q1.  The search is backtracking
over source atoms, ordered greedily by overlap with already-bound variables,
with candidate target atoms indexed by relation symbol.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Set

from .model import (
    Atom,
    CQError,
    ConjunctiveQuery,
    Var,
    apply_substitution,
    atom_vars,
)


@dataclass
class Homomorphism:
    mapping: Dict[Var, Var]
    source: ConjunctiveQuery
    target: ConjunctiveQuery
    kind: str  # "body" or "full"


def validate_homomorphism(h: Homomorphism) -> bool:
    """Independent check of conditions (1) body containment and (2) head equality."""
    if not h.source.all_vars <= set(h.mapping):
        return False
    for a in h.source.body:
        if apply_substitution(h.mapping, a) not in h.target.body:
            return False
    if h.kind == "full":
        if apply_substitution(h.mapping, h.source.head) != h.target.head:
            return False
    return True


def _map_head(source: ConjunctiveQuery, target: ConjunctiveQuery) -> Optional[Dict[Var, Var]]:
    if source.head.relation != target.head.relation:
        return None
    if len(source.head.args) != len(target.head.args):
        return None
    h: Dict[Var, Var] = {}
    for s, t in zip(source.head.args, target.head.args):
        if s in h and h[s] != t:
            return None
        h[s] = t
    return h


def _greedy_order(atoms: List[Atom], bound: Set[Var]) -> List[Atom]:
    remaining = list(atoms)
    order: List[Atom] = []
    bound = set(bound)
    while remaining:
        # most already-bound variables first; ties keep canonical order
        best_count = max(len(atom_vars(a) & bound) for a in remaining)
        best = next(a for a in remaining if len(atom_vars(a) & bound) == best_count)
        order.append(best)
        bound |= atom_vars(best)
        remaining.remove(best)
    return order


def _search(
    order: List[Atom],
    idx: int,
    h: Dict[Var, Var],
    by_rel: Dict[str, List[Atom]],
    injective: bool,
) -> Optional[Dict[Var, Var]]:
    if idx == len(order):
        return dict(h)
    atom = order[idx]
    for cand in by_rel.get(atom.relation, ()):
        if len(cand.args) != len(atom.args):
            continue
        added: List[Var] = []
        ok = True
        for s, t in zip(atom.args, cand.args):
            cur = h.get(s)
            if cur is None:
                if injective and t in h.values():
                    ok = False
                    break
                h[s] = t
                added.append(s)
            elif cur != t:
                ok = False
                break
        if ok:
            res = _search(order, idx + 1, h, by_rel, injective)
            if res is not None:
                return res
        for s in added:
            del h[s]
    return None


def find_homomorphism(
    source: ConjunctiveQuery,
    target: ConjunctiveQuery,
    kind: str = "full",
    injective: bool = False,
) -> Optional[Homomorphism]:
    """First homomorphism under canonical search order, or None."""
    if kind == "full":
        h0 = _map_head(source, target)
        if h0 is None:
            return None
        if injective and len(set(h0.values())) != len(h0):
            return None
    elif kind == "body":
        h0 = {}
    else:
        raise ValueError(f"unknown homomorphism kind {kind!r}")
    by_rel: Dict[str, List[Atom]] = {}
    for a in target.body_sorted():
        by_rel.setdefault(a.relation, []).append(a)
    order = _greedy_order(source.body_sorted(), set(h0))
    sol = _search(order, 0, dict(h0), by_rel, injective)
    if sol is None:
        return None
    hom = Homomorphism(sol, source, target, kind)
    assert validate_homomorphism(hom)
    return hom


def contained(q1: ConjunctiveQuery, q2: ConjunctiveQuery) -> bool:
    """q1(D) subseteq q2(D) for all D, via a full homomorphism q2 -> q1."""
    if len(q1.head.args) != len(q2.head.args):
        raise CQError("ARITY_MISMATCH", "containment needs equal head arities")
    if q1.head.relation != q2.head.relation:
        raise CQError("HEAD_SYMBOL_MISMATCH", "containment needs the same head symbol")
    return find_homomorphism(q2, q1, "full") is not None


def equivalent(q1: ConjunctiveQuery, q2: ConjunctiveQuery) -> bool:
    return contained(q1, q2) and contained(q2, q1)


def isomorphic(q1: ConjunctiveQuery, q2: ConjunctiveQuery) -> bool:
    """Structural equality up to variable renaming (and body order)."""
    if q1.head.relation != q2.head.relation or len(q1.head.args) != len(q2.head.args):
        return False
    if len(q1.body) != len(q2.body) or len(q1.all_vars) != len(q2.all_vars):
        return False
    return find_homomorphism(q1, q2, "full", injective=True) is not None


def core(q: ConjunctiveQuery) -> ConjunctiveQuery:
    """Equivalent minimal query, by iterated removal of redundant body atoms.

    A removal is kept when the current query still maps homomorphically into
    the reduced one; containment the other way holds by inclusion.
    """
    current = q
    while True:
        removed = False
        for atom in current.body_sorted():
            if len(current.body) == 1:
                break
            nb = current.body - {atom}
            if not current.head_vars <= frozenset(v for a in nb for v in atom_vars(a)):
                continue
            reduced = ConjunctiveQuery(current.head, nb, current.schema)
            if find_homomorphism(current, reduced, "full") is not None:
                current = reduced
                removed = True
                break
        if not removed:
            return current


def _cycle_order(perm: Dict[Var, Var]) -> int:
    seen: Set[Var] = set()
    order = 1
    for start in perm:
        if start in seen:
            continue
        length = 0
        x = start
        while x not in seen:
            seen.add(x)
            x = perm[x]
            length += 1
        order = math.lcm(order, length)
    return order


def invert_on_image(
    q_min: ConjunctiveQuery,
    q_other: ConjunctiveQuery,
    h1: Homomorphism,
) -> Homomorphism:
    """A homomorphism h2: q_other -> q_min inverting h1 on h1(body(q_min)).

    Any full h2' back yields an automorphism phi = h2' o h1 of the minimal
    query; with k the order of phi as a variable permutation, the choice
    phi^(k-1) o h2' inverts h1 on the image.
    """
    if not (h1.kind == "full" and h1.source == q_min and h1.target == q_other and validate_homomorphism(h1)):
        raise CQError("INVALID_HOMOMORPHISM", "h1 must be a valid full homomorphism q_min -> q_other")
    h2p = find_homomorphism(q_other, q_min, "full")
    if h2p is None:
        raise CQError("NO_INVERSE", "no homomorphism back; queries are not equivalent")
    vars_min = sorted(q_min.all_vars, key=lambda v: v.name)
    phi = {x: h2p.mapping[h1.mapping[x]] for x in vars_min}
    if set(phi.values()) != set(vars_min):
        raise CQError("NOT_MINIMAL", "h2' o h1 is not an automorphism; q_min is not minimal")
    k = _cycle_order(phi)

    def phi_pow(x: Var, times: int) -> Var:
        for _ in range(times):
            x = phi[x]
        return x

    mapping = {y: phi_pow(h2p.mapping[y], k - 1) for y in q_other.all_vars}
    h2 = Homomorphism(mapping, q_other, q_min, "full")
    assert validate_homomorphism(h2)
    for a in q_min.body:
        image = apply_substitution(h1.mapping, a)
        if apply_substitution(mapping, image) != a:
            raise AssertionError(f"inverse property failed on atom {a}")
    return h2
