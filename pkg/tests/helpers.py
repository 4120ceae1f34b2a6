"""Shared test fixtures and independent brute-force oracles.

The oracles here are deliberately naive (exhaustive map enumeration,
nested-loop evaluation, per-atom removal) so they stay independent of the
search code they check.
"""

from __future__ import annotations

import itertools
import random
from typing import Dict, Iterable, List, Optional, Set, Tuple

from cqrewrite.model import (
    Atom,
    Const,
    ConjunctiveQuery,
    Database,
    Fact,
    Var,
    ViewSet,
    apply_substitution,
    atom_vars,
    vars_of,
)
from cqrewrite.evaluation import evaluate
from cqrewrite.textio import parse_problem, parse_query_text
from cqrewrite.randgen import random_database


# --- brute-force oracles -----------------------------------------------------


def brute_hom_exists(source: ConjunctiveQuery, target: ConjunctiveQuery, kind: str = "full") -> bool:
    """Exhaustive enumeration of all maps vars(source) -> vars(target)."""
    svars = sorted(source.all_vars, key=lambda v: v.name)
    tvars = sorted(target.all_vars, key=lambda v: v.name)
    if not svars:
        h: Dict[Var, Var] = {}
        return _hom_ok(h, source, target, kind)
    for combo in itertools.product(tvars, repeat=len(svars)):
        h = dict(zip(svars, combo))
        if _hom_ok(h, source, target, kind):
            return True
    return False


def _hom_ok(h: Dict[Var, Var], source: ConjunctiveQuery, target: ConjunctiveQuery, kind: str) -> bool:
    for a in source.body:
        if apply_substitution(h, a) not in target.body:
            return False
    if kind == "full" and apply_substitution(h, source.head) != target.head:
        return False
    return True


def brute_equivalent(q1: ConjunctiveQuery, q2: ConjunctiveQuery) -> bool:
    return brute_hom_exists(q2, q1, "full") and brute_hom_exists(q1, q2, "full")


def naive_evaluate(q: ConjunctiveQuery, db: Database) -> frozenset:
    """Nested loops over all valuations into the database's constants."""
    domain = sorted({c for f in db for c in f.args}, key=lambda c: c.name)
    qvars = sorted(q.all_vars, key=lambda v: v.name)
    out: Set[Fact] = set()
    if not qvars:
        if all(Fact(a.relation, ()) in db for a in q.body):
            out.add(Fact(q.head.relation, ()))
        return frozenset(out)
    for combo in itertools.product(domain, repeat=len(qvars)):
        val = dict(zip(qvars, combo))
        if all(Fact(a.relation, tuple(val[t] for t in a.args)) in db for a in q.body):
            out.add(Fact(q.head.relation, tuple(val[t] for t in q.head.args)))
    return frozenset(out)


def removable_atoms(q: ConjunctiveQuery) -> List[Atom]:
    """Atoms whose removal keeps the query safe and equivalent (brute force)."""
    out = []
    for atom in q.body_sorted():
        nb = q.body - {atom}
        if not nb or not q.head_vars <= vars_of(nb):
            continue
        reduced = ConjunctiveQuery(q.head, nb, q.schema)
        if brute_equivalent(q, reduced):
            out.append(atom)
    return out


def derived_database(vs: ViewSet, db: Database) -> Database:
    facts: Set[Fact] = set()
    for v in vs.views:
        facts |= evaluate(v, db)
    return frozenset(facts)


def semantic_rewriting_ok(
    q: ConjunctiveQuery,
    vs: ViewSet,
    rw: ConjunctiveQuery,
    rng: random.Random,
    n_dbs: int = 200,
    max_facts: int = 20,
    domain_size: int = 4,
) -> bool:
    """Q'(V(D)) = Q(D) on random databases."""
    for _ in range(n_dbs):
        db = random_database(rng, q.schema, max_facts, domain_size)
        if evaluate(rw, derived_database(vs, db)) != evaluate(q, db):
            return False
    return True


def semantic_check_task(args) -> bool:
    """Picklable wrapper so the oracle can fan out over processes; the seed
    makes each triple's database sample independent of scheduling."""
    q, vs, rw, seed, n_dbs = args
    return semantic_rewriting_ok(q, vs, rw, random.Random(seed), n_dbs=n_dbs)


# --- paper example fixtures --------------------------------------------------

EX_1_1 = """
query H(x,y,y') :- P(u,u',x), R(x,w), S(w), T(w,y), T(w,y').
view V1(x,w) :- P(v,v',x), R(x,w), S(w).
view V2(y,z) :- S(y), T(y,z).
"""
EX_1_1_REWRITING = "H(x,y,y') :- V1(x,w), V2(w,y), V2(w,y')."

EX_3_2 = """
query H(x,y,z) :- C(x,y,z), R(x,y), S(y,z), T(z,x).
view V1(u,v,w) :- C(u,v,w).
view V2(x,y,z,u) :- R(x,y), S(y,z), T(z,u).
"""
EX_3_2_CANDIDATE = "H(x,y,z) :- V1(x,y,z), V2(x,y,z,x)."

EX_5_1 = """
query H() :- R1(x), R2(y), S(x,z), T1(z), T2(y).
view V1(u,v) :- R1(u), R2(v).
view V2(u,v) :- S(u,v).
view V3(u,v) :- T1(u), T2(v).
"""
EX_5_1_REWRITING = "H() :- V1(x,y), V2(x,z), V3(z,y'), V3(z',y)."

EX_5_3 = """
query H(x,y,z) :- R(x,y,z), E1(x), E2(y), E3(w), S(w,z).
view V1(x,y,w) :- R(x,y,v), E1(x), E3(w), S(w,v).
view V2(x,y,z) :- R(x,y,z), E2(y).
view V3(w,z) :- S(w,z), E3(w).
"""
EX_5_3_REWRITING = "H(x,y,z) :- V1(x,y',w'), V2(x,y,z), V3(w,z)."

EX_7_1 = """
query H(x,y) :- R(x), S(y), T(x), T(y).
view V1(x,y) :- R(x), S(y).
view V2(z) :- T(z).
"""
EX_7_1_REWRITING = "H(x,y) :- V1(x,y'), V1(x',y), V2(x), V2(y)."

EX_4_2 = """
query H(x,y,z) :- R(x,y,z), T(x,v), F(v), E(w), S(w,z).
view V1(x1,y1,w1) :- R(x1,y1,u1), T(x1,v1), F(v1), E(w1), S(w1,u1).
view V2(x2,y2,z2) :- R(x2,y2,z2), F(v2).
view V3(w3,z3) :- S(w3,z3), E(w3).
"""


def weak_head_family(n: int) -> str:
    """Example 6.5's V_n with head V(x, y_1..y_n, z_1..z_n), as a problem file."""
    body = ", ".join(f"R(x,u{i},y{i}), S(x,u{i},z{i}), T(y{i})" for i in range(1, n + 1))
    head_vars = ["x"] + [f"y{i}" for i in range(1, n + 1)] + [f"z{i}" for i in range(1, n + 1)]
    view = f"view V({','.join(head_vars)}) :- {body}."
    return f"query H(x) :- R(x,u,y), S(x,u,z), T(y).\n{view}\n"


def problem(text: str):
    return parse_problem(text)


def rule(text: str) -> ConjunctiveQuery:
    return parse_query_text(text)
