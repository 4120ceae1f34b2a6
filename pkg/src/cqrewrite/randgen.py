"""Seeded random instance generators for tests and experiments.

The structured generators build class membership in by construction: acyclic
queries from a random join tree, hierarchical queries from a variable
forest, free-connex queries by confining head variables to one atom.  Slice
views (subquery blocks with bridge variables in the head) make an instance
rewritable by construction.
"""

from __future__ import annotations

import random
from typing import List, Optional, Set, Tuple

from .model import (
    Atom,
    Const,
    ConjunctiveQuery,
    Database,
    Fact,
    Schema,
    Var,
    ViewSet,
    atom_vars,
    make_query,
    make_view_set,
    sorted_atoms,
    vars_of,
)
from .rewriting import bridge_vars
from .structure import is_acyclic, is_free_connex, is_hierarchical, is_q_hierarchical


def random_query(
    rng: random.Random,
    max_atoms: int = 6,
    max_vars: int = 6,
    max_arity: int = 3,
    n_relations: int = 4,
    boolean_prob: float = 0.3,
) -> ConjunctiveQuery:
    """Unstructured random query; any shape, possibly cyclic."""
    nvars = rng.randint(1, max_vars)
    pool = [Var(f"x{i}") for i in range(nvars)]
    schema: Schema = {f"R{j}": rng.randint(1, max_arity) for j in range(n_relations)}
    natoms = rng.randint(1, max_atoms)
    body: Set[Atom] = set()
    for _ in range(natoms):
        rel = rng.choice(sorted(schema))
        body.add(Atom(rel, tuple(rng.choice(pool) for _ in range(schema[rel]))))
    used = sorted(vars_of(body), key=lambda v: v.name)
    if rng.random() < boolean_prob:
        head_vars: List[Var] = []
    else:
        k = rng.randint(1, len(used))
        head_vars = rng.sample(used, k)
    return make_query(Atom("H", tuple(head_vars)), body, schema)


def random_acyclic_query(
    rng: random.Random,
    max_atoms: int = 6,
    max_arity: int = 3,
    free_connex: bool = False,
) -> ConjunctiveQuery:
    """Grow atoms along a random tree: each atom shares a subset of its
    parent's variables and fills up with fresh ones, so the construction tree
    is a join tree."""
    natoms = rng.randint(1, max_atoms)
    counter = 0

    def fresh() -> Var:
        nonlocal counter
        counter += 1
        return Var(f"x{counter}")

    atom_varsets: List[List[Var]] = []
    schema: Schema = {}
    body: Set[Atom] = set()
    for i in range(natoms):
        arity = rng.randint(1, max_arity)
        if i == 0:
            vs = [fresh() for _ in range(arity)]
        else:
            parent = atom_varsets[rng.randrange(i)]
            shared = rng.sample(parent, rng.randint(0, min(len(parent), arity)))
            vs = shared + [fresh() for _ in range(arity - len(shared))]
            rng.shuffle(vs)
        atom_varsets.append(vs)
        rel = f"R{len(schema)}"
        if schema and rng.random() < 0.3:
            cands = [r for r, a in schema.items() if a == arity]
            if cands:
                rel = rng.choice(sorted(cands))
        schema.setdefault(rel, arity)
        body.add(Atom(rel, tuple(vs)))
    used = sorted(vars_of(body), key=lambda v: v.name)
    if free_connex:
        anchor = atom_varsets[rng.randrange(len(atom_varsets))]
        head_vars = rng.sample(anchor, rng.randint(0, len(anchor)))
    else:
        head_vars = rng.sample(used, rng.randint(0, len(used)))
    q = make_query(Atom("H", tuple(head_vars)), body, schema)
    assert is_acyclic(q)[0]
    if free_connex:
        assert is_free_connex(q)[0]
    return q


def random_hierarchical_query(
    rng: random.Random,
    max_atoms: int = 5,
    max_depth: int = 3,
    q_hierarchical: bool = False,
) -> ConjunctiveQuery:
    """Atoms are root paths in a random variable forest, so the atoms(x) sets
    are nested or disjoint.  For the q-hierarchical variant the head is an
    ancestor-closed set of variables."""
    nvars = rng.randint(1, 6)
    parents: List[Optional[int]] = []
    depth: List[int] = []
    for i in range(nvars):
        if i == 0 or rng.random() < 0.3:
            parents.append(None)
            depth.append(1)
        else:
            cands = [j for j in range(i) if depth[j] < max_depth]
            if not cands:
                parents.append(None)
                depth.append(1)
            else:
                p = rng.choice(cands)
                parents.append(p)
                depth.append(depth[p] + 1)

    def path(i: int) -> List[Var]:
        out = []
        cur: Optional[int] = i
        while cur is not None:
            out.append(Var(f"x{cur}"))
            cur = parents[cur]
        return list(reversed(out))

    schema: Schema = {}
    body: Set[Atom] = set()
    chosen_nodes: List[int] = []
    for _ in range(rng.randint(1, max_atoms)):
        n = rng.randrange(nvars)
        chosen_nodes.append(n)
        vs = path(n)
        arity = len(vs)
        rel = f"P{arity}_{rng.randint(0, 2)}"
        if rel in schema and schema[rel] != arity:
            rel = f"P{arity}_{rel}"
        schema.setdefault(rel, arity)
        body.add(Atom(rel, tuple(vs)))
    used = sorted(vars_of(body), key=lambda v: v.name)
    if q_hierarchical:
        head: Set[Var] = set()
        for n in set(chosen_nodes):
            if rng.random() < 0.5:
                head.update(path(n))
        head &= set(used)
    else:
        head = set(rng.sample(used, rng.randint(0, len(used))))
    q = make_query(Atom("H", tuple(sorted(head, key=lambda v: v.name))), body, schema)
    assert is_hierarchical(q)
    if q_hierarchical:
        assert is_q_hierarchical(q)
    return q


def slice_views(
    rng: random.Random,
    q: ConjunctiveQuery,
    max_views: int = 3,
    extra_head_prob: float = 0.4,
) -> ViewSet:
    """Partition the body into blocks and expose each block as a view whose
    head contains the block's bridge variables; q is then rewritable."""
    atoms = sorted_atoms(q.body)
    rng.shuffle(atoms)
    nblocks = rng.randint(1, min(max_views, len(atoms)))
    blocks: List[List[Atom]] = [[] for _ in range(nblocks)]
    for i, a in enumerate(atoms):
        blocks[i % nblocks].append(a)
    views = []
    for i, block in enumerate(blocks):
        head_vars = set(bridge_vars(q, block))
        for v in sorted(vars_of(block) - head_vars, key=lambda w: w.name):
            if rng.random() < extra_head_prob:
                head_vars.add(v)
        head = Atom(f"V{i + 1}", tuple(sorted(head_vars, key=lambda v: v.name)))
        views.append(make_query(head, block, q.schema))
    return make_view_set(views, q.schema)


def rewritable_instance(
    rng: random.Random,
    query_kind: str = "any",
    max_atoms: int = 6,
    max_views: int = 3,
    max_arity: int = 3,
) -> Tuple[ConjunctiveQuery, ViewSet]:
    if query_kind == "acyclic":
        q = random_acyclic_query(rng, max_atoms, max_arity)
    elif query_kind == "free-connex":
        q = random_acyclic_query(rng, max_atoms, max_arity, free_connex=True)
    elif query_kind == "hierarchical":
        q = random_hierarchical_query(rng, max_atoms)
    elif query_kind == "q-hierarchical":
        q = random_hierarchical_query(rng, max_atoms, q_hierarchical=True)
    else:
        q = random_query(rng, max_atoms, max_arity=max_arity)
    return q, slice_views(rng, q, max_views)


def random_database(
    rng: random.Random,
    schema: Schema,
    max_facts: int = 20,
    domain_size: int = 4,
) -> Database:
    domain = [Const(f"c{i}") for i in range(domain_size)]
    facts: Set[Fact] = set()
    for _ in range(rng.randint(0, max_facts)):
        rel = rng.choice(sorted(schema))
        facts.add(Fact(rel, tuple(rng.choice(domain) for _ in range(schema[rel]))))
    return frozenset(facts)
