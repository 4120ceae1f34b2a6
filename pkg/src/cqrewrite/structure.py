"""Structural classification of conjunctive queries.

Acyclicity is witnessed by a join tree built with GYO ear removal;
free-connexness re-runs the same construction on body plus head atom.
Hierarchical and q-hierarchical are the direct pairwise variable tests.
The cover graph and its components yield the weak head arity.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .model import (
    Atom,
    ConjunctiveQuery,
    Var,
    atom_key,
    atom_vars,
    sorted_atoms,
    vars_of,
)

Edge = Tuple[Atom, Atom]


def _edge(a: Atom, b: Atom) -> Edge:
    return (a, b) if atom_key(a) <= atom_key(b) else (b, a)


def _edge_key(e: Edge):
    return (atom_key(e[0]), atom_key(e[1]))


@dataclass(frozen=True)
class JoinTree:
    nodes: FrozenSet[Atom]
    edges: FrozenSet[Edge]


@dataclass(frozen=True)
class CoverGraph:
    nodes: FrozenSet[Atom]
    edges: FrozenSet[Edge]


def adjacency(nodes: Iterable[Atom], edges: Iterable[Edge]) -> Dict[Atom, List[Atom]]:
    adj: Dict[Atom, List[Atom]] = {n: [] for n in nodes}
    for a, b in sorted(edges, key=_edge_key):
        adj[a].append(b)
        adj[b].append(a)
    for n in adj:
        adj[n].sort(key=atom_key)
    return adj


def graph_components(nodes: Iterable[Atom], edges: Iterable[Edge]) -> List[FrozenSet[Atom]]:
    """Connected components, ordered by their canonically smallest atom."""
    adj = adjacency(nodes, edges)
    seen: Set[Atom] = set()
    comps: List[FrozenSet[Atom]] = []
    for start in sorted_atoms(adj):
        if start in seen:
            continue
        comp = {start}
        stack = [start]
        while stack:
            cur = stack.pop()
            for nxt in adj[cur]:
                if nxt not in comp:
                    comp.add(nxt)
                    stack.append(nxt)
        seen |= comp
        comps.append(frozenset(comp))
    return comps


def tree_induced_components(tree: JoinTree, atoms: Iterable[Atom]) -> List[FrozenSet[Atom]]:
    """Components of the subgraph of ``tree`` induced by ``atoms``."""
    atoms = frozenset(atoms)
    sub_edges = [e for e in tree.edges if e[0] in atoms and e[1] in atoms]
    return graph_components(atoms, sub_edges)


def is_join_tree(tree: JoinTree) -> bool:
    """Independent validator: tree shape plus the variable path property."""
    nodes = list(tree.nodes)
    if not nodes:
        return False
    if len(tree.edges) != len(nodes) - 1:
        return False
    for a, b in tree.edges:
        if a not in tree.nodes or b not in tree.nodes or a == b:
            return False
    comps = graph_components(tree.nodes, tree.edges)
    if len(comps) != 1:
        return False
    for x in sorted(vars_of(nodes), key=lambda v: v.name):
        holding = frozenset(a for a in nodes if x in atom_vars(a))
        if len(tree_induced_components(tree, holding)) != 1:
            return False
    return True


def gyo_join_tree(atoms: Iterable[Atom]) -> Optional[JoinTree]:
    """GYO ear removal; returns a join tree iff the atom set is alpha-acyclic.

    An ear is an atom whose variables, after dropping those unique to it, are
    covered by a single other atom; ties break by canonical atom order and the
    edge links the ear to its witness.
    """
    atoms = sorted_atoms(set(atoms))
    if not atoms:
        raise ValueError("gyo_join_tree needs a non-empty atom set")
    nodes = frozenset(atoms)
    remaining = list(atoms)
    edges: Set[Edge] = set()
    while len(remaining) > 1:
        ear = None
        for i, a in enumerate(remaining):
            others = remaining[:i] + remaining[i + 1:]
            shared = atom_vars(a) & vars_of(others)
            for b in others:
                if shared <= atom_vars(b):
                    ear = (a, b)
                    break
            if ear:
                break
        if ear is None:
            return None
        a, b = ear
        remaining.remove(a)
        edges.add(_edge(a, b))
    tree = JoinTree(nodes, frozenset(edges))
    assert is_join_tree(tree), "GYO produced a tree violating the path property"
    return tree


def is_acyclic(q: ConjunctiveQuery) -> Tuple[bool, Optional[JoinTree]]:
    tree = gyo_join_tree(q.body)
    return (tree is not None, tree)


def is_free_connex(q: ConjunctiveQuery) -> Tuple[bool, Optional[JoinTree]]:
    """Acyclic, and still acyclic with the head joined in as an ordinary atom."""
    if gyo_join_tree(q.body) is None:
        return (False, None)
    tree = gyo_join_tree(set(q.body) | {q.head})
    return (tree is not None, tree)


def _atoms_by_var(q: ConjunctiveQuery) -> Dict[Var, FrozenSet[Atom]]:
    out: Dict[Var, Set[Atom]] = {}
    for a in q.body:
        for x in atom_vars(a):
            out.setdefault(x, set()).add(a)
    return {x: frozenset(s) for x, s in out.items()}

def is_hierarchical(q: ConjunctiveQuery) -> bool:
    av = _atoms_by_var(q)
    for x, y in combinations(sorted(av, key=lambda v: v.name), 2):
        sx, sy = av[x], av[y]
        if not (sx <= sy or sy <= sx or sx.isdisjoint(sy)):
            return False
    return True


def is_q_hierarchical(q: ConjunctiveQuery) -> bool:
    if not is_hierarchical(q):
        return False
    av = _atoms_by_var(q)
    hv = q.head_vars
    for x in av:
        for y in av:
            if x is not y and av[x] < av[y] and x in hv and y not in hv:
                return False
    return True


def cover_graph(q: ConjunctiveQuery) -> CoverGraph:
    """Nodes are body atoms; edges join atoms sharing a non-head variable."""
    hv = q.head_vars
    atoms = q.body_sorted()
    edges: Set[Edge] = set()
    for a, b in combinations(atoms, 2):
        if (atom_vars(a) & atom_vars(b)) - hv:
            edges.add(_edge(a, b))
    return CoverGraph(frozenset(atoms), frozenset(edges))


def weak_head_arity(q: ConjunctiveQuery) -> Tuple[int, List[FrozenSet[Atom]]]:
    """Smallest k admitting a body partition whose blocks share only head
    variables and carry at most k head variables each; the cover-graph
    components are a witnessing partition."""
    g = cover_graph(q)
    comps = graph_components(g.nodes, g.edges)
    hv = q.head_vars
    k = max((len(vars_of(c) & hv) for c in comps), default=0)
    return k, comps


def validate_weak_head_partition(q: ConjunctiveQuery, k: int, partition: Iterable[FrozenSet[Atom]]) -> bool:
    """Direct check of the two weak-head-arity partition conditions."""
    blocks = list(partition)
    union: Set[Atom] = set()
    total = 0
    for b in blocks:
        union |= b
        total += len(b)
    if union != set(q.body) or total != len(q.body):
        return False
    hv = q.head_vars
    for b in blocks:
        if len(vars_of(b) & hv) > k:
            return False
    for b1, b2 in combinations(blocks, 2):
        if not (vars_of(b1) & vars_of(b2)) <= hv:
            return False
    return True


@dataclass
class ClassReport:
    acyclic: bool
    free_connex: bool
    hierarchical: bool
    q_hierarchical: bool
    weak_head_arity: int
    join_tree: Optional[JoinTree] = None
    free_connex_tree: Optional[JoinTree] = None

    def to_json(self) -> dict:
        return {
            "acyclic": self.acyclic,
            "free_connex": self.free_connex,
            "hierarchical": self.hierarchical,
            "q_hierarchical": self.q_hierarchical,
            "weak_head_arity": self.weak_head_arity,
        }


def classify(q: ConjunctiveQuery) -> ClassReport:
    ac, tree = is_acyclic(q)
    fc, tree_plus = is_free_connex(q)
    hi = is_hierarchical(q)
    qh = is_q_hierarchical(q)
    k, _ = weak_head_arity(q)
    return ClassReport(ac, fc, hi, qh, k, tree, tree_plus)
