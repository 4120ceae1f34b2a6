"""Core value types: terms, atoms, schemas, queries, views and databases.

Every value is immutable after construction.  The only stateful object is
FreshVariableSource, which is confined to a single pipeline invocation.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, List, Mapping, Optional, Tuple, Union


class CQError(Exception):
    """Error carrying a stable machine-readable code."""

    def __init__(self, code: str, message: str):
        super().__init__(f"{code}: {message}")
        self.code = code
        self.message = message


@dataclass(frozen=True)
class Var:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Const:
    name: str

    def __str__(self) -> str:
        return self.name


Term = Union[Var, Const]

# Relation symbol -> arity.  Treated as immutable by convention.
Schema = Dict[str, int]

# Partial variable mapping; variables outside the domain are fixed points.
Subst = Mapping[Var, Term]


def term_key(t: Term) -> Tuple[int, str]:
    return (0 if isinstance(t, Var) else 1, t.name)


@dataclass(frozen=True)
class Atom:
    relation: str
    args: Tuple[Term, ...]

    def __str__(self) -> str:
        return f"{self.relation}({','.join(str(a) for a in self.args)})"


def atom_key(a: Atom):
    return (a.relation, len(a.args), tuple(term_key(t) for t in a.args))


def sorted_atoms(atoms: Iterable[Atom]) -> List[Atom]:
    return sorted(atoms, key=atom_key)


def atom_vars(a: Atom) -> FrozenSet[Var]:
    return frozenset(t for t in a.args if isinstance(t, Var))


def vars_of(atoms: Iterable[Atom]) -> FrozenSet[Var]:
    out: set = set()
    for a in atoms:
        out.update(atom_vars(a))
    return frozenset(out)


@dataclass(frozen=True)
class ConjunctiveQuery:
    """A rule head <- body over ``schema``.

    Equality and hashing are structural on (head, body); the schema is carried
    along for validation but does not distinguish queries.
    """

    head: Atom
    body: FrozenSet[Atom]
    schema: Schema = field(compare=False, repr=False)

    @property
    def head_vars(self) -> FrozenSet[Var]:
        return atom_vars(self.head)

    @property
    def all_vars(self) -> FrozenSet[Var]:
        return vars_of(self.body) | atom_vars(self.head)

    @property
    def is_boolean(self) -> bool:
        return len(self.head.args) == 0

    def body_sorted(self) -> List[Atom]:
        return sorted_atoms(self.body)

    def quantified_vars(self) -> FrozenSet[Var]:
        return vars_of(self.body) - atom_vars(self.head)

    def __str__(self) -> str:
        body = ", ".join(str(a) for a in self.body_sorted())
        return f"{self.head} :- {body}."


# A view is just a query whose head relation lives in the derived schema.
View = ConjunctiveQuery


def validate_query(q: ConjunctiveQuery) -> None:
    """Re-check all well-formedness invariants of a constructed query."""
    make_query(q.head, q.body, q.schema)


def make_query(head: Atom, body: Iterable[Atom], schema: Schema) -> ConjunctiveQuery:
    """Validate and build a query; raises CQError with a distinct code per defect."""
    body_set = frozenset(body)
    if not body_set:
        raise CQError("EMPTY_BODY", "a query needs a positive number of body atoms")
    for a in itertools.chain([head], body_set):
        for t in a.args:
            if not isinstance(t, Var):
                raise CQError("CONSTANT_IN_QUERY", f"constant {t} in atom {a}; query atoms range over variables only")
    for a in body_set:
        if a.relation not in schema:
            raise CQError("UNKNOWN_RELATION", f"body relation {a.relation} is not in the schema")
        if schema[a.relation] != len(a.args):
            raise CQError(
                "ARITY_MISMATCH",
                f"atom {a} has arity {len(a.args)} but schema declares {schema[a.relation]}",
            )
    if head.relation in schema or any(a.relation == head.relation for a in body_set):
        raise CQError("HEAD_IN_BODY", f"head symbol {head.relation} also occurs as a body relation")
    missing = atom_vars(head) - vars_of(body_set)
    if missing:
        names = ",".join(sorted(v.name for v in missing))
        raise CQError("UNSAFE_QUERY", f"head variables {names} do not occur in the body")
    return ConjunctiveQuery(head, body_set, dict(schema))


@dataclass(frozen=True)
class ViewSet:
    """An ordered set of views over one base schema.

    Head symbols are pairwise distinct and disjoint from the base schema;
    construction via make_view_set renames variables so that no two views
    share a variable name.
    """

    views: Tuple[ConjunctiveQuery, ...]
    base_schema: Schema = field(compare=False, repr=False)

    def __iter__(self) -> Iterator[ConjunctiveQuery]:
        return iter(self.views)

    def __len__(self) -> int:
        return len(self.views)

    def get(self, name: str) -> Optional[ConjunctiveQuery]:
        for v in self.views:
            if v.head.relation == name:
                return v
        return None

    def names(self) -> List[str]:
        return [v.head.relation for v in self.views]

    def head_schema(self) -> Schema:
        return {v.head.relation: len(v.head.args) for v in self.views}


def _first_occurrence_vars(q: ConjunctiveQuery) -> List[Var]:
    seen: List[Var] = []
    for atom in itertools.chain([q.head], q.body_sorted()):
        for t in atom.args:
            if isinstance(t, Var) and t not in seen:
                seen.append(t)
    return seen


def rename_query(q: ConjunctiveQuery, ren: Subst) -> ConjunctiveQuery:
    head = apply_substitution(ren, q.head)
    body = frozenset(apply_substitution(ren, a) for a in q.body)
    return ConjunctiveQuery(head, body, q.schema)


def make_view_set(views: Iterable[ConjunctiveQuery], base_schema: Schema) -> ViewSet:
    views = tuple(views)
    seen_names: set = set()
    for v in views:
        if v.head.relation in seen_names:
            raise CQError("DUPLICATE_VIEW", f"two views named {v.head.relation}")
        if v.head.relation in base_schema:
            raise CQError("VIEW_NAME_IN_SCHEMA", f"view name {v.head.relation} collides with a base relation")
        seen_names.add(v.head.relation)
        make_query(v.head, v.body, base_schema)
    normalized = []
    used: set = set()
    for v in views:
        ren: Dict[Var, Var] = {}
        own = {x.name for x in v.all_vars}
        for x in _first_occurrence_vars(v):
            if x.name in used:
                k = 2
                while f"{x.name}_{k}" in used or f"{x.name}_{k}" in own:
                    k += 1
                ren[x] = Var(f"{x.name}_{k}")
                own.add(f"{x.name}_{k}")
        nv = rename_query(v, ren) if ren else v
        used.update(x.name for x in nv.all_vars)
        normalized.append(nv)
    return ViewSet(tuple(normalized), dict(base_schema))


@dataclass(frozen=True)
class Fact:
    relation: str
    args: Tuple[Const, ...]

    def __str__(self) -> str:
        return f"{self.relation}({','.join(str(a) for a in self.args)})"


def fact_key(f: Fact):
    return (f.relation, len(f.args), tuple(c.name for c in f.args))


Database = FrozenSet[Fact]


def make_database(facts: Iterable[Fact], schema: Schema) -> Database:
    out = frozenset(facts)
    for f in out:
        if f.relation not in schema:
            raise CQError("UNKNOWN_RELATION", f"fact relation {f.relation} is not in the schema")
        if schema[f.relation] != len(f.args):
            raise CQError("ARITY_MISMATCH", f"fact {f} does not match arity {schema[f.relation]}")
    return out


def subst_term(s: Subst, t: Term) -> Term:
    if isinstance(t, Var):
        return s.get(t, t)
    return t


def apply_substitution(s: Subst, a: Atom) -> Atom:
    """Map each argument of the atom; unmapped variables are fixed points."""
    return Atom(a.relation, tuple(subst_term(s, t) for t in a.args))


def apply_to_atoms(s: Subst, atoms: Iterable[Atom]) -> FrozenSet[Atom]:
    return frozenset(apply_substitution(s, a) for a in atoms)


def compose(s2: Subst, s1: Subst) -> Dict[Var, Term]:
    """The substitution applying s1 first, then s2."""
    out: Dict[Var, Term] = {x: subst_term(s2, t) for x, t in s1.items()}
    for x, t in s2.items():
        if x not in s1:
            out[x] = t
    return out


class FreshVariableSource:
    """Deterministic counter-based variable generator.

    Never emits a name from the declared in-use set, and registers each
    emitted name so successive draws are pairwise distinct.
    """

    def __init__(self, in_use: Iterable = (), prefix: str = "_f", start: int = 1):
        self._used = {x.name if isinstance(x, Var) else str(x) for x in in_use}
        self._prefix = prefix
        self._next = start

    def reserve(self, names: Iterable) -> None:
        self._used.update(x.name if isinstance(x, Var) else str(x) for x in names)

    def fresh(self) -> Var:
        while True:
            name = f"{self._prefix}{self._next}"
            self._next += 1
            if name not in self._used:
                self._used.add(name)
                return Var(name)
