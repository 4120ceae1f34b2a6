"""Evaluation on databases, canonical databases and candidates, expansions.

The canonical candidate has the head of Q and, as body, the views evaluated
on the canonical database of Q (body atoms frozen into facts).  A rewriting
exists iff this candidate exists and is one; the containment Q into the
candidate always holds and is witnessed here by an explicit homomorphism
assembled from the evaluating valuations.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .homomorphism import Homomorphism, core, find_homomorphism, validate_homomorphism
from .model import (
    Atom,
    CQError,
    Const,
    ConjunctiveQuery,
    Database,
    Fact,
    FreshVariableSource,
    Var,
    ViewSet,
    apply_substitution,
    atom_vars,
    fact_key,
    make_query,
    sorted_atoms,
    vars_of,
)

DEFAULT_LIMIT = 100_000

Valuation = Dict[Var, Const]


@dataclass
class ViewApplication:
    """A substitution on a view's variables that never unifies a quantified
    variable with any other variable of the view; ``atom`` is the head
    instance it explains."""

    view: ConjunctiveQuery
    alpha: Dict[Var, Var]
    atom: Atom


@dataclass
class Expansion:
    query: ConjunctiveQuery
    applications: Tuple[ViewApplication, ...]


def _fact_index(db: Iterable[Fact]) -> Dict[str, List[Fact]]:
    idx: Dict[str, List[Fact]] = {}
    for f in sorted(db, key=fact_key):
        idx.setdefault(f.relation, []).append(f)
    return idx


@functools.lru_cache(maxsize=4096)
def _atom_components_cached(body: FrozenSet[Atom]) -> Tuple[Tuple[Atom, ...], ...]:
    return tuple(tuple(c) for c in _atom_components(body))


def _atom_components(atoms: Iterable[Atom]) -> List[List[Atom]]:
    """Group body atoms into maximal variable-connected components."""
    atoms = sorted_atoms(atoms)
    comp_of: Dict[Atom, int] = {}
    comps: List[List[Atom]] = []
    var_home: Dict[Var, int] = {}

    def merge(i: int, j: int) -> int:
        if i == j:
            return i
        keep, drop = min(i, j), max(i, j)
        for a in comps[drop]:
            comp_of[a] = keep
        comps[keep].extend(comps[drop])
        comps[drop] = []
        for v, c in var_home.items():
            if c == drop:
                var_home[v] = keep
        return keep

    for a in atoms:
        idx = len(comps)
        comps.append([a])
        comp_of[a] = idx
        for v in atom_vars(a):
            if v in var_home:
                idx = merge(var_home[v], comp_of[a])
            var_home[v] = idx
    return [sorted_atoms(c) for c in comps if c]


def _enum_component(
    atoms: List[Atom],
    index: Dict[str, List[Fact]],
    keep: List[Var],
) -> Dict[Tuple[Const, ...], Valuation]:
    """All satisfying valuations of one component, keyed by their projection
    onto ``keep``; the first (canonical) witness per projection is kept."""
    out: Dict[Tuple[Const, ...], Valuation] = {}
    order = atoms  # already canonical; within a component joins prune well

    def rec(i: int, val: Valuation) -> None:
        if i == len(order):
            key = tuple(val[v] for v in keep)
            out.setdefault(key, dict(val))
            return
        atom = order[i]
        for fact in index.get(atom.relation, ()):
            if len(fact.args) != len(atom.args):
                continue
            added: List[Var] = []
            ok = True
            for t, c in zip(atom.args, fact.args):
                assert isinstance(t, Var)
                cur = val.get(t)
                if cur is None:
                    val[t] = c
                    added.append(t)
                elif cur != c:
                    ok = False
                    break
            if ok:
                rec(i + 1, val)
            for t in added:
                del val[t]

    rec(0, {})
    return out


def evaluate_with_witness(
    q: ConjunctiveQuery,
    db: Database,
    limit: Optional[int] = None,
) -> Dict[Fact, Valuation]:
    """Exact set-semantics result, each fact paired with one witnessing
    valuation (total on the query's variables)."""
    index = _fact_index(db)
    hv_order = sorted(q.head_vars, key=lambda v: v.name)
    per: List[Tuple[List[Var], Dict[Tuple[Const, ...], Valuation]]] = []
    for comp in _atom_components_cached(q.body):
        keep = [v for v in hv_order if v in vars_of(comp)]
        sols = _enum_component(list(comp), index, keep)
        if not sols:
            return {}
        if limit is not None and len(sols) > limit:
            raise CQError("SIZE_LIMIT_EXCEEDED", f"more than {limit} partial results")
        per.append((keep, sols))
    results: Dict[Fact, Valuation] = {}
    proj_key = lambda kv: tuple(c.name for c in kv[0])
    for combo in itertools.product(*(sorted(sols.items(), key=proj_key) for _, sols in per)):
        val: Valuation = {}
        for _, v in combo:
            val.update(v)
        fact = Fact(q.head.relation, tuple(val[x] for x in q.head.args))
        results.setdefault(fact, val)
        if limit is not None and len(results) > limit:
            raise CQError("SIZE_LIMIT_EXCEEDED", f"more than {limit} result facts")
    return results


def evaluate(q: ConjunctiveQuery, db: Database) -> FrozenSet[Fact]:
    return frozenset(evaluate_with_witness(q, db))


def canonical_database(q: ConjunctiveQuery) -> Tuple[Database, Dict[Var, Const], Dict[Const, Var]]:
    """Body atoms frozen into facts, variables read as fresh constants;
    the bijective correspondence is returned in both directions."""
    v2c = {x: Const(x.name) for x in sorted(q.all_vars, key=lambda v: v.name)}
    c2v = {c: v for v, c in v2c.items()}
    facts = frozenset(Fact(a.relation, tuple(v2c[t] for t in a.args)) for a in q.body)
    return facts, v2c, c2v


@dataclass
class CandidateResult:
    candidate: ConjunctiveQuery
    expansion: Expansion
    hom_back: Homomorphism  # expansion -> q, built from the witnessing valuations


def expand(
    rewriting: ConjunctiveQuery,
    vs: ViewSet,
    fresh: FreshVariableSource,
) -> Expansion:
    """Inline each view atom: head variables map positionally onto the atom's
    arguments, quantified variables go to fresh ones."""
    apps: List[ViewApplication] = []
    body: Set[Atom] = set()
    for atom in rewriting.body_sorted():
        view = vs.get(atom.relation)
        if view is None:
            raise CQError("UNKNOWN_VIEW", f"no view named {atom.relation}")
        if len(atom.args) != len(view.head.args):
            raise CQError("ARITY_MISMATCH", f"atom {atom} does not match the head of view {view.head}")
        alpha: Dict[Var, Var] = {}
        for hv, arg in zip(view.head.args, atom.args):
            assert isinstance(hv, Var) and isinstance(arg, Var)
            if hv in alpha and alpha[hv] != arg:
                raise CQError(
                    "REPEATED_HEAD_MISMATCH",
                    f"view head repeats {hv} but {atom} disagrees at those positions",
                )
            alpha[hv] = arg
        for x in sorted(view.quantified_vars(), key=lambda v: v.name):
            alpha[x] = fresh.fresh()
        apps.append(ViewApplication(view, alpha, atom))
        body |= {apply_substitution(alpha, a) for a in view.body}
    query = make_query(rewriting.head, body, vs.base_schema)
    exp = Expansion(query, tuple(apps))
    validate_expansion(exp)
    return exp


def validate_expansion(exp: Expansion) -> None:
    """Structural re-check: per-application view-application property and
    quantified-variable disjointness across applications."""
    union: Set[Atom] = set()
    for app in exp.applications:
        union |= {apply_substitution(app.alpha, a) for a in app.view.body}
        qv = app.view.quantified_vars()
        for x in qv:
            for y in app.view.all_vars:
                if y != x and app.alpha.get(x, x) == app.alpha.get(y, y):
                    raise AssertionError(f"application unifies quantified {x} with {y}")
    if union != set(exp.query.body):
        raise AssertionError("expansion body is not the union of the applied view bodies")
    for i, a1 in enumerate(exp.applications):
        img1 = {a1.alpha[x] for x in a1.view.quantified_vars()}
        for j, a2 in enumerate(exp.applications):
            if i == j:
                continue
            img2 = {a2.alpha.get(y, y) for y in a2.view.all_vars}
            clash = img1 & img2
            if clash:
                raise AssertionError(f"quantified-variable disjointness violated on {clash}")


def canonical_candidate_detailed(
    q: ConjunctiveQuery,
    vs: ViewSet,
    limit: int = DEFAULT_LIMIT,
) -> Optional[CandidateResult]:
    db, v2c, c2v = canonical_database(q)
    atom_witness: Dict[Atom, Tuple[ConjunctiveQuery, Valuation]] = {}
    count = 0
    for view in vs.views:
        wit = evaluate_with_witness(view, db, limit=limit)
        count += len(wit)
        if count > limit:
            raise CQError("SIZE_LIMIT_EXCEEDED", f"candidate body exceeds {limit} derived view facts")
        for fact in sorted(wit, key=fact_key):
            atom = Atom(fact.relation, tuple(c2v[c] for c in fact.args))
            atom_witness[atom] = (view, wit[fact])
    if not atom_witness:
        return None
    body = frozenset(atom_witness)
    if not q.head_vars <= vars_of(body):
        return None
    candidate = make_query(q.head, body, vs.head_schema())
    fresh = FreshVariableSource(q.all_vars | vars_of(body))
    for v in vs.views:
        fresh.reserve(v.all_vars)
    expansion = expand(candidate, vs, fresh)
    # The containment Q into the candidate, as an explicit homomorphism from
    # the candidate's expansion back into Q, assembled from the valuations.
    hmap: Dict[Var, Var] = {}
    for app in expansion.applications:
        view, val = atom_witness[app.atom]
        assert view is app.view
        for x in sorted(view.all_vars, key=lambda v: v.name):
            y = app.alpha[x]
            tgt = c2v[val[x]]
            if y in hmap:
                assert hmap[y] == tgt, "valuation-built homomorphism disagrees on a shared variable"
            else:
                hmap[y] = tgt
    hom_back = Homomorphism(hmap, expansion.query, q, "full")
    assert validate_homomorphism(hom_back)
    return CandidateResult(candidate, expansion, hom_back)


def canonical_candidate(
    q: ConjunctiveQuery,
    vs: ViewSet,
    limit: int = DEFAULT_LIMIT,
) -> Optional[ConjunctiveQuery]:
    res = canonical_candidate_detailed(q, vs, limit)
    return None if res is None else res.candidate


@dataclass
class BaselineResult:
    q_min: ConjunctiveQuery
    candidate: ConjunctiveQuery
    expansion: Expansion
    hom_into: Homomorphism  # q_min -> expansion
    hom_back: Homomorphism  # expansion -> q_min


def baseline_with_witnesses(
    q: ConjunctiveQuery,
    vs: ViewSet,
    limit: int = DEFAULT_LIMIT,
) -> Tuple[Optional[BaselineResult], Optional[str]]:
    """Core q, build the canonical candidate and decide rewritability by the
    single containment check of the candidate into q."""
    q_min = core(q)
    detail = canonical_candidate_detailed(q_min, vs, limit)
    if detail is None:
        return None, "NO_CANDIDATE"
    hom_into = find_homomorphism(q_min, detail.expansion.query, "full")
    if hom_into is None:
        return None, "NOT_CONTAINED"
    return BaselineResult(q_min, detail.candidate, detail.expansion, hom_into, detail.hom_back), None


def decide_and_rewrite_baseline(
    q: ConjunctiveQuery,
    vs: ViewSet,
    limit: int = DEFAULT_LIMIT,
) -> Optional[ConjunctiveQuery]:
    res, _ = baseline_with_witnesses(q, vs, limit)
    return None if res is None else res.candidate
