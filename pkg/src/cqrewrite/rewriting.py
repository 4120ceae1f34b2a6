"""Cover descriptions and partitions, and the structure-preserving pipelines.

A cover description (A, V, alpha, psi) certifies that the atoms A of the
query can be produced by one application of view V; a cover partition of the
whole body characterises rewritability.  Extraction recovers a partition
from any verified rewriting, consistency renaming confines cross-application
sharing to bridge variables, and the splitting steps refine descriptions so
the induced rewriting stays in the query's structural class.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Dict, FrozenSet, Iterable, List, Optional, Set, Tuple

from .evaluation import (
    DEFAULT_LIMIT,
    Expansion,
    ViewApplication,
    baseline_with_witnesses,
    expand,
    validate_expansion,
)
from .homomorphism import (
    Homomorphism,
    core,
    find_homomorphism,
    invert_on_image,
)
from .model import (
    Atom,
    CQError,
    ConjunctiveQuery,
    FreshVariableSource,
    Schema,
    Var,
    ViewSet,
    apply_substitution,
    atom_key,
    atom_vars,
    make_query,
    make_view_set,
    sorted_atoms,
    vars_of,
)
from .structure import (
    ClassReport,
    JoinTree,
    adjacency,
    classify,
    graph_components,
    gyo_join_tree,
    is_acyclic,
    is_free_connex,
    is_hierarchical,
    is_q_hierarchical,
    tree_induced_components,
    weak_head_arity,
)


@dataclass
class CoverDescription:
    atoms: FrozenSet[Atom]
    view: ConjunctiveQuery
    alpha: Dict[Var, Var]
    psi: Dict[Var, Var]


@dataclass
class CoverPartition:
    descriptions: Tuple[CoverDescription, ...]
    query: ConjunctiveQuery
    consistent: bool = False


def bridge_vars(q: ConjunctiveQuery, atoms: Iterable[Atom]) -> FrozenSet[Var]:
    """Variables of ``atoms`` that also occur in the head of q or in a body
    atom outside ``atoms``."""
    atoms = frozenset(atoms)
    if not atoms <= q.body:
        raise CQError("NOT_A_SUBSET", "bridge variables are defined for subsets of the body")
    rest = q.body - atoms
    return vars_of(atoms) & (q.head_vars | vars_of(rest))


def applied_view_vars(cd: CoverDescription) -> FrozenSet[Var]:
    """Variables of alpha(V), i.e. the range of alpha over the view's variables."""
    return frozenset(cd.alpha.get(x, x) for x in cd.view.all_vars)


def head_image_vars(cd: CoverDescription) -> FrozenSet[Var]:
    return frozenset(cd.alpha.get(x, x) for x in atom_vars(cd.view.head))


def applied_body(cd: CoverDescription) -> FrozenSet[Atom]:
    return frozenset(apply_substitution(cd.alpha, a) for a in cd.view.body)


def validate_cover_description(cd: CoverDescription, q: ConjunctiveQuery) -> List[Tuple[int, str]]:
    """Check the four defining conditions; violations are data, keyed by
    condition number (0 flags structural defects of the tuple itself)."""
    viol: List[Tuple[int, str]] = []
    if not cd.atoms <= q.body:
        viol.append((0, "atom set is not a subset of the query body"))
        return viol
    for x in sorted(cd.view.quantified_vars(), key=lambda v: v.name):
        for y in sorted(cd.view.all_vars, key=lambda v: v.name):
            if y != x and cd.alpha.get(x, x) == cd.alpha.get(y, y):
                viol.append((0, f"alpha unifies quantified variable {x} with {y}"))
    if not cd.atoms <= applied_body(cd):
        viol.append((1, "atoms are not covered by alpha(body(V))"))
    if not bridge_vars(q, cd.atoms) <= head_image_vars(cd):
        viol.append((2, "bridge variables escape alpha(vars(head(V)))"))
    mapped = {apply_substitution(cd.psi, a) for a in applied_body(cd)}
    if not mapped <= q.body:
        viol.append((3, "psi is not a body homomorphism from alpha(V) to the query"))
    for x in sorted(vars_of(cd.atoms), key=lambda v: v.name):
        if cd.psi.get(x, x) != x:
            viol.append((4, f"psi moves {x}, a variable of the covered atoms"))
            break
    return viol


def _consistency_violations(
    descs: List[CoverDescription],
    q: ConjunctiveQuery,
) -> List[Tuple[int, int, Var]]:
    """Triples (j, i, z): variable z of alpha_j(V_j) lies in the range of
    another alpha_i without being a bridge variable of A_j."""
    out: List[Tuple[int, int, Var]] = []
    ranges = [applied_view_vars(cd) for cd in descs]
    bridges = [bridge_vars(q, cd.atoms) for cd in descs]
    for j in range(len(descs)):
        for i in range(len(descs)):
            if i == j:
                continue
            shared = ranges[j] & ranges[i]
            for z in sorted(shared, key=lambda v: v.name):
                if z not in bridges[j]:
                    out.append((j, i, z))
    return out


def validate_cover_partition(cp: CoverPartition) -> List[str]:
    problems: List[str] = []
    union: Set[Atom] = set()
    total = 0
    for idx, cd in enumerate(cp.descriptions):
        for num, msg in validate_cover_description(cd, cp.query):
            problems.append(f"C{idx + 1} condition ({num}): {msg}")
        union |= cd.atoms
        total += len(cd.atoms)
    if union != set(cp.query.body) or total != len(cp.query.body):
        problems.append("atom sets do not partition the query body")
    if cp.consistent:
        for j, i, z in _consistency_violations(list(cp.descriptions), cp.query):
            problems.append(f"consistency: {z} of alpha_{j + 1}(V) is in the range of alpha_{i + 1}")
    return problems


def extract_cover_partition(
    q_min: ConjunctiveQuery,
    vs: ViewSet,
    rewriting: ConjunctiveQuery,
) -> CoverPartition:
    """Recover a cover partition from a verified rewriting.

    The expansion is renamed so the homomorphism from q_min into it is the
    identity; each body atom of q_min then belongs to the application with
    the smallest index covering it, and psi_i is the inverse-on-image
    homomorphism restricted to the variables of alpha_i(V_i).
    """
    if core(q_min).body != q_min.body:
        raise CQError("NOT_MINIMAL", "extraction requires a minimal query; apply core first")
    used = {x.name for x in q_min.all_vars} | {x.name for x in rewriting.all_vars}
    for v in vs.views:
        used |= {x.name for x in v.all_vars}
    fresh = FreshVariableSource(used)
    exp = expand(rewriting, vs, fresh)
    h1 = find_homomorphism(q_min, exp.query, "full")
    if h1 is None or find_homomorphism(exp.query, q_min, "full") is None:
        raise CQError("NOT_A_REWRITING", "expansion of the rewriting is not equivalent to the query")
    h2 = invert_on_image(q_min, exp.query, h1)

    # rename the expansion so h1 becomes the identity on vars(q_min)
    inv = {h1.mapping[x]: x for x in q_min.all_vars}
    assert len(inv) == len(q_min.all_vars), "h1 is not injective"
    qnames = q_min.all_vars
    rho: Dict[Var, Var] = {}
    for z in sorted(exp.query.all_vars, key=lambda v: v.name):
        if z in inv:
            rho[z] = inv[z]
        elif z in qnames:
            rho[z] = fresh.fresh()
        else:
            rho[z] = z
    apps = [
        ViewApplication(a.view, {x: rho[y] for x, y in a.alpha.items()}, apply_substitution(rho, a.atom))
        for a in exp.applications
    ]
    h2map = {rho[z]: h2.mapping[z] for z in exp.query.all_vars}

    assigned: Dict[int, Set[Atom]] = {}
    for atom in q_min.body_sorted():
        for i, app in enumerate(apps):
            if atom in {apply_substitution(app.alpha, a) for a in app.view.body}:
                assigned.setdefault(i, set()).add(atom)
                break
        else:
            raise AssertionError(f"{atom} is not covered by any application")

    descs: List[CoverDescription] = []
    for i, app in enumerate(apps):
        if i not in assigned:
            continue  # applications contributing no minimal atom are dropped
        avars = frozenset(app.alpha.get(x, x) for x in app.view.all_vars)
        psi = {v: h2map.get(v, v) for v in sorted(avars, key=lambda w: w.name)}
        descs.append(CoverDescription(frozenset(assigned[i]), app.view, dict(app.alpha), psi))
    cp = CoverPartition(tuple(descs), q_min, consistent=False)
    problems = validate_cover_partition(cp)
    assert not problems, f"extracted partition invalid: {problems}"
    return cp


def make_consistent(cp: CoverPartition, fresh: Optional[FreshVariableSource] = None) -> CoverPartition:
    """Rename non-bridge shared variables apart until cross-application
    sharing happens only through bridge variables.

    Each step picks a violating variable z, renames it to a fresh z' inside
    an application whose atom set does not contain z, and redirects psi by
    psi'(z') = psi(z).  The partition of atoms never changes.
    """
    q = cp.query
    descs = [replace(cd, alpha=dict(cd.alpha), psi=dict(cd.psi)) for cd in cp.descriptions]
    if fresh is None:
        names = {x.name for x in q.all_vars}
        for cd in descs:
            names |= {v.name for v in applied_view_vars(cd)}
            names |= {v.name for v in cd.psi.values()}
        fresh = FreshVariableSource(names)
    cap = sum(len(applied_view_vars(cd)) for cd in descs) + 1
    renames = 0
    while True:
        violations = _consistency_violations(descs, q)
        if not violations:
            break
        j, i, z = violations[0]
        target = j if z not in vars_of(descs[j].atoms) else i
        cd = descs[target]
        assert z not in vars_of(cd.atoms), "no safe side to rename; partition is not valid"
        z2 = fresh.fresh()
        cd.alpha = {x: (z2 if y == z else y) for x, y in cd.alpha.items()}
        new_psi = {x: v for x, v in cd.psi.items() if x != z}
        new_psi[z2] = cd.psi.get(z, z)
        cd.psi = new_psi
        renames += 1
        if renames > cap:
            raise AssertionError("consistency renaming did not terminate within its bound")
    out = CoverPartition(tuple(descs), q, consistent=True)
    problems = validate_cover_partition(out)
    assert not problems, f"make_consistent produced an invalid partition: {problems}"
    return out


def induced_rewriting(cp: CoverPartition) -> ConjunctiveQuery:
    """The query with head(Q) and one atom alpha_i(head(V_i)) per description."""
    if not cp.consistent:
        raise CQError("INCONSISTENT_PARTITION", "only consistent cover partitions induce rewritings")
    body = {apply_substitution(cd.alpha, cd.view.head) for cd in cp.descriptions}
    schema: Schema = {cd.view.head.relation: len(cd.view.head.args) for cd in cp.descriptions}
    return make_query(cp.query.head, body, schema)


def induced_expansion(cp: CoverPartition) -> Expansion:
    if not cp.consistent:
        raise CQError("INCONSISTENT_PARTITION", "only consistent cover partitions induce expansions")
    apps = tuple(
        ViewApplication(cd.view, dict(cd.alpha), apply_substitution(cd.alpha, cd.view.head))
        for cd in cp.descriptions
    )
    body: Set[Atom] = set()
    schema: Schema = {}
    for cd in cp.descriptions:
        body |= applied_body(cd)
        schema.update(cd.view.schema)
    query = make_query(cp.query.head, body, schema)
    exp = Expansion(query, apps)
    validate_expansion(exp)
    return exp


def split_connected(cp: CoverPartition, tree: JoinTree) -> CoverPartition:
    """Split every description whose atoms are disconnected in ``tree`` into
    per-component descriptions sharing (V, alpha, psi)."""
    body = cp.query.body
    if not (tree.nodes == body or tree.nodes == body | {cp.query.head}):
        raise CQError("INVALID_TREE", "tree must span the query body, optionally plus the head atom")
    descs: List[CoverDescription] = []
    for cd in cp.descriptions:
        comps = tree_induced_components(tree, cd.atoms)
        if len(comps) == 1:
            descs.append(cd)
        else:
            descs.extend(
                CoverDescription(c, cd.view, dict(cd.alpha), dict(cd.psi)) for c in comps
            )
    out = CoverPartition(tuple(descs), cp.query, consistent=False)
    problems = validate_cover_partition(out)
    assert not problems, f"split produced an invalid partition: {problems}"
    return out


def hierarchical_split(cd: CoverDescription, q: ConjunctiveQuery) -> List[CoverDescription]:
    """Partition the description along connectivity by variables outside
    alpha(head(V)); each component is a singleton or shares such a variable."""
    if not is_hierarchical(q):
        raise CQError("NOT_HIERARCHICAL", "hierarchical splitting applies to hierarchical queries")
    him = head_image_vars(cd)
    atoms = sorted_atoms(cd.atoms)
    edges = set()
    for i, a in enumerate(atoms):
        for b in atoms[i + 1:]:
            if (atom_vars(a) & atom_vars(b)) - him:
                edges.add((a, b) if atom_key(a) <= atom_key(b) else (b, a))
    comps = graph_components(atoms, edges)
    out = [CoverDescription(c, cd.view, dict(cd.alpha), dict(cd.psi)) for c in comps]
    seen: Set[Var] = set()
    for c in comps:
        outside = vars_of(c) - him
        overlap = outside & seen
        assert not overlap, f"variable {overlap} outside the head image appears in two components"
        seen |= outside
        if len(c) > 1:
            common = set.intersection(*(set(atom_vars(a)) for a in c)) - him
            assert common, "multi-atom component lacks a common non-head-image variable"
    return out


@dataclass
class PipelineResult:
    rewriting: ConjunctiveQuery
    q_min: ConjunctiveQuery
    partition: Optional[CoverPartition]
    expansion: Expansion
    hom_into: Homomorphism
    hom_back: Homomorphism


def _verified_equivalence(
    q: ConjunctiveQuery,
    exp: Expansion,
) -> Tuple[Homomorphism, Homomorphism]:
    h_in = find_homomorphism(q, exp.query, "full")
    h_bk = find_homomorphism(exp.query, q, "full")
    assert h_in is not None and h_bk is not None, "produced rewriting failed expansion equivalence"
    return h_in, h_bk


def _baseline_pipeline(
    q: ConjunctiveQuery,
    vs: ViewSet,
    limit: int,
) -> Tuple[Optional[PipelineResult], Optional[str]]:
    base, reason = baseline_with_witnesses(q, vs, limit)
    if base is None:
        return None, reason
    return (
        PipelineResult(base.candidate, base.q_min, None, base.expansion, base.hom_into, base.hom_back),
        None,
    )


def _acyclic_pipeline(
    q: ConjunctiveQuery,
    vs: ViewSet,
    limit: int,
) -> Tuple[Optional[PipelineResult], Optional[str]]:
    ok, _ = is_acyclic(q)
    if not ok:
        raise CQError("NOT_ACYCLIC", "acyclic rewriting requires an acyclic query")
    base, reason = baseline_with_witnesses(q, vs, limit)
    if base is None:
        return None, reason
    q_min = base.q_min
    fc, _ = is_free_connex(q_min)
    tree = gyo_join_tree(q_min.body)
    assert tree is not None, "core of an acyclic query must stay acyclic"
    tree_plus = gyo_join_tree(set(q_min.body) | {q_min.head}) if fc else None
    cp = extract_cover_partition(q_min, vs, base.candidate)
    for _ in range(len(q_min.body) + 1):
        size = len(cp.descriptions)
        cp = split_connected(cp, tree)
        if tree_plus is not None:
            cp = split_connected(cp, tree_plus)
        if len(cp.descriptions) == size:
            break
    else:
        raise AssertionError("connected refinement did not stabilise within |body| rounds")
    cp = make_consistent(cp)
    rw = induced_rewriting(cp)
    assert is_acyclic(rw)[0], "induced rewriting is not acyclic"
    if fc:
        assert is_free_connex(rw)[0], "induced rewriting lost free-connexness"
    exp = induced_expansion(cp)
    h_in, h_bk = _verified_equivalence(q_min, exp)
    return PipelineResult(rw, q_min, cp, exp, h_in, h_bk), None


def _hierarchical_pipeline(
    q: ConjunctiveQuery,
    vs: ViewSet,
    limit: int,
) -> Tuple[Optional[PipelineResult], Optional[str]]:
    if not is_hierarchical(q):
        raise CQError("NOT_HIERARCHICAL", "hierarchical rewriting requires a hierarchical query")
    qh = is_q_hierarchical(q)
    base, reason = baseline_with_witnesses(q, vs, limit)
    if base is None:
        return None, reason
    q_min = base.q_min
    cp = extract_cover_partition(q_min, vs, base.candidate)
    descs: List[CoverDescription] = []
    for cd in cp.descriptions:
        descs.extend(hierarchical_split(cd, q_min))
    cp = CoverPartition(tuple(descs), q_min, consistent=False)
    problems = validate_cover_partition(cp)
    assert not problems, f"hierarchical split produced an invalid partition: {problems}"
    cp = make_consistent(cp)
    rw = induced_rewriting(cp)
    assert is_hierarchical(rw), "induced rewriting is not hierarchical"
    if qh:
        assert is_q_hierarchical(rw), "induced rewriting is not q-hierarchical"
    exp = induced_expansion(cp)
    h_in, h_bk = _verified_equivalence(q_min, exp)
    return PipelineResult(rw, q_min, cp, exp, h_in, h_bk), None


def acyclic_rewriting(
    q: ConjunctiveQuery,
    vs: ViewSet,
    limit: int = DEFAULT_LIMIT,
) -> Optional[ConjunctiveQuery]:
    res, _ = _acyclic_pipeline(q, vs, limit)
    return None if res is None else res.rewriting


def hierarchical_rewriting(
    q: ConjunctiveQuery,
    vs: ViewSet,
    limit: int = DEFAULT_LIMIT,
) -> Optional[ConjunctiveQuery]:
    res, _ = _hierarchical_pipeline(q, vs, limit)
    return None if res is None else res.rewriting


# --- view splitting ---------------------------------------------------------

BackMap = Dict[str, Tuple[ConjunctiveQuery, Tuple[int, ...]]]


@dataclass
class SplitViews:
    view_set: ViewSet
    back_map: BackMap


def _subtree_blocks(view: ConjunctiveQuery, tree: JoinTree) -> List[FrozenSet[Atom]]:
    """Atom sets of the child subtrees when the extended join tree is rooted
    at the head atom."""
    adj = adjacency(tree.nodes, tree.edges)
    blocks: List[FrozenSet[Atom]] = []
    for child in adj[view.head]:
        block = {child}
        stack = [child]
        while stack:
            cur = stack.pop()
            for nxt in adj[cur]:
                if nxt != view.head and nxt not in block:
                    block.add(nxt)
                    stack.append(nxt)
        blocks.append(frozenset(block))
    return blocks


def split_views_bounded(
    vs: ViewSet,
    mode: str = "free-connex",
    reserved: Iterable[str] = (),
) -> SplitViews:
    """Replace each view by per-block head projections sharing its body.

    In free-connex mode the blocks are the child subtrees of the head node in
    the extended join tree (arity bounded by the schema arity); in weak-head
    mode they are the cover-graph components (arity bounded by the weak head
    arity).  The back map records how to translate rewritings back.
    """
    if mode not in ("free-connex", "weak-head"):
        raise ValueError(f"unknown split mode {mode!r}")
    used_names = set(vs.base_schema) | {v.head.relation for v in vs.views} | set(reserved)
    fragments: List[ConjunctiveQuery] = []
    back: BackMap = {}
    for view in vs.views:
        if mode == "free-connex":
            fc, tree = is_free_connex(view)
            if not fc:
                raise CQError("NOT_FREE_CONNEX", f"view {view.head.relation} is not free-connex acyclic")
            blocks = _subtree_blocks(view, tree)
        else:
            _, blocks = weak_head_arity(view)
        if len(blocks) == 1:
            fragments.append(view)
            back[view.head.relation] = (view, tuple(range(len(view.head.args))))
            continue
        for idx, block in enumerate(blocks, start=1):
            bvars = vars_of(block)
            positions: List[int] = []
            seen: Set[Var] = set()
            for p, t in enumerate(view.head.args):
                if t in bvars and t not in seen:
                    positions.append(p)
                    seen.add(t)
            name = f"{view.head.relation}_{idx}"
            while name in used_names:
                name += "'"
            used_names.add(name)
            head = Atom(name, tuple(view.head.args[p] for p in positions))
            fragments.append(make_query(head, view.body, vs.base_schema))
            back[name] = (view, tuple(positions))
    return SplitViews(make_view_set(fragments, vs.base_schema), back)


def translate_rewriting_back(
    w_rewriting: ConjunctiveQuery,
    back_map: BackMap,
    fresh: FreshVariableSource,
) -> ConjunctiveQuery:
    """Replace every fragment atom by an atom over the original view, padding
    dropped head positions with fresh variables (per atom)."""
    body: Set[Atom] = set()
    schema: Schema = {}
    for atom in w_rewriting.body_sorted():
        entry = back_map.get(atom.relation)
        if entry is None:
            raise CQError("UNKNOWN_VIEW", f"unknown split-view symbol {atom.relation}")
        view, positions = entry
        argmap: Dict[Var, Var] = {}
        for k, p in enumerate(positions):
            hv = view.head.args[p]
            argmap[hv] = atom.args[k]
        pad: Dict[Var, Var] = {}
        args = []
        for t in view.head.args:
            if t in argmap:
                args.append(argmap[t])
            else:
                if t not in pad:
                    pad[t] = fresh.fresh()
                args.append(pad[t])
        body.add(Atom(view.head.relation, tuple(args)))
        schema[view.head.relation] = len(view.head.args)
    return make_query(w_rewriting.head, body, schema)


# --- verification and dispatch ----------------------------------------------


def verify_rewriting(
    q: ConjunctiveQuery,
    vs: ViewSet,
    rewriting: ConjunctiveQuery,
) -> Tuple[bool, Expansion, Optional[Homomorphism], Optional[Homomorphism]]:
    """A query over the view symbols is a rewriting iff its expansion is
    equivalent to q; returns the expansion and both homomorphisms."""
    fresh = FreshVariableSource(
        {x.name for x in q.all_vars} | {x.name for x in rewriting.all_vars}
    )
    for v in vs.views:
        fresh.reserve(v.all_vars)
    exp = expand(rewriting, vs, fresh)
    h_in = find_homomorphism(q, exp.query, "full")
    h_bk = find_homomorphism(exp.query, q, "full")
    return (h_in is not None and h_bk is not None, exp, h_in, h_bk)


TARGETS = ("any", "acyclic", "free-connex", "hierarchical", "q-hierarchical")


@dataclass
class RewriteResult:
    status: str  # "ok" | "none"
    rewriting: Optional[ConjunctiveQuery]
    reason: Optional[str]
    query_report: ClassReport
    rewriting_report: Optional[ClassReport] = None
    partition: Optional[CoverPartition] = None
    expansion: Optional[ConjunctiveQuery] = None
    hom_into: Optional[Homomorphism] = None
    hom_back: Optional[Homomorphism] = None
    split_used: Optional[str] = None


def _check_target(target: str, report: ClassReport) -> None:
    needs = {
        "acyclic": report.acyclic,
        "free-connex": report.free_connex,
        "hierarchical": report.hierarchical,
        "q-hierarchical": report.q_hierarchical,
    }
    if target in needs and not needs[target]:
        raise CQError("CLASS_MISMATCH", f"query is not {target}; cannot ask for a {target} rewriting")


def _renumber_fresh(rw: ConjunctiveQuery, q: ConjunctiveQuery, start: int) -> ConjunctiveQuery:
    """Rename every variable the pipeline introduced (absent from q) to
    _f<n>, numbered in first-use order under canonical serialization."""
    fresh = FreshVariableSource(in_use=rw.all_vars & q.all_vars, start=start)
    ren: Dict[Var, Var] = {}
    for atom in [rw.head] + rw.body_sorted():
        for t in atom.args:
            if isinstance(t, Var) and t not in q.all_vars and t not in ren:
                ren[t] = fresh.fresh()
    if not ren:
        return rw
    return make_query(
        apply_substitution(ren, rw.head),
        {apply_substitution(ren, a) for a in rw.body},
        rw.schema,
    )


def rewrite(
    q: ConjunctiveQuery,
    vs: ViewSet,
    target: str = "any",
    limit: int = DEFAULT_LIMIT,
    split_views: str = "auto",
    fresh_start: int = 1,
) -> RewriteResult:
    """Decide rewritability and construct a rewriting in the requested class.

    View splitting (free-connex subtree projections, or cover-graph blocks in
    weak-head mode) bounds the candidate; its result is translated back and
    the final rewriting is always re-verified by expansion equivalence and
    re-classified.
    """
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}")
    if split_views not in ("auto", "off", "weak-head"):
        raise ValueError(f"unknown split-views mode {split_views!r}")
    qrep = classify(q)
    _check_target(target, qrep)

    work_vs = vs
    back: Optional[BackMap] = None
    split_used: Optional[str] = None
    if len(vs):
        if split_views == "weak-head":
            sv = split_views_bounded(vs, "weak-head", reserved={q.head.relation})
            work_vs, back, split_used = sv.view_set, sv.back_map, "weak-head"
        elif split_views == "auto" and all(is_free_connex(v)[0] for v in vs.views):
            sv = split_views_bounded(vs, "free-connex", reserved={q.head.relation})
            work_vs, back, split_used = sv.view_set, sv.back_map, "free-connex"

    if target in ("acyclic", "free-connex"):
        res, reason = _acyclic_pipeline(q, work_vs, limit)
    elif target in ("hierarchical", "q-hierarchical"):
        res, reason = _hierarchical_pipeline(q, work_vs, limit)
    else:
        res, reason = _baseline_pipeline(q, work_vs, limit)
    if res is None:
        return RewriteResult("none", None, reason, qrep)

    rw = res.rewriting
    if split_used is not None:
        fresh = FreshVariableSource({x.name for x in q.all_vars} | {x.name for x in rw.all_vars})
        rw = translate_rewriting_back(rw, back, fresh)
    # minimization preserves the structural class, so ship the core
    rw = core(rw)
    rw = _renumber_fresh(rw, q, fresh_start)

    ok, exp, h_in, h_bk = verify_rewriting(q, vs, rw)
    assert ok, "final rewriting failed verification against the original views"
    rrep = classify(rw)
    if target in ("acyclic", "free-connex"):
        assert rrep.acyclic
        if qrep.free_connex:
            assert rrep.free_connex
    if target in ("hierarchical", "q-hierarchical"):
        assert rrep.hierarchical
        if qrep.q_hierarchical:
            assert rrep.q_hierarchical
    partition = extract_cover_partition(res.q_min, vs, rw)
    return RewriteResult(
        "ok", rw, None, qrep, rrep, partition, exp.query, h_in, h_bk, split_used
    )
