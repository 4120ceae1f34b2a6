"""Exact rewriting of conjunctive queries over views.

Decides whether a query has an exact rewriting over a set of views and
constructs one that preserves the query's structural class (acyclic,
free-connex acyclic, hierarchical, q-hierarchical), verified by expansion
and homomorphism.
"""

from .model import (
    Atom,
    CQError,
    Const,
    ConjunctiveQuery,
    Fact,
    FreshVariableSource,
    Var,
    ViewSet,
    apply_substitution,
    make_database,
    make_query,
    make_view_set,
)
from .textio import ParseError, ProblemFile, parse_database, parse_problem, parse_query_text, serialize_query
from .structure import ClassReport, JoinTree, classify, cover_graph, gyo_join_tree, is_acyclic, is_free_connex, is_hierarchical, is_q_hierarchical, weak_head_arity
from .homomorphism import Homomorphism, contained, core, equivalent, find_homomorphism, invert_on_image, isomorphic
from .evaluation import (
    DEFAULT_LIMIT,
    Expansion,
    ViewApplication,
    canonical_candidate,
    canonical_database,
    decide_and_rewrite_baseline,
    evaluate,
    expand,
)
from .rewriting import (
    CoverDescription,
    CoverPartition,
    RewriteResult,
    acyclic_rewriting,
    bridge_vars,
    extract_cover_partition,
    hierarchical_rewriting,
    hierarchical_split,
    induced_expansion,
    induced_rewriting,
    make_consistent,
    rewrite,
    split_connected,
    split_views_bounded,
    translate_rewriting_back,
    validate_cover_description,
    verify_rewriting,
)

__all__ = [name for name in dir() if not name.startswith("_")]
