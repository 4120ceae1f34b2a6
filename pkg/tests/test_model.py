import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cqrewrite.model import (
    Atom,
    CQError,
    ConjunctiveQuery,
    FreshVariableSource,
    Var,
    apply_substitution,
    compose,
    make_query,
    make_view_set,
    validate_query,
)

V = Var


def test_minimal_safe_query():
    q = make_query(Atom("H", (V("x"),)), [Atom("R", (V("x"), V("y")))], {"R": 2})
    assert q.head_vars == {V("x")}
    assert len(q.body) == 1


def test_unsafe_query_rejected():
    with pytest.raises(CQError) as e:
        make_query(Atom("H", (V("x"),)), [Atom("R", (V("y"), V("z")))], {"R": 2})
    assert e.value.code == "UNSAFE_QUERY"


def test_empty_body_rejected():
    with pytest.raises(CQError) as e:
        make_query(Atom("H", ()), [], {})
    assert e.value.code == "EMPTY_BODY"


def test_head_symbol_in_body_rejected():
    with pytest.raises(CQError) as e:
        make_query(Atom("R", (V("x"),)), [Atom("R", (V("x"), V("y")))], {"R": 2})
    assert e.value.code == "HEAD_IN_BODY"


def test_arity_mismatch_rejected():
    with pytest.raises(CQError) as e:
        make_query(Atom("H", ()), [Atom("R", (V("x"),))], {"R": 2})
    assert e.value.code == "ARITY_MISMATCH"


def test_body_deduplicated():
    q = make_query(
        Atom("H", (V("x"),)),
        [Atom("R", (V("x"),)), Atom("R", (V("x"),))],
        {"R": 1},
    )
    assert len(q.body) == 1


def test_apply_substitution_cases():
    r_xx = Atom("R", (V("x"), V("x")))
    assert apply_substitution({V("x"): V("a")}, r_xx) == Atom("R", (V("a"), V("a")))
    r_xy = Atom("R", (V("x"), V("y")))
    assert apply_substitution({}, r_xy) == r_xy
    s = Atom("S", (V("x"), V("y"), V("z")))
    got = apply_substitution({V("x"): V("w"), V("y"): V("w")}, s)
    assert got == Atom("S", (V("w"), V("w"), V("z")))


_names = st.sampled_from(["x", "y", "z", "u", "v", "w"])
_vars = st.builds(V, _names)
_atoms = st.builds(
    lambda rel, args: Atom(rel, tuple(args)),
    st.sampled_from(["R", "S", "T"]),
    st.lists(_vars, min_size=0, max_size=3),
)
_substs = st.dictionaries(_vars, _vars, max_size=6)


@given(_substs, _substs, _atoms)
def test_substitution_composition(s2, s1, atom):
    assert apply_substitution(s2, apply_substitution(s1, atom)) == apply_substitution(compose(s2, s1), atom)


@given(
    st.lists(_atoms, min_size=0, max_size=5),
    st.lists(_vars, min_size=0, max_size=3),
)
@settings(max_examples=200)
def test_query_construction_total_or_error(body, head_vars):
    """Construction either yields a query passing the invariant re-check or
    raises exactly one declared error."""
    schema = {}
    ok_schema = True
    for a in body:
        if a.relation in schema and schema[a.relation] != len(a.args):
            ok_schema = False
        schema.setdefault(a.relation, len(a.args))
    head = Atom("H", tuple(head_vars))
    try:
        q = make_query(head, body, schema)
    except CQError as e:
        assert e.code in {"EMPTY_BODY", "UNSAFE_QUERY", "ARITY_MISMATCH", "UNKNOWN_RELATION", "HEAD_IN_BODY"}
        return
    assert ok_schema
    validate_query(q)


def test_fresh_source_avoids_in_use_set():
    in_use = {f"v{i}" for i in range(10_000)}
    src = FreshVariableSource(in_use, prefix="v")
    drawn = [src.fresh() for _ in range(10_000)]
    names = {v.name for v in drawn}
    assert len(names) == 10_000
    assert not names & in_use


def test_view_set_normalizes_shared_variables():
    v1 = make_query(Atom("V1", (V("u"),)), [Atom("R", (V("u"), V("v")))], {"R": 2})
    v2 = make_query(Atom("V2", (V("u"),)), [Atom("R", (V("u"), V("w")))], {"R": 2})
    vs = make_view_set([v1, v2], {"R": 2})
    n1, n2 = vs.views
    assert not (n1.all_vars & n2.all_vars)
    # first view keeps its names
    assert n1 == v1


def test_view_set_rejects_duplicate_names():
    v1 = make_query(Atom("V1", (V("u"),)), [Atom("R", (V("u"), V("v")))], {"R": 2})
    with pytest.raises(CQError) as e:
        make_view_set([v1, v1], {"R": 2})
    assert e.value.code == "DUPLICATE_VIEW"
