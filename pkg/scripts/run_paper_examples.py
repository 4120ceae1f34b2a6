#!/usr/bin/env python3
"""Run the bundled example problems end to end and print a summary table.

For every problems/*.cq file: classify the query, try a rewriting in the
best class the query belongs to, and verify the companion *.rewriting.cq
file when present.
"""

import sys
from pathlib import Path

from cqrewrite.model import CQError
from cqrewrite.rewriting import rewrite, verify_rewriting
from cqrewrite.structure import classify
from cqrewrite.textio import parse_problem, serialize_query

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"


def best_target(report) -> str:
    if report.q_hierarchical:
        return "q-hierarchical"
    if report.hierarchical:
        return "hierarchical"
    if report.free_connex:
        return "free-connex"
    if report.acyclic:
        return "acyclic"
    return "any"


def main() -> int:
    for path in sorted(PROBLEMS.glob("*.cq")):
        if path.name.endswith(".rewriting.cq"):
            continue
        pf = parse_problem(path.read_text())
        rep = classify(pf.query)
        target = best_target(rep)
        print(f"== {path.name}")
        print(f"   query  {serialize_query(pf.query)}")
        print(f"   class  {rep.to_json()}")
        try:
            res = rewrite(pf.query, pf.views, target=target)
        except CQError as exc:
            print(f"   rewrite[{target}]  error {exc.code}")
            continue
        if res.status == "ok":
            print(f"   rewrite[{target}]  {serialize_query(res.rewriting)}")
        else:
            print(f"   rewrite[{target}]  NONE ({res.reason})")
        companion = path.with_name(path.stem + ".rewriting.cq")
        if companion.exists():
            rw = parse_problem(companion.read_text()).query
            ok, _, _, _ = verify_rewriting(pf.query, pf.views, rw)
            print(f"   verify {companion.name}  {'OK' if ok else 'FAIL'}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
