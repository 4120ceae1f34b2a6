"""Command-line interface.

Exit codes are a stable contract: 0 success with a result, 1 definitive
absence (no rewriting / verification failed), 2 input error, 3 resource
limit exceeded, 4 class mismatch.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional

from .evaluation import DEFAULT_LIMIT
from .homomorphism import core
from .model import CQError, ConjunctiveQuery, fact_key
from .rewriting import (
    CoverPartition,
    TARGETS,
    rewrite,
    split_views_bounded,
    verify_rewriting,
)
from .structure import ClassReport, classify
from .textio import parse_database, parse_problem, render_json, serialize_query

EXIT_OK = 0
EXIT_NONE = 1
EXIT_INPUT = 2
EXIT_LIMIT = 3
EXIT_CLASS = 4

_CODE_EXITS = {
    "SIZE_LIMIT_EXCEEDED": EXIT_LIMIT,
    "CLASS_MISMATCH": EXIT_CLASS,
}


@dataclass
class CliConfig:
    command: str
    inputs: List[str]
    target: str = "any"
    limit: int = DEFAULT_LIMIT
    fmt: str = "text"
    seed: int = 0
    split_views: str = "auto"
    mode: str = "free-connex"
    rule: Optional[str] = None
    jobs: int = 1


def _mapping_json(mapping: Dict) -> Dict[str, str]:
    return {str(k): str(v) for k, v in sorted(mapping.items(), key=lambda kv: str(kv[0]))}


def _partition_json(cp: Optional[CoverPartition]) -> Optional[list]:
    if cp is None:
        return None
    out = []
    for cd in cp.descriptions:
        out.append(
            {
                "atoms": [str(a) for a in sorted(cd.atoms, key=str)],
                "view": cd.view.head.relation,
                "alpha": _mapping_json(cd.alpha),
                "psi": _mapping_json(cd.psi),
            }
        )
    return out


def _class_json(report: Optional[ClassReport]) -> Optional[dict]:
    return None if report is None else report.to_json()


def _class_text(report: ClassReport) -> str:
    return (
        f"acyclic={'yes' if report.acyclic else 'no'} "
        f"free-connex={'yes' if report.free_connex else 'no'} "
        f"hierarchical={'yes' if report.hierarchical else 'no'} "
        f"q-hierarchical={'yes' if report.q_hierarchical else 'no'} "
        f"weak-head-arity={report.weak_head_arity}"
    )


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise CQError("IO_ERROR", f"cannot read {path}: {exc}") from exc


def cmd_classify(cfg: CliConfig, out) -> int:
    pf = parse_problem(_read(cfg.inputs[0]))
    qrep = classify(pf.query)
    vreps = {v.head.relation: classify(v) for v in pf.views}
    if cfg.fmt == "json":
        envelope = {
            "status": "ok",
            "reason": None,
            "rewriting": None,
            "class": {
                "query": _class_json(qrep),
                "views": {name: _class_json(r) for name, r in sorted(vreps.items())},
            },
            "witness": None,
        }
        out.write(render_json(envelope))
    else:
        out.write(f"query: {_class_text(qrep)}\n")
        for name in sorted(vreps):
            out.write(f"view {name}: {_class_text(vreps[name])}\n")
    return EXIT_OK


def cmd_minimize(cfg: CliConfig, out) -> int:
    pf = parse_problem(_read(cfg.inputs[0]))
    minimal = core(pf.query)
    if cfg.fmt == "json":
        envelope = {
            "status": "ok",
            "reason": None,
            "rewriting": serialize_query(minimal),
            "class": _class_json(classify(minimal)),
            "witness": None,
        }
        out.write(render_json(envelope))
    else:
        out.write(serialize_query(minimal) + "\n")
    return EXIT_OK


def _rewrite_one(path: str, cfg: CliConfig) -> tuple:
    pf = parse_problem(_read(path))
    result = rewrite(
        pf.query,
        pf.views,
        target=cfg.target,
        limit=cfg.limit,
        split_views=cfg.split_views,
        fresh_start=cfg.seed + 1,
    )
    return path, result


def _render_rewrite(path: str, result, cfg: CliConfig, out, with_path: bool) -> int:
    if cfg.fmt == "json":
        envelope = {
            "status": result.status,
            "reason": result.reason,
            "rewriting": serialize_query(result.rewriting) if result.rewriting else None,
            "class": _class_json(result.rewriting_report),
            "witness": None
            if result.status != "ok"
            else {
                "cover_partition": _partition_json(result.partition),
                "expansion": serialize_query(result.expansion),
                "hom_into_expansion": _mapping_json(result.hom_into.mapping),
                "hom_from_expansion": _mapping_json(result.hom_back.mapping),
                "query_class": _class_json(result.query_report),
                "split_views": result.split_used,
            },
        }
        if with_path:
            envelope["input"] = path
        out.write(render_json(envelope))
    else:
        prefix = f"{path}: " if with_path else ""
        if result.status == "ok":
            out.write(f"{prefix}{serialize_query(result.rewriting)}\n")
            out.write(f"{prefix}class: {_class_text(result.rewriting_report)}\n")
        else:
            out.write(f"{prefix}NONE ({result.reason})\n")
    return EXIT_OK if result.status == "ok" else EXIT_NONE


def cmd_rewrite(cfg: CliConfig, out) -> int:
    target = Path(cfg.inputs[0])
    if target.is_dir():
        files = sorted(str(p) for p in target.glob("*.cq"))
        if cfg.jobs > 1:
            with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
                results = list(pool.map(_rewrite_one, files, [cfg] * len(files)))
        else:
            results = [_rewrite_one(f, cfg) for f in files]
        code = EXIT_OK
        for path, result in results:
            code = max(code, _render_rewrite(path, result, cfg, out, with_path=True))
        return code
    path, result = _rewrite_one(str(target), cfg)
    return _render_rewrite(path, result, cfg, out, with_path=False)


def cmd_verify(cfg: CliConfig, out) -> int:
    pf = parse_problem(_read(cfg.inputs[0]))
    rw_pf = parse_problem(_read(cfg.inputs[1]))
    rw = rw_pf.query
    ok, exp, h_in, h_bk = verify_rewriting(pf.query, pf.views, rw)
    if cfg.fmt == "json":
        envelope = {
            "status": "ok" if ok else "fail",
            "reason": None if ok else "expansion is not equivalent to the query",
            "rewriting": serialize_query(rw),
            "class": _class_json(classify(rw)),
            "witness": {
                "expansion": serialize_query(exp.query),
                "hom_into_expansion": _mapping_json(h_in.mapping) if h_in else None,
                "hom_from_expansion": _mapping_json(h_bk.mapping) if h_bk else None,
            },
        }
        out.write(render_json(envelope))
    else:
        out.write("OK\n" if ok else "FAIL\n")
    return EXIT_OK if ok else EXIT_NONE


def cmd_eval(cfg: CliConfig, out) -> int:
    from .evaluation import evaluate

    pf = parse_problem(_read(cfg.inputs[0]))
    db = parse_database(_read(cfg.inputs[1]), pf.schema)
    if cfg.rule is None:
        q: ConjunctiveQuery = pf.query
    else:
        view = pf.views.get(cfg.rule)
        if view is None:
            raise CQError("UNKNOWN_VIEW", f"no view named {cfg.rule} in {cfg.inputs[0]}")
        q = view
    facts = sorted(evaluate(q, db), key=fact_key)
    if cfg.fmt == "json":
        envelope = {
            "status": "ok",
            "reason": None,
            "rewriting": None,
            "class": None,
            "witness": {"facts": [str(f) for f in facts]},
        }
        out.write(render_json(envelope))
    else:
        for f in facts:
            out.write(f"{f}.\n")
    return EXIT_OK


def cmd_split_views(cfg: CliConfig, out) -> int:
    pf = parse_problem(_read(cfg.inputs[0]))
    sv = split_views_bounded(pf.views, mode=cfg.mode, reserved={pf.query.head.relation})
    back = {
        name: {"view": view.head.relation, "positions": list(positions)}
        for name, (view, positions) in sorted(sv.back_map.items())
    }
    if cfg.fmt == "json":
        envelope = {
            "status": "ok",
            "reason": None,
            "rewriting": None,
            "class": None,
            "witness": {
                "views": [f"view {serialize_query(v)}" for v in sv.view_set],
                "back_map": back,
            },
        }
        out.write(render_json(envelope))
    else:
        for v in sv.view_set:
            out.write(f"view {serialize_query(v)}\n")
        for name, entry in sorted(back.items()):
            out.write(f"# {name} -> {entry['view']} positions {entry['positions']}\n")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cqrewrite", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--format", dest="fmt", choices=("text", "json"), default="text")
        p.add_argument("--seed", type=int, default=0, help="offset for fresh-variable numbering")

    p = sub.add_parser("classify", help="classify the query and each view")
    p.add_argument("file")
    common(p)

    p = sub.add_parser("minimize", help="print the core of the query")
    p.add_argument("file")
    common(p)

    p = sub.add_parser("rewrite", help="find a rewriting, optionally in a target class")
    p.add_argument("file", help="problem file or a directory of *.cq files")
    p.add_argument("--target", choices=TARGETS, default="any")
    p.add_argument("--limit", type=int, default=DEFAULT_LIMIT)
    p.add_argument("--split-views", dest="split_views", choices=("auto", "off", "weak-head"), default="auto")
    p.add_argument("--jobs", type=int, default=1)
    common(p)

    p = sub.add_parser("verify", help="check a rewriting by expansion equivalence")
    p.add_argument("file")
    p.add_argument("rewriting_file")
    common(p)

    p = sub.add_parser("eval", help="evaluate the query (or a view) on a database")
    p.add_argument("file")
    p.add_argument("db_file")
    p.add_argument("--rule", default=None, help="evaluate this view instead of the query")
    common(p)

    p = sub.add_parser("split-views", help="split views into bounded-arity fragments")
    p.add_argument("file")
    p.add_argument("--mode", choices=("free-connex", "weak-head"), default="free-connex")
    common(p)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    inputs = [getattr(args, "file")]
    for extra in ("rewriting_file", "db_file"):
        if hasattr(args, extra):
            inputs.append(getattr(args, extra))
    cfg = CliConfig(
        command=args.command,
        inputs=inputs,
        target=getattr(args, "target", "any"),
        limit=getattr(args, "limit", DEFAULT_LIMIT),
        fmt=args.fmt,
        seed=args.seed,
        split_views=getattr(args, "split_views", "auto"),
        mode=getattr(args, "mode", "free-connex"),
        rule=getattr(args, "rule", None),
        jobs=getattr(args, "jobs", 1),
    )
    if cfg.limit < 1:
        print("error: --limit must be at least 1", file=sys.stderr)
        return EXIT_INPUT
    handlers = {
        "classify": cmd_classify,
        "minimize": cmd_minimize,
        "rewrite": cmd_rewrite,
        "verify": cmd_verify,
        "eval": cmd_eval,
        "split-views": cmd_split_views,
    }
    try:
        return handlers[cfg.command](cfg, sys.stdout)
    except CQError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return _CODE_EXITS.get(exc.code, EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
