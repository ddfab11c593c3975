"""Command line front-end.

Subcommands:
  check        static assumptions of a choreography file
  lts          labelled traces of a choreography
  abs          abstract bundle semantics, optionally written as JSON/DOT/PNG
  enumerate    bounded concrete bundle enumeration for a protocol
  deliver-once replay check of declared fresh-value families in a bundle file
  faithful     bounded faithfulness check, writing a JSON report

Exit codes: 0 success (or PASS), 1 violations found (or FAIL), 2 INCONCLUSIVE,
64 usage error, 65 parse error, 66 missing input file.  Output is
deterministic: identical inputs produce byte-identical results.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path
from typing import Sequence

from .absem import Interaction, bundle_semantics
from .abstraction import AmapError, load_abstraction_map
from .chor import ChorParseError, check_static_assumptions, parse_choreography
from .faithful import check_faithfulness
from .lts import label_to_text, traces
from .protocol import ProtoError, check_deliver_once, load_protocol
from .search import Bounds, enumerate_bundles
from .serialize import bundle_from_text, bundle_to_text
from .strands import Bundle, bundle_to_dot
from .termtext import TermSyntaxError
from .terms import Nonce, SymKey, subterms

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    """argparse's default usage-error exit code is 2; we reserve that for
    INCONCLUSIVE verdicts and use 64 for usage problems instead."""

    def error(self, message: str) -> None:  # pragma: no cover - thin wrapper
        self.print_usage(sys.stderr)
        self.exit(64, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    n = int(text)
    if n < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return n


def _nonnegative(text: str) -> int:
    n = int(text)
    if n < 0:
        raise argparse.ArgumentTypeError(f"expected a non-negative integer, got {text}")
    return n


def _read(path: str) -> str:
    with open(path, "r", encoding="utf-8") as handle:
        return handle.read()


def _write_bundle_files(
    bundles: Sequence[Bundle],
    json_dir: str | None,
    dot_dir: str | None,
    png_dir: str | None,
) -> list[str]:
    """Write one file per bundle per requested format; returns paths."""
    written: list[str] = []
    for kind, out_dir in (("json", json_dir), ("dot", dot_dir), ("png", png_dir)):
        if out_dir is None:
            continue
        root = Path(out_dir)
        root.mkdir(parents=True, exist_ok=True)
        for i, b in enumerate(bundles):
            path = root / f"bundle_{i}.{kind}"
            if kind == "json":
                path.write_text(bundle_to_text(b), encoding="utf-8")
            elif kind == "dot":
                path.write_text(bundle_to_dot(b, f"bundle_{i}"), encoding="utf-8")
            else:
                from . import viz  # matplotlib import is slow; defer it

                viz.render_bundle(b, str(path), title=f"bundle {i}")
            written.append(str(path))
    return written


def cmd_check(args: argparse.Namespace) -> int:
    c = parse_choreography(_read(args.file))
    violations = check_static_assumptions(c)
    if violations:
        for v in violations:
            print(v)
        return 1
    print("OK: 3 assumptions hold")
    return 0


def cmd_lts(args: argparse.Namespace) -> int:
    c = parse_choreography(_read(args.file))
    lines = sorted(" ".join(label_to_text(mu) for mu in tr) for tr in traces(c))
    for line in lines:
        print(line)
    return 0


def _interaction_counts(b: Bundle) -> str:
    parts = []
    for sid in b.strand_ids():
        n = sum(1 for ev in b.strands[sid].trace if isinstance(ev.msg, Interaction))
        parts.append(f"{sid}={n}")
    return " ".join(parts)


def cmd_abs(args: argparse.Namespace) -> int:
    c = parse_choreography(_read(args.file))
    envs = bundle_semantics(c)
    print(f"bundles: {len(envs)}")
    for i, env in enumerate(envs):
        print(f"bundle {i}: {_interaction_counts(env.bundle)}")
    for path in _write_bundle_files([e.bundle for e in envs], args.json, args.dot, args.png):
        print(f"wrote {path}")
    return 0


def cmd_enumerate(args: argparse.Namespace) -> int:
    proto = load_protocol(args.proto)
    bounds = Bounds(
        max_instances_per_role=args.max_instances,
        max_adversary_steps=args.adv_steps,
        require_deliver_once=not args.no_deliver_once,
    )
    result = enumerate_bundles(proto, bounds)
    print(f"bundles: {len(result.bundles)}")
    print(f"exhausted: {'yes' if result.exhausted else 'no'}")
    print(f"filtered-deliver-once: {result.filtered_deliver_once}")
    for i, eb in enumerate(result.bundles):
        b = eb.bundle
        adv = sum(1 for sid in b.strand_ids() if b.strands[sid].kind == "adversary")
        print(f"bundle {i}: strands={len(b.strands)} nodes={len(b.nodes)} adversary={adv}")
    bundles = [eb.bundle for eb in result.bundles]
    for path in _write_bundle_files(bundles, args.json, args.dot, args.png):
        print(f"wrote {path}")
    return 0


def cmd_deliver_once(args: argparse.Namespace) -> int:
    proto = load_protocol(args.proto)
    bundle = bundle_from_text(_read(args.bundle))
    values: dict[str, list] = {fam.fresh_name: [] for fam in proto.families}
    seen = set()
    for node in bundle.nodes:
        for sub in subterms(bundle.event(node).msg):
            if isinstance(sub, (Nonce, SymKey)) and sub not in seen:
                seen.add(sub)
                base = sub.name.split(".")[0]
                if base in values:
                    values[base].append(sub)
    bad = 0
    for fam in proto.families:
        instances = sorted(values[fam.fresh_name], key=lambda t: t.name)
        if not instances:
            print(f"deliver-once {fam.fresh_name}: no instances")
            continue
        for inst in instances:
            ok, _ = check_deliver_once(bundle, inst)
            if ok:
                print(f"deliver-once {inst.name}: ok")
            else:
                print(f"deliver-once {inst.name}: VIOLATION")
                bad += 1
    return 1 if bad else 0


def cmd_faithful(args: argparse.Namespace) -> int:
    proto = load_protocol(args.proto)
    c = parse_choreography(_read(args.chor))
    amap = load_abstraction_map(args.amap)
    bounds = Bounds(
        max_instances_per_role=args.max_instances,
        max_adversary_steps=args.adv_steps,
        require_deliver_once=not args.no_deliver_once,
    )
    report = check_faithfulness(proto, c, amap, bounds, jobs=args.jobs)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / "report.json"
    report_path.write_text(
        json.dumps(report.to_json(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

    summary_path = out / "summary.csv"
    with open(summary_path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["clause", "index", "status", "detail"])
        for row in report.clause1:
            matched = row["matched_bundle"]
            status = "unmatched" if matched is None else "matched"
            detail = "" if matched is None else f"bundle={matched}"
            writer.writerow(["1", row["env"], status, detail])
        for row in report.clause2:
            writer.writerow(["2", row["bundle"], row["status"], f"components={len(row['components'])}"])

    figures = out / "figures"
    figures.mkdir(parents=True, exist_ok=True)
    from . import viz  # matplotlib import is slow; defer it
    from .serialize import bundle_from_json

    envs = bundle_semantics(c)
    for i, env in enumerate(envs):
        viz.render_bundle(env.bundle, str(figures / f"env_{i}.png"), title=f"abstract execution {i}")
    for w in report.witnesses:
        viz.render_bundle(
            bundle_from_json(w["bundle"]),
            str(figures / f"witness_env{w['env']}.png"),
            title=f"witness for abstract execution {w['env']}",
        )

    print(f"verdict: {report.verdict}")
    for line in report.counterexamples:
        print(line)
    print(f"wrote {report_path}")
    print(f"wrote {summary_path}")
    return {"PASS": 0, "FAIL": 1, "INCONCLUSIVE": 2}[report.verdict]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="chorstrand", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="check static assumptions of a choreography")
    p.add_argument("file")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("lts", help="print the labelled traces of a choreography")
    p.add_argument("file")
    p.set_defaults(func=cmd_lts)

    p = sub.add_parser("abs", help="compute the abstract bundle semantics")
    p.add_argument("file")
    p.add_argument("--json", metavar="DIR", help="write one JSON file per bundle")
    p.add_argument("--dot", metavar="DIR", help="write one DOT file per bundle")
    p.add_argument("--png", metavar="DIR", help="render one PNG file per bundle")
    p.set_defaults(func=cmd_abs)

    p = sub.add_parser("enumerate", help="enumerate concrete bundles within bounds")
    p.add_argument("--proto", required=True)
    p.add_argument("--max-instances", type=_positive, default=1)
    p.add_argument("--adv-steps", type=_nonnegative, default=0)
    p.add_argument("--no-deliver-once", action="store_true")
    p.add_argument("--json", metavar="DIR", help="write one JSON file per bundle")
    p.add_argument("--dot", metavar="DIR", help="write one DOT file per bundle")
    p.add_argument("--png", metavar="DIR", help="render one PNG file per bundle")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("deliver-once", help="check declared families in a bundle file")
    p.add_argument("--proto", required=True)
    p.add_argument("--bundle", required=True)
    p.set_defaults(func=cmd_deliver_once)

    p = sub.add_parser("faithful", help="bounded faithfulness check")
    p.add_argument("--proto", required=True)
    p.add_argument("--chor", required=True)
    p.add_argument("--amap", required=True)
    p.add_argument("--max-instances", type=_positive, default=1)
    p.add_argument("--adv-steps", type=_nonnegative, default=0)
    p.add_argument("--no-deliver-once", action="store_true")
    p.add_argument("--jobs", type=_positive, default=1)
    p.add_argument("--out", metavar="DIR", default="faithful_out")
    p.set_defaults(func=cmd_faithful)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except FileNotFoundError as exc:
        name = exc.filename if exc.filename else str(exc)
        print(f"error: missing file: {name}", file=sys.stderr)
        return 66
    except (ChorParseError, ProtoError, AmapError, TermSyntaxError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 65
    except (ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 65


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
