"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 ingestion/validation error,
3 utilization-check failure. Diagnostics go to stderr, data to stdout.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import dsl, ingest_onnx, refine, report
from .analysis import classify, compute_imin
from .dsl import DslError
from .engine import propagate
from .graph import ArchGraph, GraphError, LayerKind, PARAMETRIC_KINDS, Pair
from .onnxpb import MalformedFile
from .refine import RefineError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INGEST = 2
EXIT_CHECK_FAILED = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # argparse defaults to exit code 2
        raise _UsageError(message)


def _parse_res(text: str) -> Pair:
    parts = text.lower().split("x")
    if len(parts) == 1:
        parts = [parts[0], parts[0]]
    if len(parts) != 2 or not all(p.isdigit() for p in parts) or any(int(p) < 1 for p in parts):
        raise _UsageError(f"bad resolution {text!r}, expected HxW")
    return (int(parts[0]), int(parts[1]))


def _load_model(path_text: str) -> ArchGraph:
    path = Path(path_text)
    if not path.exists():
        raise FileNotFoundError(path_text)
    if path.suffix == ".onnx":
        return ingest_onnx.load_onnx(path.read_bytes())
    if path.suffix == ".rfa":
        return dsl.parse_dsl(path.read_text(encoding="utf-8"))
    # Extension-based inference failed; .rfa is the textual default.
    return dsl.parse_dsl(path.read_text(encoding="utf-8"))


def _write_out(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _res_or_design(args, g: ArchGraph) -> Pair:
    if args.input_res:
        return _parse_res(args.input_res)
    if g.design_resolution is not None:
        return g.design_resolution
    raise _UsageError("--input-res is required (model declares no design resolution)")


def _cmd_analyze(args) -> int:
    g = _load_model(args.model)
    i_res = _res_or_design(args, g)
    rep = classify(g, propagate(g), i_res)
    fmt = args.format
    if fmt is None and args.out:
        fmt = {".json": "json", ".dot": "dot"}.get(Path(args.out).suffix)
    if fmt is None:
        fmt = "text"
    if fmt == "json":
        text = report.to_json(rep, graph=g)
    elif fmt == "dot":
        text = report.to_dot(g, rep)
    else:
        text = report.to_text(rep, graph=g)
    _write_out(text, args.out)
    return EXIT_OK


def _cmd_imin(args) -> int:
    g = _load_model(args.model)
    i_min = compute_imin(g, propagate(g))
    print(f"{int(i_min[0])}x{int(i_min[1])}")
    return EXIT_OK


def _cmd_check(args) -> int:
    g = _load_model(args.model)
    i_res = _res_or_design(args, g)
    rep = classify(g, propagate(g), i_res)
    i_min = f"{int(rep.i_min[0])}x{int(rep.i_min[1])}"
    if rep.fully_utilized:
        print(f"fully utilized at {i_res[0]}x{i_res[1]} (i_min {i_min})")
        return EXIT_OK
    flagged = rep.flagged()
    print(
        f"NOT fully utilized at {i_res[0]}x{i_res[1]}: i_min {i_min}, "
        f"{len(flagged)} flagged layer(s)"
    )
    return EXIT_CHECK_FAILED


def _default_widenable(g: ArchGraph) -> list[str]:
    # Widen feature-extractor convolutions; dense heads keep their class count.
    return [
        v for v in g.order
        if g.nodes[v].kind in PARAMETRIC_KINDS
        and g.nodes[v].kind is not LayerKind.DENSE
        and g.nodes[v].channels_out > 0
    ]


def _cmd_refine(args) -> int:
    g = _load_model(args.model)
    i_res = _res_or_design(args, g)
    if args.strategy == "stride":
        proposals = refine.enumerate_stride_reductions(
            g, i_res, max_changes=args.max_changes
        )
    else:
        widenable = args.widen.split(",") if args.widen else _default_widenable(g)
        proposals = [refine.prune_and_widen(
            g, i_res, widenable, tolerance=args.tolerance, quantum=args.quantum
        )]
    rep = classify(g, propagate(g), i_res)
    sys.stdout.write(report.to_json(rep, proposals, graph=g))
    if args.emit_dsl:
        refined = refine.apply(g, proposals[0])
        Path(args.emit_dsl).write_text(dsl.emit_dsl(refined), encoding="utf-8")
    return EXIT_OK


def _cmd_convert(args) -> int:
    if args.to != "dsl":
        raise _UsageError(f"unsupported conversion target {args.to!r}")
    g = _load_model(args.model)
    _write_out(dsl.emit_dsl(g), args.out)
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="rfscope",
        description="Receptive-field analyzer and refinement advisor for CNN architectures.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="full per-layer receptive-field report")
    p.add_argument("model", help="architecture file (.rfa or .onnx)")
    p.add_argument("--input-res", help="input resolution HxW (default: design resolution)")
    p.add_argument("--format", choices=("text", "json", "dot"))
    p.add_argument("--out", help="write to file instead of stdout")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("imin", help="print the minimal feasible input resolution")
    p.add_argument("model")
    p.set_defaults(func=_cmd_imin)

    p = sub.add_parser("check", help="exit 3 unless fully utilized at the given resolution")
    p.add_argument("model")
    p.add_argument("--input-res")
    p.set_defaults(func=_cmd_check)

    p = sub.add_parser("refine", help="propose refinements restoring full utilization")
    p.add_argument("model")
    p.add_argument("--input-res")
    p.add_argument("--strategy", choices=("stride", "prune"), required=True)
    p.add_argument("--max-changes", type=int, default=2)
    p.add_argument("--tolerance", type=float, default=0.02)
    p.add_argument("--quantum", type=int, default=1)
    p.add_argument("--widen", help="comma-separated widenable vertex ids (prune)")
    p.add_argument("--emit-dsl", help="write the top proposal's graph as .rfa")
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("convert", help="convert a model file to the textual format")
    p.add_argument("model")
    p.add_argument("--to", default="dsl")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_convert)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"file not found: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except (DslError, GraphError, MalformedFile,
            ingest_onnx.IngestError, RefineError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INGEST


def entry() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entry()
