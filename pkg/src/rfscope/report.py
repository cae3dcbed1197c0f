"""Report serialization: DOT visualization, JSON document, plain text."""

from __future__ import annotations

import json
from fractions import Fraction

from .analysis import AnalysisReport, LayerFlag
from .graph import ArchGraph, LayerKind, UnknownChannels, count_params
from .refine import PruneAndWiden, RefinementProposal, StrideReduction

_FLAG_COLORS = {
    LayerFlag.UNPRODUCTIVE: "red",
    LayerFlag.UNDERUTILIZED: "orange",
}


def _num(value) -> int:
    # RF quantities are exact; fractional values only arise from upsampling
    # layers with even kernels, where the covered region is rounded up.
    if isinstance(value, Fraction):
        return int(value) if value.denominator == 1 else -(-value.numerator // value.denominator)
    return int(value)


def _pair(values) -> list[int]:
    return [_num(values[0]), _num(values[1])]


def _fmt_pair(values) -> str:
    return f"{_num(values[0])}x{_num(values[1])}"


def _dot_quote(text: str) -> str:
    # DOT quoted strings: only the quote needs escaping; backslash
    # sequences like \n are meaningful line breaks.
    return '"' + text.replace('"', '\\"') + '"'


def to_dot(g: ArchGraph, report: AnalysisReport) -> str:
    """DOT digraph of the architecture with flagged layers colored.

    Unproductive layers are filled red, underutilized layers orange;
    everything else keeps the default style. Node order is topological,
    so output is deterministic.
    """
    by_id = {l.id: l for l in report.layers}
    lines = [f"digraph {_dot_quote(g.name)} {{", "  rankdir=TB;",
             "  node [shape=box, fontname=monospace];"]
    for vid in g.order:
        node = g.nodes[vid]
        layer = by_id[vid]
        label_parts = [node.label, node.kind.value]
        if node.kind not in (LayerKind.INPUT, LayerKind.OUTPUT):
            label_parts.append(
                f"k={_fmt_pair(node.kernel)} s={_fmt_pair(node.stride)}"
            )
            label_parts.append(
                f"r={_fmt_pair(layer.r_min)}..{_fmt_pair(layer.r_max)}"
            )
        label = "\\n".join(label_parts)
        attrs = [f"label={_dot_quote(label)}"]
        color = _FLAG_COLORS.get(layer.flag)
        if color:
            attrs.append("style=filled")
            attrs.append(f"fillcolor={color}")
        lines.append(f"  {_dot_quote(vid)} [{', '.join(attrs)}];")
    for vid in g.order:
        for p in g.nodes[vid].predecessors:
            lines.append(f"  {_dot_quote(p)} -> {_dot_quote(vid)};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def _proposal_dict(p: RefinementProposal) -> dict:
    if isinstance(p.variant, StrideReduction):
        body = {
            "variant": "stride_reduction",
            "changes": [
                {"id": c.vertex, "old_stride": list(c.old), "new_stride": list(c.new)}
                for c in p.variant.changes
            ],
        }
    else:
        assert isinstance(p.variant, PruneAndWiden)
        body = {
            "variant": "prune_and_widen",
            "removed": list(p.variant.removed),
            "widened": [
                {"id": w.vertex, "old_channels": w.old, "new_channels": w.new}
                for w in p.variant.widened
            ],
        }
    body["predicted_imin"] = _pair(p.predicted_imin)
    body["param_delta"] = p.param_delta
    return body


def to_json(
    report: AnalysisReport,
    proposals: list[RefinementProposal] | None = None,
    *,
    graph: ArchGraph | None = None,
) -> str:
    """Schema-stable JSON report, newline-terminated.

    The ``proposals`` key is emitted only when proposals are given; params
    is null when the graph is absent or has unknown channel counts.
    """
    params = None
    if graph is not None:
        try:
            params = count_params(graph)
        except UnknownChannels:
            params = None
    doc = {
        "model": graph.name if graph is not None else "model",
        "input_resolution": list(report.input_resolution),
        "i_min": _pair(report.i_min),
        "i_max": _pair(report.i_max),
        "fully_utilized": report.fully_utilized,
        "params": params,
        "layers": [
            {
                "id": l.id,
                "name": l.name,
                "kind": l.kind.value,
                "kernel": list(l.kernel),
                "stride": list(l.stride),
                "r_min": _pair(l.r_min),
                "r_max": _pair(l.r_max),
                "flag": l.flag.value,
            }
            for l in report.layers
        ],
    }
    if proposals is not None:
        doc["proposals"] = [_proposal_dict(p) for p in proposals]
    return json.dumps(doc, indent=2) + "\n"


def to_text(report: AnalysisReport, *, graph: ArchGraph | None = None) -> str:
    """Human-readable summary table."""
    lines = []
    name = graph.name if graph is not None else "model"
    lines.append(f"model: {name}")
    lines.append(f"input resolution: {_fmt_pair(report.input_resolution)}")
    lines.append(f"i_min: {_fmt_pair(report.i_min)}")
    lines.append(f"i_max: {_fmt_pair(report.i_max)}")
    lines.append(f"fully utilized: {'yes' if report.fully_utilized else 'no'}")
    flagged = report.flagged()
    if flagged:
        unp = sum(1 for l in flagged if l.flag is LayerFlag.UNPRODUCTIVE)
        lines.append(f"flagged layers: {len(flagged) - unp} underutilized, {unp} unproductive")
    header = f"{'id':<28} {'kind':<8} {'k':>5} {'s':>5} {'r_min':>11} {'r_max':>11}  flag"
    lines.append(header)
    lines.append("-" * len(header))
    for l in report.layers:
        lines.append(
            f"{l.id:<28} {l.kind.value:<8} {_fmt_pair(l.kernel):>5} "
            f"{_fmt_pair(l.stride):>5} {_fmt_pair(l.r_min):>11} {_fmt_pair(l.r_max):>11}"
            f"  {l.flag.value if l.flag is not LayerFlag.PRODUCTIVE else ''}".rstrip()
        )
    return "\n".join(lines) + "\n"
