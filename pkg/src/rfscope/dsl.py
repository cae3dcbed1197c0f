"""Line-oriented architecture description format (.rfa).

One statement per line::

    model <name> input <H>x<W>
    <id>: <kind> [k=<h>x<w>] [s=<h>x<w>] [d=<h>x<w>] [c=<in>-><out>]
                 [g=<groups>] [bias] [up] [block=<bid>] [from <id>[,<id>...]]

Kinds: conv | dwconv | pool | gpool | dense | neutral | add | concat | output.
Defaults: s=1x1, d=1x1, g=1, from = previous line's id. ``k=3`` is shorthand
for ``k=3x3``. ``@input`` names the implicit input vertex. ``#`` starts a
comment. File order must be a valid topological order. ``up`` marks a
transposed (upsampling) convolution.
"""

from __future__ import annotations

import re

from .graph import ArchGraph, LayerKind, LayerNode, Pair, validate

INPUT_ID = "@input"

_KINDS = {k.value: k for k in LayerKind if k not in (LayerKind.INPUT,)}
_KERNEL_KINDS = frozenset({LayerKind.CONV, LayerKind.DWCONV, LayerKind.POOL})
_CHANNEL_KINDS = frozenset({LayerKind.CONV, LayerKind.DWCONV, LayerKind.DENSE})

_ID_RE = re.compile(r"[A-Za-z0-9_@./\-]+\Z")


class DslError(Exception):
    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class DslSyntaxError(DslError):
    pass


class UnknownReference(DslError):
    pass


class DuplicateId(DslError):
    pass


def _parse_pair(text: str, what: str, line: int, col: int, minimum: int = 1) -> Pair:
    parts = text.split("x")
    if len(parts) == 1:
        parts = [parts[0], parts[0]]
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise DslSyntaxError(f"malformed {what} {text!r}", line, col)
    pair = (int(parts[0]), int(parts[1]))
    if pair[0] < minimum or pair[1] < minimum:
        raise DslSyntaxError(f"{what} {text!r} must be >= {minimum}", line, col)
    return pair


def _tokens(line: str) -> list[tuple[str, int]]:
    return [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", line)]


def parse_dsl(text: str) -> ArchGraph:
    """Parse an .rfa document into a validated ArchGraph."""
    model_name = "model"
    design_res: Pair | None = None
    nodes: list[LayerNode] = [LayerNode(id=INPUT_ID, kind=LayerKind.INPUT)]
    seen = {INPUT_ID}
    prev_id = INPUT_ID
    saw_header = False

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        toks = _tokens(line)

        if not saw_header:
            if toks[0][0] != "model":
                raise DslSyntaxError("expected 'model <name> [input <H>x<W>]' header",
                                     lineno, toks[0][1])
            if len(toks) < 2:
                raise DslSyntaxError("model header needs a name", lineno, toks[0][1])
            model_name = toks[1][0]
            rest = toks[2:]
            if rest:
                if len(rest) != 2 or rest[0][0] != "input":
                    raise DslSyntaxError("malformed model header", lineno, rest[0][1])
                design_res = _parse_pair(rest[1][0], "input resolution",
                                         lineno, rest[1][1])
            saw_header = True
            continue

        node = _parse_statement(toks, lineno, seen, prev_id)
        if node.id in seen:
            raise DuplicateId(f"duplicate id {node.id!r}", lineno, toks[0][1])
        seen.add(node.id)
        nodes.append(node)
        prev_id = node.id

    if not saw_header:
        raise DslSyntaxError("empty document", 1)
    return validate(nodes, name=model_name, design_resolution=design_res)


def _parse_statement(
    toks: list[tuple[str, int]], lineno: int, seen: set[str], prev_id: str
) -> LayerNode:
    head, head_col = toks[0]
    if not head.endswith(":"):
        raise DslSyntaxError("expected '<id>:'", lineno, head_col)
    vid = head[:-1]
    if not vid or not _ID_RE.match(vid) or vid.startswith("@"):
        raise DslSyntaxError(f"bad vertex id {vid!r}", lineno, head_col)
    if len(toks) < 2:
        raise DslSyntaxError("missing layer kind", lineno, head_col + len(head))
    kind_tok, kind_col = toks[1]
    kind = _KINDS.get(kind_tok)
    if kind is None:
        raise DslSyntaxError(f"unknown kind {kind_tok!r}", lineno, kind_col)

    kernel = stride = dilation = None
    channels: tuple[int, int] | None = None
    groups: int | None = None
    bias = False
    upsample = False
    block: str | None = None
    preds: list[str] | None = None

    i = 2
    while i < len(toks):
        tok, col = toks[i]
        if tok == "from":
            if i + 1 >= len(toks):
                raise DslSyntaxError("'from' needs at least one id", lineno, col)
            ref_tok, ref_col = toks[i + 1]
            preds = []
            for ref in ref_tok.split(","):
                if not ref:
                    raise DslSyntaxError("empty id in 'from' list", lineno, ref_col)
                if ref not in seen:
                    raise UnknownReference(f"unknown vertex {ref!r}", lineno, ref_col)
                preds.append(ref)
            if i + 2 != len(toks):
                raise DslSyntaxError("'from' must be the last clause", lineno,
                                     toks[i + 2][1])
            break
        elif tok == "bias":
            bias = True
        elif tok == "up":
            upsample = True
        elif tok.startswith("k="):
            kernel = _parse_pair(tok[2:], "kernel", lineno, col)
        elif tok.startswith("s="):
            stride = _parse_pair(tok[2:], "stride", lineno, col)
        elif tok.startswith("d="):
            dilation = _parse_pair(tok[2:], "dilation", lineno, col)
        elif tok.startswith("c="):
            m = re.fullmatch(r"(\d+)->(\d+)", tok[2:])
            if not m:
                raise DslSyntaxError(f"malformed channels {tok!r}", lineno, col)
            channels = (int(m.group(1)), int(m.group(2)))
        elif tok.startswith("g="):
            if not tok[2:].isdigit() or int(tok[2:]) < 1:
                raise DslSyntaxError(f"malformed groups {tok!r}", lineno, col)
            groups = int(tok[2:])
        elif tok.startswith("block="):
            block = tok[6:]
            if not block:
                raise DslSyntaxError("empty block id", lineno, col)
        else:
            raise DslSyntaxError(f"unexpected token {tok!r}", lineno, col)
        i += 1

    if kind in _KERNEL_KINDS:
        if kernel is None:
            raise DslSyntaxError(f"{kind_tok} requires k=", lineno, kind_col)
    elif kernel is not None or stride is not None or dilation is not None:
        raise DslSyntaxError(f"{kind_tok} takes no k/s/d", lineno, kind_col)
    if kind not in _CHANNEL_KINDS and (channels is not None or groups is not None or bias):
        raise DslSyntaxError(f"{kind_tok} takes no c/g/bias", lineno, kind_col)
    if upsample and kind not in (LayerKind.CONV, LayerKind.DWCONV):
        raise DslSyntaxError("'up' applies to conv/dwconv only", lineno, kind_col)

    c_in, c_out = channels if channels else (0, 0)
    if groups is None:
        # Depthwise convolutions group per input channel.
        groups = c_in if (kind is LayerKind.DWCONV and c_in) else 1

    return LayerNode(
        id=vid,
        kind=kind,
        kernel=kernel or (1, 1),
        stride=stride or (1, 1),
        dilation=dilation or (1, 1),
        channels_in=c_in,
        channels_out=c_out,
        groups=groups,
        has_bias=bias,
        predecessors=tuple(preds) if preds is not None else (prev_id,),
        block=block,
        upsample=upsample,
    )


def _fmt_pair(pair: Pair) -> str:
    return str(pair[0]) if pair[0] == pair[1] else f"{pair[0]}x{pair[1]}"


_SANITIZE_RE = re.compile(r"[^A-Za-z0-9_@./\-]")


def _safe_ids(g: ArchGraph) -> dict[str, str]:
    mapping: dict[str, str] = {g.input_id: INPUT_ID}
    used: set[str] = {INPUT_ID}
    for vid in g.order:
        if vid == g.input_id:
            continue
        safe = _SANITIZE_RE.sub("_", vid).lstrip("@") or "v"
        candidate = safe
        n = 1
        while candidate in used:
            n += 1
            candidate = f"{safe}_{n}"
        used.add(candidate)
        mapping[vid] = candidate
    return mapping


def emit_dsl(g: ArchGraph) -> str:
    """Canonical .rfa text: topological order, defaults elided, byte-stable."""
    ids = _safe_ids(g)
    header = f"model {g.name}"
    if g.design_resolution is not None:
        header += f" input {_fmt_pair(g.design_resolution)}"
    lines = [header]

    prev = g.input_id
    for vid in g.order:
        node = g.nodes[vid]
        if node.kind is LayerKind.INPUT:
            continue
        parts = [f"{ids[vid]}:", node.kind.value]
        if node.kind in _KERNEL_KINDS:
            parts.append(f"k={_fmt_pair(node.kernel)}")
        if node.stride != (1, 1):
            parts.append(f"s={_fmt_pair(node.stride)}")
        if node.dilation != (1, 1):
            parts.append(f"d={_fmt_pair(node.dilation)}")
        if node.channels_in or node.channels_out:
            parts.append(f"c={node.channels_in}->{node.channels_out}")
        default_groups = (
            node.channels_in if (node.kind is LayerKind.DWCONV and node.channels_in) else 1
        )
        if node.groups != default_groups:
            parts.append(f"g={node.groups}")
        if node.has_bias:
            parts.append("bias")
        if node.upsample:
            parts.append("up")
        if node.block is not None:
            parts.append(f"block={node.block}")
        if node.predecessors != (prev,):
            parts.append("from " + ",".join(ids[p] for p in node.predecessors))
        lines.append(" ".join(parts))
        prev = vid
    return "\n".join(lines) + "\n"
