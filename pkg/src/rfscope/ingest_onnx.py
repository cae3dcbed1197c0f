"""ONNX model ingestion via an ordered handler chain with a neutral fallback.

Handlers are tried most-specific first; exactly one processes each node.
The terminal handler matches everything and produces a neutral vertex
(kernel and stride 1), so unrecognized operators never perturb the
receptive-field computation. The chain is a plain list that callers may
extend through ``register_handler``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from typing import Callable

from . import onnxpb
from .graph import ArchGraph, LayerKind, LayerNode, validate
from .onnxpb import MalformedFile, Model, Node

Pair = tuple[int, int]


class IngestError(Exception):
    pass


class MultipleInputs(IngestError):
    """Models with more than a single input are not supported."""


class MissingKernelAttribute(IngestError):
    pass


class ControlFlowUnsupported(IngestError):
    """Graphs with control-flow operators cannot be analyzed statically."""


class TerminalDisplaced(IngestError):
    """A handler may not be inserted after the catch-all fallback."""


_CONTROL_FLOW_OPS = frozenset({"Loop", "If", "Scan", "LSTM", "GRU", "RNN"})
_SHAPE_DOMAIN_OPS = frozenset({"Shape", "Constant", "ConstantOfShape"})


@dataclass(frozen=True)
class NodeView:
    """An ONNX node plus the lookups an extractor needs."""

    node: Node
    initializer_dims: dict[str, tuple[int, ...]]

    @property
    def op_type(self) -> str:
        return self.node.op_type

    def weight_dims(self, index: int = 1) -> tuple[int, ...] | None:
        if index >= len(self.node.inputs):
            return None
        return self.initializer_dims.get(self.node.inputs[index])


#: An extracted layer is a LayerNode with placeholder id/predecessors;
#: ingestion fills those in from the tensor dataflow.
Extractor = Callable[[NodeView], LayerNode]
Matcher = Callable[[NodeView], bool]


@dataclass(frozen=True)
class Handler:
    name: str
    matches: Matcher
    extract: Extractor
    terminal: bool = False


def _pair(values: tuple[int, ...] | None, default: int = 1) -> Pair:
    if not values:
        return (default, default)
    if len(values) == 1:
        return (int(values[0]), int(values[0]))
    return (int(values[0]), int(values[1]))


def _layer(kind: LayerKind, **fields) -> LayerNode:
    return LayerNode(id="?", kind=kind, **fields)


def _extract_conv(view: NodeView) -> LayerNode:
    node = view.node
    kernel = node.attr_ints("kernel_shape")
    weight = view.weight_dims()
    if kernel is None:
        if weight is not None and len(weight) >= 4:
            kernel = weight[2:4]
        else:
            raise MissingKernelAttribute(f"Conv node {node.name!r} lacks kernel_shape")
    group = node.attr_int("group", 1)
    c_in = c_out = 0
    if weight is not None and len(weight) >= 2:
        c_out = int(weight[0])
        c_in = int(weight[1]) * group
    depthwise = group > 1 and weight is not None and len(weight) >= 2 and weight[1] == 1
    return _layer(
        LayerKind.DWCONV if depthwise else LayerKind.CONV,
        kernel=_pair(kernel),
        stride=_pair(node.attr_ints("strides")),
        dilation=_pair(node.attr_ints("dilations")),
        channels_in=c_in,
        channels_out=c_out,
        groups=c_in if depthwise else group,
        has_bias=len(node.inputs) > 2,
    )


def _extract_conv_transpose(view: NodeView) -> LayerNode:
    node = view.node
    kernel = node.attr_ints("kernel_shape")
    weight = view.weight_dims()
    if kernel is None:
        if weight is not None and len(weight) >= 4:
            kernel = weight[2:4]
        else:
            raise MissingKernelAttribute(
                f"ConvTranspose node {node.name!r} lacks kernel_shape"
            )
    group = node.attr_int("group", 1)
    c_in = c_out = 0
    if weight is not None and len(weight) >= 2:
        c_in = int(weight[0])
        c_out = int(weight[1]) * group
    return _layer(
        LayerKind.CONV,
        kernel=_pair(kernel),
        stride=_pair(node.attr_ints("strides")),
        dilation=_pair(node.attr_ints("dilations")),
        channels_in=c_in,
        channels_out=c_out,
        groups=group,
        has_bias=len(node.inputs) > 2,
        upsample=True,
    )


def _extract_pool(view: NodeView) -> LayerNode:
    node = view.node
    kernel = node.attr_ints("kernel_shape")
    if kernel is None:
        raise MissingKernelAttribute(f"{node.op_type} node {node.name!r} lacks kernel_shape")
    return _layer(
        LayerKind.POOL,
        kernel=_pair(kernel),
        stride=_pair(node.attr_ints("strides")),
        dilation=_pair(node.attr_ints("dilations")),
    )


def _extract_dense(view: NodeView) -> LayerNode:
    weight = view.weight_dims()
    c_in = c_out = 0
    if weight is not None and len(weight) == 2:
        if view.op_type == "Gemm" and view.node.attr_int("transB", 0):
            c_out, c_in = int(weight[0]), int(weight[1])
        else:
            c_in, c_out = int(weight[0]), int(weight[1])
    return _layer(
        LayerKind.DENSE,
        channels_in=c_in,
        channels_out=c_out,
        has_bias=len(view.node.inputs) > 2,
    )


def _op_handler(name: str, ops: set[str], extract: Extractor) -> Handler:
    return Handler(
        name=name,
        matches=lambda view, _ops=frozenset(ops): view.op_type in _ops,
        extract=extract,
    )


def default_handlers() -> list[Handler]:
    """The built-in handler chain, most-specific first, fallback last."""
    return [
        _op_handler("conv", {"Conv"}, _extract_conv),
        _op_handler("conv-transpose", {"ConvTranspose"}, _extract_conv_transpose),
        _op_handler("pool", {"MaxPool", "AveragePool", "LpPool"}, _extract_pool),
        _op_handler(
            "global-pool",
            {"GlobalAveragePool", "GlobalMaxPool", "ReduceMean"},
            lambda view: _layer(LayerKind.GPOOL),
        ),
        _op_handler("dense", {"Gemm", "MatMul"}, _extract_dense),
        _op_handler("merge-add", {"Add", "Sum"}, lambda view: _layer(LayerKind.ADD)),
        _op_handler("merge-concat", {"Concat"}, lambda view: _layer(LayerKind.CONCAT)),
        Handler(
            name="neutral-fallback",
            matches=lambda view: True,
            extract=lambda view: _layer(LayerKind.NEUTRAL),
            terminal=True,
        ),
    ]


def register_handler(chain: list[Handler], handler: Handler, position: int) -> list[Handler]:
    """Return a new chain with ``handler`` inserted at ``position``.

    Raises:
        TerminalDisplaced: the insertion would land after the catch-all.
    """
    terminal_index = next(
        (i for i, h in enumerate(chain) if h.terminal), len(chain) - 1
    )
    if position > terminal_index:
        raise TerminalDisplaced(
            f"position {position} is after the terminal handler at {terminal_index}"
        )
    new_chain = list(chain)
    new_chain.insert(position, handler)
    return new_chain


def _dispatch(view: NodeView, chain: list[Handler]) -> LayerNode:
    for handler in chain:
        if handler.matches(view):
            return handler.extract(view)
    raise IngestError(f"no handler matched {view.op_type}")  # unreachable with fallback


_SANITIZE_RE = re.compile(r"[^A-Za-z0-9_./\-]")


def _vertex_id(node: Node, index: int, used: set[str]) -> str:
    base = node.name or f"{node.op_type}_{index}"
    base = _SANITIZE_RE.sub("_", base).lstrip("@") or f"{node.op_type}_{index}"
    candidate = base
    n = 1
    while candidate in used:
        n += 1
        candidate = f"{base}_{n}"
    used.add(candidate)
    return candidate


def _shape_domain(model: Model) -> set[str]:
    """Names of tensors that carry shapes/constants rather than features.

    Seeds at Constant/Shape producers and closes over nodes all of whose
    dataflow inputs are already in the domain; dropping these is the
    bookkeeping-removal pass (it removes no computation that affects the
    receptive field).
    """
    graph = model.graph
    constant_tensors: set[str] = set()
    changed = True
    while changed:
        changed = False
        for node in graph.nodes:
            outs = [t for t in node.outputs if t and t not in constant_tensors]
            if not outs:
                continue
            if node.op_type in _SHAPE_DOMAIN_OPS:
                constant_tensors.update(outs)
                changed = True
                continue
            feeds = [t for t in node.inputs if t and t not in graph.initializers]
            if feeds and all(t in constant_tensors for t in feeds):
                constant_tensors.update(outs)
                changed = True
    return constant_tensors


def load_onnx(data: bytes, handlers: list[Handler] | None = None) -> ArchGraph:
    """Decode ONNX bytes into a validated ArchGraph.

    Raises:
        MalformedFile: the buffer is not an ONNX model.
        MultipleInputs: the graph has more than one input tensor.
        ControlFlowUnsupported: Loop/If/Scan/recurrent operators present.
        MissingKernelAttribute: a Conv/Pool node lacks kernel_shape.
    """
    model = onnxpb.parse_model(data)
    graph = model.graph
    chain = handlers if handlers is not None else default_handlers()

    data_inputs = [vi for vi in graph.inputs if vi.name not in graph.initializers]
    if len(data_inputs) != 1:
        raise MultipleInputs(f"expected one graph input, found {len(data_inputs)}")
    input_info = data_inputs[0]

    for node in graph.nodes:
        if node.op_type in _CONTROL_FLOW_OPS or any(
            a.has_graph for a in node.attributes.values()
        ):
            raise ControlFlowUnsupported(f"{node.op_type} node {node.name!r}")

    constant_tensors = _shape_domain(model)
    initializer_dims = {name: t.dims for name, t in graph.initializers.items()}

    design_res: Pair | None = None
    if len(input_info.shape) == 4 and input_info.shape[2] > 0 and input_info.shape[3] > 0:
        design_res = (int(input_info.shape[2]), int(input_info.shape[3]))

    input_id = "@input"
    nodes: list[LayerNode] = [LayerNode(id=input_id, kind=LayerKind.INPUT)]
    used = {input_id}
    producer: dict[str, str] = {input_info.name: input_id}

    for index, node in enumerate(graph.nodes):
        if any(t in constant_tensors for t in node.outputs):
            continue
        preds: list[str] = []
        for tensor in node.inputs:
            vid = producer.get(tensor)
            if vid is not None and vid not in preds:
                preds.append(vid)
        if not preds:
            # Disconnected from the dataflow (weights-only inputs); skip.
            continue
        view = NodeView(node=node, initializer_dims=initializer_dims)
        extracted = _dispatch(view, chain)
        vid = _vertex_id(node, index, used)
        nodes.append(replace(
            extracted,
            id=vid,
            name=node.name or vid,
            predecessors=tuple(preds),
        ))
        for tensor in node.outputs:
            if tensor:
                producer[tensor] = vid

    sink_preds = []
    for out in graph.outputs:
        vid = producer.get(out.name)
        if vid is not None and vid not in sink_preds:
            sink_preds.append(vid)
    if not sink_preds:
        raise MalformedFile("graph outputs are not produced by any node")
    out_id = "output"
    n = 1
    while out_id in used:
        n += 1
        out_id = f"output_{n}"
    nodes.append(LayerNode(id=out_id, kind=LayerKind.OUTPUT,
                           predecessors=tuple(sink_preds)))

    name = graph.name or "onnx-model"
    return validate(nodes, name=name, design_resolution=design_res)
