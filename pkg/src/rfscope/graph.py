"""Architecture graph IR: layer vertices, DAG validation, parameter counting.

The graph is the substrate every analysis operates on. Values are frozen
after validation; all operations here are pure.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from types import MappingProxyType
from typing import Iterable, Mapping

Pair = tuple[int, int]


class GraphError(Exception):
    """Base class for graph construction/validation failures."""


class CycleDetected(GraphError):
    pass


class MultipleInputs(GraphError):
    pass


class UnreachableVertex(GraphError):
    pass


class MissingPredecessor(GraphError):
    pass


class InvalidNode(GraphError):
    pass


class UnknownChannels(GraphError):
    """A parametric vertex has channel count 0, so it cannot be counted."""


class LayerKind(Enum):
    INPUT = "input"
    CONV = "conv"
    DWCONV = "dwconv"
    POOL = "pool"
    GPOOL = "gpool"
    DENSE = "dense"
    NEUTRAL = "neutral"
    ADD = "add"
    CONCAT = "concat"
    OUTPUT = "output"


MERGE_KINDS = frozenset({LayerKind.ADD, LayerKind.CONCAT})
#: Kinds that own trainable weights and therefore need channel counts.
PARAMETRIC_KINDS = frozenset({LayerKind.CONV, LayerKind.DWCONV, LayerKind.DENSE})
#: Kinds whose kernel/stride must stay at (1, 1).
POINTWISE_KINDS = frozenset(
    {LayerKind.INPUT, LayerKind.GPOOL, LayerKind.DENSE, LayerKind.NEUTRAL,
     LayerKind.ADD, LayerKind.CONCAT, LayerKind.OUTPUT}
)


@dataclass(frozen=True)
class LayerNode:
    """One vertex of the architecture DAG.

    kernel/stride/dilation are per-axis (h, w) and stay at (1, 1) for
    non-spatial kinds. channels of 0 mean "unknown"; receptive-field
    analysis never needs them, only count_params does. ``upsample`` marks
    transposed convolutions whose stride divides the growth factor instead
    of multiplying it. ``block`` is an optional building-block tag consumed
    by prune-and-widen.
    """

    id: str
    kind: LayerKind
    name: str = ""
    kernel: Pair = (1, 1)
    stride: Pair = (1, 1)
    dilation: Pair = (1, 1)
    channels_in: int = 0
    channels_out: int = 0
    groups: int = 1
    has_bias: bool = False
    predecessors: tuple[str, ...] = ()
    block: str | None = None
    upsample: bool = False

    def __post_init__(self) -> None:
        if not self.name:
            object.__setattr__(self, "name", self.id)
        object.__setattr__(self, "predecessors", tuple(self.predecessors))

    @property
    def label(self) -> str:
        return self.name or self.id


@dataclass(frozen=True)
class ArchGraph:
    """Validated, immutable architecture DAG with a single input vertex."""

    nodes: Mapping[str, LayerNode]
    input_id: str
    output_ids: tuple[str, ...]
    order: tuple[str, ...]
    name: str = "model"
    design_resolution: Pair | None = None

    def __iter__(self) -> Iterable[LayerNode]:
        return (self.nodes[v] for v in self.order)

    def successors(self) -> dict[str, tuple[str, ...]]:
        succ: dict[str, list[str]] = {v: [] for v in self.nodes}
        for node in self:
            for p in node.predecessors:
                succ[p].append(node.id)
        return {v: tuple(s) for v, s in succ.items()}


def effective_kernel(kernel: Pair, dilation: Pair) -> Pair:
    """Dilated kernel extent per axis: d*(k-1)+1."""
    return (dilation[0] * (kernel[0] - 1) + 1, dilation[1] * (kernel[1] - 1) + 1)


def _check_node(node: LayerNode) -> None:
    for attr in ("kernel", "stride", "dilation"):
        pair = getattr(node, attr)
        if len(pair) != 2 or any(c < 1 for c in pair):
            raise InvalidNode(f"{node.id}: {attr}={pair} must be a pair of ints >= 1")
    if node.groups < 1:
        raise InvalidNode(f"{node.id}: groups={node.groups} must be >= 1")
    if node.channels_in < 0 or node.channels_out < 0:
        raise InvalidNode(f"{node.id}: channel counts must be non-negative")
    if node.kind in POINTWISE_KINDS:
        if node.kernel != (1, 1) or node.stride != (1, 1) or node.dilation != (1, 1):
            raise InvalidNode(
                f"{node.id}: kind {node.kind.value} requires kernel/stride/dilation (1,1)"
            )


def validate(
    nodes: Iterable[LayerNode] | ArchGraph,
    *,
    name: str = "model",
    design_resolution: Pair | None = None,
) -> ArchGraph:
    """Validate a graph candidate and return the frozen ArchGraph.

    Idempotent: validating an already-validated graph returns an equal graph.

    Raises:
        MultipleInputs: not exactly one Input vertex.
        MissingPredecessor: an edge references an unknown vertex, or a
            non-input vertex has no predecessors.
        CycleDetected: the graph is not a DAG.
        UnreachableVertex: a vertex cannot be reached from the input.
        InvalidNode: a vertex violates its own field invariants.
    """
    if isinstance(nodes, ArchGraph):
        name = nodes.name
        design_resolution = nodes.design_resolution
        nodes = list(nodes.nodes.values())
    else:
        nodes = list(nodes)

    table: dict[str, LayerNode] = {}
    for node in nodes:
        if node.id in table:
            raise InvalidNode(f"duplicate vertex id {node.id!r}")
        _check_node(node)
        table[node.id] = node

    inputs = [n.id for n in table.values() if n.kind is LayerKind.INPUT]
    if len(inputs) != 1:
        raise MultipleInputs(f"expected exactly one input vertex, found {len(inputs)}")
    input_id = inputs[0]

    for node in table.values():
        if node.kind is LayerKind.INPUT:
            if node.predecessors:
                raise MissingPredecessor(f"input vertex {node.id} must have no predecessors")
            continue
        if not node.predecessors:
            raise MissingPredecessor(f"{node.id} has no predecessors")
        for p in node.predecessors:
            if p not in table:
                raise MissingPredecessor(f"{node.id} references unknown vertex {p!r}")

    order = _topo_sort(table)

    reachable = {input_id}
    for v in order:
        node = table[v]
        if node.kind is not LayerKind.INPUT and any(p in reachable for p in node.predecessors):
            reachable.add(v)
    for v in table:
        if v not in reachable:
            raise UnreachableVertex(f"{v} is not reachable from the input vertex")

    succ_count = {v: 0 for v in table}
    for node in table.values():
        for p in node.predecessors:
            succ_count[p] += 1
    output_ids = tuple(v for v in order if succ_count[v] == 0)

    return ArchGraph(
        nodes=MappingProxyType({v: table[v] for v in order}),
        input_id=input_id,
        output_ids=output_ids,
        order=tuple(order),
        name=name,
        design_resolution=design_resolution,
    )


def _topo_sort(table: Mapping[str, LayerNode]) -> list[str]:
    # Kahn's algorithm; the ready queue is kept in insertion order so two
    # runs over the same construction order produce identical output.
    indeg = {v: len(n.predecessors) for v, n in table.items()}
    succ: dict[str, list[str]] = {v: [] for v in table}
    for node in table.values():
        for p in node.predecessors:
            if p in succ:
                succ[p].append(node.id)
    ready = [v for v in table if indeg[v] == 0]
    order: list[str] = []
    while ready:
        v = ready.pop(0)
        order.append(v)
        for s in succ[v]:
            indeg[s] -= 1
            if indeg[s] == 0:
                ready.append(s)
    if len(order) != len(table):
        stuck = sorted(set(table) - set(order))
        raise CycleDetected(f"cycle involving {', '.join(stuck)}")
    return order


def topo_order(g: ArchGraph) -> tuple[str, ...]:
    """Topological vertex order, deterministic (ties broken by insertion)."""
    return g.order


def count_params(g: ArchGraph) -> int:
    """Total trainable parameters of conv/dense vertices.

    Normalization layers are out of the model by design; Neutral, pool and
    merge vertices contribute 0.

    Raises:
        UnknownChannels: a parametric vertex has a channel count of 0.
    """
    total = 0
    for node in g:
        if node.kind not in PARAMETRIC_KINDS:
            continue
        if node.channels_in <= 0 or node.channels_out <= 0:
            raise UnknownChannels(f"{node.id} has unknown channel counts")
        if node.kind is LayerKind.DENSE:
            total += node.channels_in * node.channels_out
        else:
            kh, kw = node.kernel
            total += kh * kw * (node.channels_in // node.groups) * node.channels_out
        if node.has_bias:
            total += node.channels_out
    return total


def with_layer(g: ArchGraph, vertex: str, **fields) -> ArchGraph:
    """Return a revalidated copy of the graph with one vertex's fields replaced.

    Used for manual overrides (e.g. changing a patchify layer's kernel and
    stride) that fall outside the automated refinement search.
    """
    if vertex not in g.nodes:
        raise MissingPredecessor(f"unknown vertex {vertex!r}")
    nodes = [replace(n, **fields) if n.id == vertex else n for n in g]
    return validate(nodes, name=g.name, design_resolution=g.design_resolution)
