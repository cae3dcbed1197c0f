"""Architecture refinement: stride reduction and prune-and-widen.

Both strategies produce a RefinementProposal whose predicted_imin is
computed by actually rewriting the graph and re-propagating, so prediction
honesty holds by construction and ``apply`` reproduces it exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from itertools import combinations
from typing import Iterable, Sequence

from .analysis import LayerFlag, classify, compute_imin
from .engine import ScalarPair, propagate
from .graph import (
    ArchGraph,
    GraphError,
    LayerKind,
    LayerNode,
    Pair,
    PARAMETRIC_KINDS,
    count_params,
    validate,
)


class RefineError(Exception):
    pass


class NoFeasibleProposal(RefineError):
    pass


class RemovalBreaksGraph(RefineError):
    pass


class CannotMeetTolerance(RefineError):
    pass


class StaleProposal(RefineError):
    pass


@dataclass(frozen=True)
class StrideChange:
    vertex: str
    old: Pair
    new: Pair


@dataclass(frozen=True)
class WidthChange:
    vertex: str
    old: int
    new: int


@dataclass(frozen=True)
class StrideReduction:
    changes: tuple[StrideChange, ...]


@dataclass(frozen=True)
class PruneAndWiden:
    removed: tuple[str, ...]
    widened: tuple[WidthChange, ...]


@dataclass(frozen=True)
class RefinementProposal:
    variant: StrideReduction | PruneAndWiden
    predicted_imin: ScalarPair
    param_delta: int


def _lt(a: ScalarPair, b: Pair) -> bool:
    return a[0] < b[0] and a[1] < b[1]


def _apply_stride(g: ArchGraph, changes: Iterable[StrideChange]) -> ArchGraph:
    table = dict(g.nodes)
    for ch in changes:
        node = table.get(ch.vertex)
        if node is None:
            raise StaleProposal(f"vertex {ch.vertex!r} absent from graph")
        if node.stride != tuple(ch.old):
            raise StaleProposal(
                f"{ch.vertex}: stride is {node.stride}, proposal expects {ch.old}"
            )
        table[ch.vertex] = replace(node, stride=tuple(ch.new))
    return validate(table.values(), name=g.name, design_resolution=g.design_resolution)


def stride_proposal(g: ArchGraph, changes: Sequence[tuple[str, Pair]]) -> RefinementProposal:
    """Build a stride-change proposal by hand (for catalog-style overrides).

    ``changes`` maps vertex id to the new stride; the predicted I_min is
    computed from the rewritten graph. Stride changes never touch weights,
    so param_delta is 0.
    """
    sc = []
    for vid, new in changes:
        if vid not in g.nodes:
            raise StaleProposal(f"vertex {vid!r} absent from graph")
        sc.append(StrideChange(vertex=vid, old=g.nodes[vid].stride, new=tuple(new)))
    rewritten = _apply_stride(g, sc)
    return RefinementProposal(
        variant=StrideReduction(changes=tuple(sc)),
        predicted_imin=compute_imin(rewritten, propagate(rewritten)),
        param_delta=0,
    )


def enumerate_stride_reductions(
    g: ArchGraph, i_res: Pair, max_changes: int = 2
) -> list[RefinementProposal]:
    """Search stride->(1,1) rewrites that make the graph fully utilized.

    Proposals are ordered by (1) predicted I_min closest below i_res,
    (2) fewest changed vertices, (3) changed vertices deepest in
    topological order.

    Raises:
        NoFeasibleProposal: the graph is already fully utilized at i_res,
            or no subset within max_changes reaches predicted I_min < i_res.
    """
    base_imin = compute_imin(g, propagate(g))
    if _lt(base_imin, i_res):
        raise NoFeasibleProposal(
            f"I_min {base_imin} already below {tuple(i_res)}; nothing to fix"
        )

    downsampling = [
        vid for vid in g.order
        if g.nodes[vid].stride != (1, 1) and not g.nodes[vid].upsample
    ]
    topo_index = {vid: i for i, vid in enumerate(g.order)}

    proposals = []
    for size in range(1, max_changes + 1):
        for subset in combinations(downsampling, size):
            changes = tuple(
                StrideChange(vertex=vid, old=g.nodes[vid].stride, new=(1, 1))
                for vid in subset
            )
            rewritten = _apply_stride(g, changes)
            predicted = compute_imin(rewritten, propagate(rewritten))
            if not _lt(predicted, i_res):
                continue
            proposals.append(RefinementProposal(
                variant=StrideReduction(changes=changes),
                predicted_imin=predicted,
                param_delta=0,
            ))

    if not proposals:
        raise NoFeasibleProposal(
            f"no stride subset of size <= {max_changes} reaches I_min < {tuple(i_res)}"
        )

    def key(p: RefinementProposal):
        closeness = sum(i_res[a] - p.predicted_imin[a] for a in (0, 1))
        indices = sorted(
            (topo_index[c.vertex] for c in p.variant.changes), reverse=True
        )
        return (closeness, len(p.variant.changes), tuple(-i for i in indices))

    proposals.sort(key=key)
    return proposals


def _contract(g: ArchGraph, removed: set[str]) -> ArchGraph:
    """Drop vertices, reconnecting predecessors of removed spans to successors."""
    for vid in removed:
        if vid not in g.nodes:
            raise StaleProposal(f"vertex {vid!r} absent from graph")

    # Surviving predecessor frontier of each removed vertex, resolved in
    # topological order so chains of removed vertices collapse.
    resolved: dict[str, tuple[str, ...]] = {}
    for vid in g.order:
        node = g.nodes[vid]
        preds: list[str] = []
        for p in node.predecessors:
            if p in removed:
                preds.extend(q for q in resolved[p] if q not in preds)
            elif p not in preds:
                preds.append(p)
        if vid in removed:
            resolved[vid] = tuple(preds)

    survivors = []
    for vid in g.order:
        if vid in removed:
            continue
        node = g.nodes[vid]
        preds: list[str] = []
        for p in node.predecessors:
            if p in removed:
                preds.extend(q for q in resolved[p] if q not in preds)
            elif p not in preds:
                preds.append(p)
        if node.kind is not LayerKind.INPUT and not preds:
            raise RemovalBreaksGraph(f"{vid} loses all predecessors")
        survivors.append(replace(node, predecessors=tuple(preds)))

    if removed and len(survivors) <= 1:
        raise RemovalBreaksGraph("removal leaves nothing connected to the input")
    try:
        return validate(survivors, name=g.name, design_resolution=g.design_resolution)
    except GraphError as exc:
        raise RemovalBreaksGraph(str(exc)) from exc


def _repair_channels(g: ArchGraph) -> ArchGraph:
    """Re-derive channel counts along the graph after widening/removal.

    Conv/Dense keep their declared output width; passthrough kinds follow
    their input; depthwise convolutions (and any conv grouped per input
    channel) track the input width.
    """
    table: dict[str, LayerNode] = {}
    for vid in g.order:
        node = g.nodes[vid]
        if node.kind is LayerKind.INPUT:
            table[vid] = node
            continue
        pred_out = [table[p].channels_out for p in node.predecessors]
        if node.kind is LayerKind.CONCAT:
            c_in = sum(pred_out) if all(c > 0 for c in pred_out) else 0
        else:
            c_in = pred_out[0]
        if c_in <= 0:
            # Unknown upstream width (e.g. the input vertex): keep declared.
            c_in = node.channels_in
        fields: dict = {"channels_in": c_in}
        if node.kind is LayerKind.DWCONV or (
            node.kind is LayerKind.CONV and node.groups > 1
            and node.groups == node.channels_in
        ):
            fields["channels_out"] = c_in
            fields["groups"] = max(c_in, 1)
        elif node.kind not in PARAMETRIC_KINDS:
            fields["channels_out"] = c_in
        table[vid] = replace(node, **fields)
    return validate(table.values(), name=g.name, design_resolution=g.design_resolution)


def _widen(g: ArchGraph, targets: Sequence[str], factor: float, quantum: int) -> ArchGraph:
    table = dict(g.nodes)
    for vid in targets:
        node = table[vid]
        scaled = node.channels_out * factor
        new = max(quantum, int(round(scaled / quantum)) * quantum)
        table[vid] = replace(node, channels_out=new)
    return _repair_channels(
        validate(table.values(), name=g.name, design_resolution=g.design_resolution)
    )


def _removal_set(g: ArchGraph, i_res: Pair) -> tuple[str, ...]:
    report = classify(g, propagate(g), i_res)
    flagged = {l.id for l in report.layers if l.flag is not LayerFlag.PRODUCTIVE}
    blocks = {g.nodes[v].block for v in g.nodes if g.nodes[v].block is not None}
    if blocks:
        # Block-granular removal: drop every building block featuring a
        # flagged layer; blockless vertices (stem, head) always stay.
        doomed = {g.nodes[v].block for v in flagged if g.nodes[v].block is not None}
        return tuple(v for v in g.order if g.nodes[v].block in doomed)
    return tuple(v for v in g.order if v in flagged)


def prune_and_widen(
    g: ArchGraph,
    i_res: Pair,
    widenable: Sequence[str],
    tolerance: float = 0.02,
    quantum: int = 1,
) -> RefinementProposal:
    """Remove flagged layers and widen the survivors to preserve capacity.

    A single width multiplier is applied to channels_out of each widenable
    vertex (consumer channels follow), found by bisection so the parameter
    delta stays within ``tolerance`` of the original count.

    Raises:
        RemovalBreaksGraph: removal disconnects the input from all outputs.
        CannotMeetTolerance: no multiplier lands within tolerance.
        StaleProposal / UnknownChannels: bad widenable ids / unknown widths.
    """
    if not widenable:
        raise ValueError("widenable must be non-empty")
    for vid in widenable:
        if vid not in g.nodes:
            raise StaleProposal(f"widenable vertex {vid!r} absent from graph")

    original_params = count_params(g)
    removed = _removal_set(g, i_res)
    pruned = _contract(g, set(removed))

    if not removed:
        # Identity rewrite: nothing cut, nothing to widen.
        widened: tuple[WidthChange, ...] = ()
        final = pruned
    else:
        pruned = _repair_channels(pruned)
        survivors = [vid for vid in widenable if vid in pruned.nodes]
        if not survivors:
            raise CannotMeetTolerance("every widenable vertex was removed")

        def params_at(factor: float) -> int:
            return count_params(_widen(pruned, survivors, factor, quantum))

        lo, hi = 1.0, 2.0
        for _ in range(32):
            if params_at(hi) >= original_params or hi > 64:
                break
            hi *= 2
        if params_at(hi) < original_params * (1 - tolerance):
            raise CannotMeetTolerance(
                f"widening to x{hi:.0f} still below the parameter budget"
            )
        for _ in range(80):
            mid = (lo + hi) / 2
            if params_at(mid) < original_params:
                lo = mid
            else:
                hi = mid
        best = min((abs(params_at(f) - original_params), f) for f in (lo, hi))[1]
        final = _widen(pruned, survivors, best, quantum)
        widened = tuple(
            WidthChange(vertex=vid, old=g.nodes[vid].channels_out,
                        new=final.nodes[vid].channels_out)
            for vid in survivors
            if final.nodes[vid].channels_out != g.nodes[vid].channels_out
        )

    delta = count_params(final) - original_params
    if abs(delta) > tolerance * original_params:
        raise CannotMeetTolerance(
            f"parameter delta {delta} exceeds {tolerance:.0%} of {original_params}"
        )
    return RefinementProposal(
        variant=PruneAndWiden(removed=removed, widened=widened),
        predicted_imin=compute_imin(final, propagate(final)),
        param_delta=delta,
    )


def apply(g: ArchGraph, proposal: RefinementProposal) -> ArchGraph:
    """Apply a proposal to the graph it was generated from.

    Raises:
        StaleProposal: the proposal references vertices (or old values)
            that no longer match the graph.
    """
    variant = proposal.variant
    if isinstance(variant, StrideReduction):
        return _apply_stride(g, variant.changes)

    for wc in variant.widened:
        node = g.nodes.get(wc.vertex)
        if node is None:
            raise StaleProposal(f"vertex {wc.vertex!r} absent from graph")
        if node.channels_out != wc.old:
            raise StaleProposal(
                f"{wc.vertex}: channels_out is {node.channels_out}, proposal expects {wc.old}"
            )
    rewritten = _contract(g, set(variant.removed))
    if not variant.removed and not variant.widened:
        return rewritten
    table = dict(rewritten.nodes)
    for wc in variant.widened:
        table[wc.vertex] = replace(table[wc.vertex], channels_out=wc.new)
    rewritten = validate(
        table.values(), name=g.name, design_resolution=g.design_resolution
    )
    return _repair_channels(rewritten)
