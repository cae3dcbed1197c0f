"""Receptive-field propagation over all paths of the DAG.

Every input-to-layer path accumulates a receptive field r and a growth
factor g (the running product of strides). A layer with effective kernel k
maps a path state (r, g) to (r + (k-1)*g, g*s) per axis. Because a path
with a larger r but smaller g can still win further downstream, each vertex
keeps a Pareto frontier of path states instead of a scalar — one pruned for
the minimum, one for the maximum. The frontiers are an exact compression of
the full path set, which ``brute_force_rf`` enumerates directly as the test
oracle.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping

from .graph import ArchGraph, LayerKind, LayerNode, effective_kernel

Scalar = int | Fraction
ScalarPair = tuple[Scalar, Scalar]
FracPair = tuple[Fraction, Fraction]


class PathExplosion(Exception):
    """Raised when brute-force enumeration would exceed the path cap."""


@dataclass(frozen=True, order=True)
class PathState:
    """Receptive field and growth factor accumulated along one path prefix."""

    r: ScalarPair
    g: FracPair


@dataclass(frozen=True)
class RFFrontier:
    """Pareto set of path states at one vertex (states sorted, deduplicated)."""

    states: tuple[PathState, ...]


@dataclass(frozen=True)
class VertexField:
    r_min: ScalarPair
    r_max: ScalarPair
    g_min: FracPair
    g_max: FracPair


@dataclass(frozen=True)
class RFResult:
    """Per-vertex receptive-field bounds after propagation."""

    per_vertex: Mapping[str, VertexField]

    def __getitem__(self, vertex: str) -> VertexField:
        return self.per_vertex[vertex]

    def __contains__(self, vertex: str) -> bool:
        return vertex in self.per_vertex


_ONE = Fraction(1)
_INPUT_STATE = PathState(r=(1, 1), g=(_ONE, _ONE))


def _as_scalar(x: Fraction) -> Scalar:
    return int(x) if x.denominator == 1 else x


def _step(state: PathState, node: LayerNode) -> PathState:
    """Apply one layer's kernel and stride to a path state, per axis."""
    keff = effective_kernel(node.kernel, node.dilation)
    r = tuple(_as_scalar(Fraction(state.r[a]) + (keff[a] - 1) * state.g[a]) for a in (0, 1))
    if node.upsample:
        g = tuple(state.g[a] / node.stride[a] for a in (0, 1))
    else:
        g = tuple(state.g[a] * node.stride[a] for a in (0, 1))
    return PathState(r=r, g=g)  # type: ignore[arg-type]


def _dominates_min(a: PathState, b: PathState) -> bool:
    return (a.r[0] <= b.r[0] and a.r[1] <= b.r[1]
            and a.g[0] <= b.g[0] and a.g[1] <= b.g[1])


def _dominates_max(a: PathState, b: PathState) -> bool:
    return (a.r[0] >= b.r[0] and a.r[1] >= b.r[1]
            and a.g[0] >= b.g[0] and a.g[1] >= b.g[1])


def _prune(states: set[PathState], dominates) -> tuple[PathState, ...]:
    kept = [
        s for s in states
        if not any(o != s and dominates(o, s) for o in states)
    ]
    return tuple(sorted(kept))


def propagate(g: ArchGraph) -> RFResult:
    """Exact per-vertex receptive-field bounds over all input-to-vertex paths.

    Merge vertices union their predecessors' frontiers before pruning, so
    both the smallest-RF and the largest-RF path survive at every join.
    """
    min_front: dict[str, tuple[PathState, ...]] = {}
    max_front: dict[str, tuple[PathState, ...]] = {}
    fields: dict[str, VertexField] = {}

    for vid in g.order:
        node = g.nodes[vid]
        if node.kind is LayerKind.INPUT:
            min_front[vid] = max_front[vid] = (_INPUT_STATE,)
        else:
            lo = {_step(s, node) for p in node.predecessors for s in min_front[p]}
            hi = {_step(s, node) for p in node.predecessors for s in max_front[p]}
            min_front[vid] = _prune(lo, _dominates_min)
            max_front[vid] = _prune(hi, _dominates_max)

        fields[vid] = VertexField(
            r_min=tuple(min(s.r[a] for s in min_front[vid]) for a in (0, 1)),
            r_max=tuple(max(s.r[a] for s in max_front[vid]) for a in (0, 1)),
            g_min=tuple(min(s.g[a] for s in min_front[vid]) for a in (0, 1)),
            g_max=tuple(max(s.g[a] for s in max_front[vid]) for a in (0, 1)),
        )
    return RFResult(per_vertex=fields)


def frontiers(g: ArchGraph) -> dict[str, RFFrontier]:
    """Min-variant Pareto frontiers per vertex (exposed for invariant tests)."""
    min_front: dict[str, tuple[PathState, ...]] = {}
    for vid in g.order:
        node = g.nodes[vid]
        if node.kind is LayerKind.INPUT:
            min_front[vid] = (_INPUT_STATE,)
        else:
            lo = {_step(s, node) for p in node.predecessors for s in min_front[p]}
            min_front[vid] = _prune(lo, _dominates_min)
    return {v: RFFrontier(states=f) for v, f in min_front.items()}


def brute_force_rf(
    g: ArchGraph, vertex: str, *, cap: int = 10**6
) -> tuple[ScalarPair, ScalarPair]:
    """Enumerate every input-to-vertex path and return exact (r_min, r_max).

    Test oracle only: independent of the frontier propagation above.

    Raises:
        PathExplosion: more than ``cap`` paths lead to ``vertex``.
    """
    if vertex not in g.nodes:
        raise KeyError(vertex)

    counts: dict[str, int] = {}
    for vid in g.order:
        node = g.nodes[vid]
        if node.kind is LayerKind.INPUT:
            counts[vid] = 1
        else:
            counts[vid] = sum(counts[p] for p in node.predecessors)
        if counts[vid] > cap:
            raise PathExplosion(f"more than {cap} paths reach {vid}")

    paths: list[list[str]] = []

    def walk(v: str, suffix: list[str]) -> None:
        node = g.nodes[v]
        if node.kind is LayerKind.INPUT:
            paths.append([v] + suffix)
            return
        for p in node.predecessors:
            walk(p, [v] + suffix)

    walk(vertex, [])

    best_lo = [None, None]
    best_hi = [None, None]
    for path in paths:
        state = _INPUT_STATE
        for vid in path[1:]:
            state = _step(state, g.nodes[vid])
        for a in (0, 1):
            if best_lo[a] is None or state.r[a] < best_lo[a]:
                best_lo[a] = state.r[a]
            if best_hi[a] is None or state.r[a] > best_hi[a]:
                best_hi[a] = state.r[a]
    return (best_lo[0], best_lo[1]), (best_hi[0], best_hi[1])
