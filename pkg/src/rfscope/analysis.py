"""Layer classification against an input resolution, and I_min / I_max.

A layer whose own minimum receptive field already reaches the image border
is underutilized; if even its *input* does, the layer can extract nothing
new and is unproductive. I_min is the smallest input resolution at which no
layer is flagged.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .engine import RFResult, ScalarPair
from .graph import ArchGraph, LayerKind, Pair

#: Vertices excluded from I_min/I_max maxima and never flagged.
_NON_LAYERS = frozenset({LayerKind.INPUT, LayerKind.OUTPUT})


class LayerFlag(Enum):
    PRODUCTIVE = "productive"
    UNDERUTILIZED = "underutilized"
    UNPRODUCTIVE = "unproductive"


@dataclass(frozen=True)
class LayerReport:
    id: str
    name: str
    kind: LayerKind
    kernel: Pair
    stride: Pair
    r_min: ScalarPair
    r_max: ScalarPair
    flag: LayerFlag


@dataclass(frozen=True)
class AnalysisReport:
    input_resolution: Pair
    i_min: ScalarPair
    i_max: ScalarPair
    fully_utilized: bool
    layers: tuple[LayerReport, ...]

    def flagged(self) -> tuple[LayerReport, ...]:
        return tuple(l for l in self.layers if l.flag is not LayerFlag.PRODUCTIVE)


def _layer_ids(g: ArchGraph) -> list[str]:
    return [v for v in g.order if g.nodes[v].kind not in _NON_LAYERS]


def compute_imin(g: ArchGraph, rf: RFResult) -> ScalarPair:
    """Minimal feasible input resolution: componentwise max of r_min over layers."""
    layers = _layer_ids(g)
    if not layers:
        return (1, 1)
    return tuple(max(rf[v].r_min[a] for v in layers) for a in (0, 1))


def compute_imax(g: ArchGraph, rf: RFResult) -> ScalarPair:
    """Componentwise max of r_max over layers: the largest extractable feature."""
    layers = _layer_ids(g)
    if not layers:
        return (1, 1)
    return tuple(max(rf[v].r_max[a] for v in layers) for a in (0, 1))


def _at_limit(value: ScalarPair, i_res: Pair) -> bool:
    # Componentwise on both axes: a layer that can still grow along one
    # axis is not fully wasted.
    return value[0] >= i_res[0] and value[1] >= i_res[1]


def classify(g: ArchGraph, rf: RFResult, i_res: Pair) -> AnalysisReport:
    """Flag every layer against an input resolution.

    Unproductive: the layer's best-case input already has r_min >= i_res
    (its input saturates the image, nothing new can be extracted).
    Underutilized: the layer's own r_min >= i_res (its expansion spills
    past the border). Input/Output vertices are always productive.
    """
    if i_res[0] < 1 or i_res[1] < 1:
        raise ValueError(f"input resolution must be >= 1, got {i_res}")

    layers = []
    for vid in g.order:
        node = g.nodes[vid]
        if node.kind in _NON_LAYERS:
            flag = LayerFlag.PRODUCTIVE
        else:
            pred_rmin = tuple(
                min(rf[p].r_min[a] for p in node.predecessors) for a in (0, 1)
            )
            if _at_limit(pred_rmin, i_res):
                flag = LayerFlag.UNPRODUCTIVE
            elif _at_limit(rf[vid].r_min, i_res):
                flag = LayerFlag.UNDERUTILIZED
            else:
                flag = LayerFlag.PRODUCTIVE
        layers.append(LayerReport(
            id=vid,
            name=node.label,
            kind=node.kind,
            kernel=node.kernel,
            stride=node.stride,
            r_min=rf[vid].r_min,
            r_max=rf[vid].r_max,
            flag=flag,
        ))

    report = AnalysisReport(
        input_resolution=tuple(i_res),
        i_min=compute_imin(g, rf),
        i_max=compute_imax(g, rf),
        fully_utilized=all(l.flag is LayerFlag.PRODUCTIVE for l in layers),
        layers=tuple(layers),
    )
    return report
