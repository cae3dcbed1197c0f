"""Static receptive-field analysis and refinement for CNN architecture graphs."""

from .analysis import (
    AnalysisReport,
    LayerFlag,
    LayerReport,
    classify,
    compute_imax,
    compute_imin,
)
from .dsl import DslError, DslSyntaxError, DuplicateId, UnknownReference, emit_dsl, parse_dsl
from .engine import (
    PathExplosion,
    PathState,
    RFFrontier,
    RFResult,
    brute_force_rf,
    propagate,
)
from .graph import (
    ArchGraph,
    CycleDetected,
    GraphError,
    InvalidNode,
    LayerKind,
    LayerNode,
    MissingPredecessor,
    MultipleInputs,
    UnknownChannels,
    UnreachableVertex,
    count_params,
    effective_kernel,
    topo_order,
    validate,
    with_layer,
)
from .ingest_onnx import (
    Handler,
    IngestError,
    TerminalDisplaced,
    default_handlers,
    load_onnx,
    register_handler,
)
from .refine import (
    CannotMeetTolerance,
    NoFeasibleProposal,
    PruneAndWiden,
    RefinementProposal,
    RemovalBreaksGraph,
    StaleProposal,
    StrideChange,
    StrideReduction,
    WidthChange,
    enumerate_stride_reductions,
    prune_and_widen,
    stride_proposal,
)
from .refine import apply as apply_refinement
from .report import to_dot, to_json, to_text

__version__ = "0.1.0"
