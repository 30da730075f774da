from .geometry import (
    Vector,
    SymmetricBody,
    Subspace,
    Ellipsoid,
    ContainmentResult,
    EllipseMetrics,
    MveeConfig,
    MveeSolution,
    LoewnerCertificate,
    HullGenerator,
)
from .norms import (
    HilbertNorm,
    BodyGauge,
    LpMix,
    Seminorm,
    HilbertNormSet,
    MembershipCertificate,
    DistortionReport,
)
from .bundle import (
    Edge,
    BaseGraph,
    Section,
    Bundle,
    Stratification,
    Slice,
    BundleDiagnostics,
    NormProfile,
)
from .renorming import (
    VertexRenorming,
    Renorming,
    Net,
    NetRecord,
    LscReport,
    EdgeGap,
    Selection,
)
from .hyperspace import (
    FiniteMetricSpace,
    SubsetPoint,
    Hyperspace,
    Incidence,
    AnchoredCover,
    RoundtripReport,
    SelectionValue,
    ConvexSelection,
    SliceResult,
    SelectionNet,
    NetCheck,
    ContinuityReport,
    subset_key,
)
from .report import CommandName, Command, Timings, Report

__all__ = [
    "Vector",
    "SymmetricBody",
    "Subspace",
    "Ellipsoid",
    "ContainmentResult",
    "EllipseMetrics",
    "MveeConfig",
    "MveeSolution",
    "LoewnerCertificate",
    "HullGenerator",
    "HilbertNorm",
    "BodyGauge",
    "LpMix",
    "Seminorm",
    "HilbertNormSet",
    "MembershipCertificate",
    "DistortionReport",
    "Edge",
    "BaseGraph",
    "Section",
    "Bundle",
    "Stratification",
    "Slice",
    "BundleDiagnostics",
    "NormProfile",
    "VertexRenorming",
    "Renorming",
    "Net",
    "NetRecord",
    "LscReport",
    "EdgeGap",
    "Selection",
    "FiniteMetricSpace",
    "SubsetPoint",
    "Hyperspace",
    "Incidence",
    "AnchoredCover",
    "RoundtripReport",
    "SelectionValue",
    "ConvexSelection",
    "SliceResult",
    "SelectionNet",
    "NetCheck",
    "ContinuityReport",
    "subset_key",
    "CommandName",
    "Command",
    "Timings",
    "Report",
]
