from typing import Dict, List, Optional

from pydantic import BaseModel, Field

from src.model.bundle import Stratification
from src.model.geometry import Matrix
from src.model.norms import HilbertNorm, HilbertNormSet, MembershipCertificate


class VertexRenorming(BaseModel):
    depth: int
    dim: int
    norms: HilbertNormSet
    distortions: List[float]
    slice_constant: float = 1.0


class Renorming(BaseModel):
    """Multi-valued Hilbert renorming x ↦ K(x), Grams in fiber coordinates."""

    per_vertex: Dict[str, VertexRenorming]
    distortion_sup: float
    distortion_bound: float
    strata: Stratification

    def K(self, vertex: str) -> HilbertNormSet:
        return self.per_vertex[vertex].norms


class Net(BaseModel):
    limit: str
    approach: List[str] = Field(min_length=1)


class NetRecord(BaseModel):
    limit: str
    approach: List[str]
    target: Matrix
    witnesses: List[Optional[Matrix]]
    gaps: List[Optional[float]]
    witness_in_K: List[bool]
    monotone: bool
    passed: bool
    diagnostics: List[str] = Field(default_factory=list)


class LscReport(BaseModel):
    tol: float
    records: List[NetRecord]
    passed: bool


class EdgeGap(BaseModel):
    a: str
    b: str
    common_rank: int
    common_gap: float
    complement_gap: float


class Selection(BaseModel):
    root: str
    choice: Dict[str, HilbertNorm]
    certificates: Dict[str, MembershipCertificate]
    edges: List[EdgeGap]
    modulus: float
    complement_modulus: float


CERTIFICATE_VERSION = "1"


class VertexCertificate(BaseModel):
    generators: List[Matrix]
    depth: int
    dim: int
    distortions: List[float]
    slice_constant: float


class SelectionCertificate(BaseModel):
    root: str
    grams: Dict[str, Matrix]
    modulus: float
    complement_modulus: float


class RenormingCertificate(BaseModel):
    """Serialized renorm-build result: K(x) generators, strata, LSC witnesses and the selection."""

    version: str = CERTIFICATE_VERSION
    per_vertex: Dict[str, VertexCertificate]
    distortion_sup: float
    distortion_bound: float
    strata: List[List[str]]
    lsc_report: Optional[LscReport] = None
    selection: Optional[SelectionCertificate] = None
