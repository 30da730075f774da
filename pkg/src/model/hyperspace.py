from typing import Dict, List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.model.geometry import Vector

TRIANGLE_TOL = 1e-12


def subset_key(members: List[str]) -> str:
    return "{" + ",".join(sorted(members)) + "}"


class FiniteMetricSpace(BaseModel):
    model_config = ConfigDict(frozen=True)

    points: List[str] = Field(min_length=1)
    dist: List[List[float]]

    @model_validator(mode="after")
    def _check_metric(self) -> "FiniteMetricSpace":
        d = np.asarray(self.dist, dtype=float)
        size = len(self.points)
        if len(set(self.points)) != size:
            raise ValueError("point ids must be unique")
        if d.shape != (size, size):
            raise ValueError("dist must be a square matrix matching the points")
        if np.any(np.abs(np.diag(d)) > 0) or np.any(d < 0):
            raise ValueError("dist must vanish on the diagonal and be non-negative")
        if np.max(np.abs(d - d.T)) > 0:
            raise ValueError("dist must be symmetric")
        off = d + np.eye(size)
        if np.any(off <= 0):
            raise ValueError("distinct points must be at positive distance")
        # d(i,k) ≤ d(i,j) + d(j,k) for all triples
        if np.any(d[:, None, :] > d[:, :, None] + d[None, :, :] + TRIANGLE_TOL):
            raise ValueError("dist violates the triangle inequality")
        return self

    def index(self) -> Dict[str, int]:
        return {p: i for i, p in enumerate(self.points)}

    def distance(self, a: str, b: str) -> float:
        idx = self.index()
        return float(self.dist[idx[a]][idx[b]])


class SubsetPoint(BaseModel):
    model_config = ConfigDict(frozen=True)

    members: List[str] = Field(min_length=1)

    @field_validator("members")
    @classmethod
    def _canonical(cls, members: List[str]) -> List[str]:
        if len(set(members)) != len(members):
            raise ValueError("members must be distinct")
        return sorted(members)

    @property
    def key(self) -> str:
        return subset_key(self.members)


class Hyperspace(BaseModel):
    base: FiniteMetricSpace
    n: int
    subsets: List[SubsetPoint]
    space: FiniteMetricSpace


class Incidence(BaseModel):
    """Z⊆_[n] with its second projection π_Z (point key ↦ subset key)."""

    n: int
    space: FiniteMetricSpace
    pairs: Dict[str, List[str]]  # point key ↦ [z, subset key]
    projection: Dict[str, str]
    fiber_sizes: Dict[str, int]


class AnchoredCover(BaseModel):
    total: FiniteMetricSpace
    base: FiniteMetricSpace
    proj: Dict[str, str]
    anchor: Dict[str, str]

    @model_validator(mode="after")
    def _check_maps(self) -> "AnchoredCover":
        if set(self.proj) != set(self.total.points) or set(self.anchor) != set(self.total.points):
            raise ValueError("proj and anchor must be defined on every point of the total space")
        if set(self.proj.values()) != set(self.base.points):
            raise ValueError("proj must be surjective onto the base")
        return self

    def fiber(self, x: str) -> List[str]:
        return sorted(y for y, image in self.proj.items() if image == x)


class RoundtripReport(BaseModel):
    x_size: int
    z_size: int
    n: int
    map_count: int
    cover_class_count: int
    maps_roundtrip: bool
    covers_roundtrip: bool
    passed: bool


class SelectionValue(BaseModel):
    point: Vector
    coeffs: Dict[str, float]


class ConvexSelection(BaseModel):
    """φ on a family of finite subsets of a point set in R^d, with coefficient certificates."""

    ambient_dim: int = Field(ge=1)
    n: int = Field(ge=1)
    points: Dict[str, Vector]
    phi: Dict[str, SelectionValue]

    @model_validator(mode="after")
    def _check_certificates(self) -> "ConvexSelection":
        for key, value in self.phi.items():
            members = sorted(value.coeffs)
            if subset_key(members) != key or len(members) > self.n:
                raise ValueError(f"coefficients of {key} must be indexed by its members")
            c = np.asarray([value.coeffs[m] for m in members])
            if np.any(c < 0) or abs(float(c.sum()) - 1.0) > 1e-12:
                raise ValueError(f"coefficients of {key} must lie in the simplex")
            points = np.asarray([self.points[m] for m in members], dtype=float)
            recon = c @ points
            scale = max(1.0, float(np.max(np.abs(points))))
            if np.max(np.abs(recon - np.asarray(value.point))) > 1e-12 * scale:
                raise ValueError(f"point of {key} is not the certified convex combination")
        return self


class SliceResult(BaseModel):
    f_x: float
    phi_x: Vector
    coeffs: Dict[str, float]
    residual: float


class SelectionNet(BaseModel):
    x0: str
    terms: List[List[str]] = Field(min_length=1)
    designated: Optional[str] = None


class NetCheck(BaseModel):
    x0: str
    radii: List[float]
    gaps: List[float]
    bounded: bool
    tail_gap: float
    f_values: Optional[List[float]] = None
    f_limit: Optional[float] = None
    f_converged: Optional[bool] = None
    passed: bool


class ContinuityReport(BaseModel):
    tol: float
    nets: List[NetCheck]
    passed: bool
