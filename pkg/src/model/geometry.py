from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy.spatial import ConvexHull, QhullError

# Coordinates of a point or direction in the ambient (or fiber) space.
Vector = List[float]
Matrix = List[List[float]]

SYMMETRY_TOL = 1e-12
MERGE_TOL = 1e-9
MAX_DIM = 8


def redundant_rows(points: np.ndarray) -> List[int]:
    """
    Indices of points that are not vertices of their convex hull (repeats included).

    A point is a vertex iff the facet normals of the hull it lies on span the space.
    """
    n, dim = points.shape
    scale = max(1.0, float(np.max(np.abs(points))))
    _, first = np.unique(np.round(points / scale, 9), axis=0, return_index=True)
    repeats = sorted(set(range(n)) - set(first.tolist()))
    if dim == 1:
        radius = float(np.max(np.abs(points)))
        inner = [i for i in range(n) if abs(points[i, 0]) < radius - MERGE_TOL * scale]
        return sorted(set(repeats) | set(inner))
    try:
        hull = ConvexHull(points)
    except QhullError as e:
        raise ValueError(f"hull computation failed: {e}")
    normals = hull.equations[:, :-1] / (-hull.equations[:, -1:])
    touching = np.abs(points @ normals.T - 1.0) <= MERGE_TOL
    redundant = set(repeats)
    for i in range(n):
        rows = normals[touching[i]]
        if len(rows) < dim or np.linalg.matrix_rank(rows) < dim:
            redundant.add(i)
    return sorted(redundant)


class SymmetricBody(BaseModel):
    """Origin-symmetric convex polytope given by its vertices; the unit ball of a norm."""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(ge=1, le=MAX_DIM)
    vertices: Matrix

    @model_validator(mode="after")
    def _check_invariants(self) -> "SymmetricBody":
        points = np.asarray(self.vertices, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise ValueError(f"vertices must have {self.dim} coordinates each")
        if not np.all(np.isfinite(points)):
            raise ValueError("vertex coordinates must be finite")
        for v in points:
            if np.min(np.max(np.abs(points + v), axis=1)) > MERGE_TOL:
                raise ValueError(f"vertex set is not closed under negation: missing -{v.tolist()}")
        if np.linalg.matrix_rank(points, tol=MERGE_TOL) < self.dim:
            raise ValueError("vertices do not span the space")
        redundant = redundant_rows(points)
        if redundant:
            raise ValueError(f"vertices are not irredundant: {points[redundant].tolist()} are not extreme points")
        return self


class Subspace(BaseModel):
    """Linear subspace given by basis vectors; an empty basis is the zero subspace."""

    model_config = ConfigDict(frozen=True)

    ambient_dim: int = Field(ge=1)
    basis: Matrix = Field(default_factory=list)

    @model_validator(mode="after")
    def _check_basis(self) -> "Subspace":
        if not self.basis:
            return self
        columns = np.asarray(self.basis, dtype=float)
        if columns.ndim != 2 or columns.shape[1] != self.ambient_dim:
            raise ValueError(f"basis vectors must have length {self.ambient_dim}")
        if len(self.basis) > self.ambient_dim or np.linalg.matrix_rank(columns, tol=1e-10) < len(self.basis):
            raise ValueError("basis vectors are linearly dependent")
        return self

    @property
    def rank(self) -> int:
        return len(self.basis)

    @property
    def is_empty(self) -> bool:
        return not self.basis

    def matrix(self) -> np.ndarray:
        """Basis as columns, shape (ambient_dim, rank)."""
        if self.is_empty:
            return np.zeros((self.ambient_dim, 0))
        return np.asarray(self.basis, dtype=float).T


class Ellipsoid(BaseModel):
    """Origin-centred ellipsoid {v : vᵀ Q v ≤ 1}."""

    model_config = ConfigDict(frozen=True)

    gram: Matrix

    @field_validator("gram")
    @classmethod
    def _check_gram(cls, gram: Matrix) -> Matrix:
        q = np.asarray(gram, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
            raise ValueError("gram must be a non-empty square matrix")
        if not np.all(np.isfinite(q)):
            raise ValueError("gram entries must be finite")
        if np.max(np.abs(q - q.T)) > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(q)))):
            raise ValueError("gram must be symmetric")
        if np.min(np.linalg.eigvalsh(q)) <= 0:
            raise ValueError("gram must be positive definite")
        return gram

    @property
    def dim(self) -> int:
        return len(self.gram)

    def matrix(self) -> np.ndarray:
        return np.asarray(self.gram, dtype=float)

    @classmethod
    def from_matrix(cls, q: np.ndarray) -> "Ellipsoid":
        q = np.asarray(q, dtype=float)
        return cls(gram=((q + q.T) / 2.0).tolist())


class ContainmentResult(BaseModel):
    contained: bool
    max_ratio: float  # largest vᵀQv over the inner body (1 means touching)
    witness: Optional[Vector] = None


class EllipseMetrics(BaseModel):
    semi_axes: List[float]
    eccentricity: Optional[float] = None


class MveeConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    epsilon: float = Field(default=1e-6, gt=0, le=0.1)
    max_iter: Optional[int] = Field(default=None, gt=0)
    oracle_tol: float = Field(default=1e-8, gt=0)
    max_rounds: int = Field(default=100, gt=0)

    @model_validator(mode="after")
    def _check_tolerances(self) -> "MveeConfig":
        if self.oracle_tol > self.epsilon:
            raise ValueError("oracle_tol must not exceed epsilon")
        return self

    def iteration_limit(self, dim: int) -> int:
        return self.max_iter if self.max_iter is not None else 100 * dim * dim


class MveeSolution(BaseModel):
    ellipsoid: Ellipsoid
    iterations: int
    achieved_gap: float
    weights: List[float] = Field(default_factory=list)


class LoewnerCertificate(BaseModel):
    ellipsoid: Ellipsoid
    distortion: float
    john_bound: float
    lower_scale: float  # inf{t : ell ⊆ t·body}
    upper_scale: float  # inf{t : body ⊆ t·ell}
    iterations: int = 0
    achieved_gap: float = 0.0
    within_john_bound: bool = True


class HullGenerator(BaseModel):
    """A body or ellipsoid living in `frame` (a subspace of the ambient space).

    `frame=None` means the shape is already full-dimensional in the ambient space.
    """

    model_config = ConfigDict(frozen=True)

    shape: Union[Ellipsoid, SymmetricBody]
    frame: Optional[Subspace] = None

    @model_validator(mode="after")
    def _check_frame(self) -> "HullGenerator":
        if self.frame is not None:
            shape_dim = self.shape.dim
            if self.frame.rank != shape_dim:
                raise ValueError(f"frame rank {self.frame.rank} does not match shape dimension {shape_dim}")
        return self

    @property
    def ambient_dim(self) -> int:
        return self.frame.ambient_dim if self.frame is not None else self.shape.dim
