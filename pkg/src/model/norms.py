from typing import Annotated, List, Literal, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.model.geometry import Matrix, SYMMETRY_TOL, SymmetricBody

PSD_FLOOR = 1e-12
FULL_RANK_FLOOR = 1e-10


class HilbertNorm(BaseModel):
    """Hilbert (semi)norm v ↦ √(vᵀQv)."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["hilbert"] = "hilbert"
    gram: Matrix

    @field_validator("gram")
    @classmethod
    def _check_psd(cls, gram: Matrix) -> Matrix:
        q = np.asarray(gram, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
            raise ValueError("gram must be a non-empty square matrix")
        if np.max(np.abs(q - q.T)) > SYMMETRY_TOL * max(1.0, float(np.max(np.abs(q)))):
            raise ValueError("gram must be symmetric")
        if np.min(np.linalg.eigvalsh(q)) < -PSD_FLOOR:
            raise ValueError("gram must be positive semidefinite")
        return gram

    @property
    def dim(self) -> int:
        return len(self.gram)

    @property
    def full_rank(self) -> bool:
        return bool(np.min(np.linalg.eigvalsh(self.matrix())) > FULL_RANK_FLOOR)

    def matrix(self) -> np.ndarray:
        return np.asarray(self.gram, dtype=float)

    @classmethod
    def from_matrix(cls, q: np.ndarray) -> "HilbertNorm":
        q = np.asarray(q, dtype=float)
        return cls(gram=((q + q.T) / 2.0).tolist())


class BodyGauge(BaseModel):
    """Minkowski functional of a symmetric polytope."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["body"] = "body"
    body: SymmetricBody

    @property
    def dim(self) -> int:
        return self.body.dim


class LpMix(BaseModel):
    """(λ·left^p + (1−λ)·right^p)^{1/p}."""

    model_config = ConfigDict(frozen=True)

    kind: Literal["lp_mix"] = "lp_mix"
    p: float = Field(ge=1)
    weight: float = Field(ge=0, le=1)
    left: "Seminorm"
    right: "Seminorm"

    @model_validator(mode="after")
    def _check_dims(self) -> "LpMix":
        if self.left.dim != self.right.dim:
            raise ValueError("seminorms must act on the same dimension")
        return self

    @property
    def dim(self) -> int:
        return self.left.dim


Seminorm = Annotated[Union[HilbertNorm, BodyGauge, LpMix], Field(discriminator="kind")]
LpMix.model_rebuild()


class HilbertNormSet(BaseModel):
    """ℓ²-hull of finitely many Hilbert norms: {Σ λᵢQᵢ : λ in the simplex}."""

    model_config = ConfigDict(frozen=True)

    generators: List[HilbertNorm] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_generators(self) -> "HilbertNormSet":
        dims = {g.dim for g in self.generators}
        if len(dims) != 1:
            raise ValueError("generators must share one dimension")
        if not all(g.full_rank for g in self.generators):
            raise ValueError("generators must be full-rank Hilbert norms")
        return self

    @property
    def dim(self) -> int:
        return self.generators[0].dim


class MembershipCertificate(BaseModel):
    member: bool
    coefficients: Optional[List[float]] = None
    residual: float
    # separating functional (upper-triangular entries) when not a member
    separator: Optional[List[float]] = None
    margin: Optional[float] = None


class DistortionReport(BaseModel):
    lower_scale: float = Field(gt=0)  # α = max a/b
    upper_scale: float = Field(gt=0)  # β = max b/a
    distortion: float
    exact: bool = True

    @model_validator(mode="after")
    def _check_product(self) -> "DistortionReport":
        if self.distortion < 1 - 1e-9:
            raise ValueError("distortion below 1")
        return self
