from typing import List, Optional, Tuple, Union

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import linprog

from src.model.geometry import SymmetricBody
from src.model.norms import (
    BodyGauge,
    DistortionReport,
    HilbertNorm,
    HilbertNormSet,
    LpMix,
    MembershipCertificate,
    Seminorm,
)
from src.service.base_service import BaseService
from src.service.geometry_service import GeometryService
from src.utils.errors import DegenerateNormError, DimensionError, InternalError
from src.utils.logger import Logger

logger = Logger.setup()

PROBE_BUDGET = 512


def _upper_entries(q: np.ndarray) -> np.ndarray:
    rows, cols = np.triu_indices(q.shape[0])
    return q[rows, cols]


class SeminormService(BaseService):
    """ℓ^p convex structure on seminorms, ℓ²-hulls of Grams and identity distortion."""

    def __init__(self, geometry: GeometryService, settings=None):
        super().__init__(settings)
        self.geometry = geometry

    def lp_combine(self, p: float, weight: float, left: Seminorm, right: Seminorm) -> Seminorm:
        """
        (λ·left^p + (1−λ)·right^p)^{1/p}; Hilbert norms stay Hilbert at p = 2.

        Args:
            p: exponent ≥ 1
            weight: λ in [0, 1]
            left: first seminorm
            right: second seminorm

        Returns:
            Combined seminorm
        """
        if left.dim != right.dim:
            raise DimensionError(f"cannot combine seminorms of dimension {left.dim} and {right.dim}")
        if weight == 1:
            return left
        if weight == 0:
            return right
        if left == right:
            return left
        if p == 2 and isinstance(left, HilbertNorm) and isinstance(right, HilbertNorm):
            return HilbertNorm.from_matrix(weight * left.matrix() + (1.0 - weight) * right.matrix())
        return LpMix(p=p, weight=weight, left=left, right=right)

    def eval(self, s: Seminorm, v) -> float:
        x = np.asarray(v, dtype=float).reshape(-1)
        if x.shape[0] != s.dim:
            raise DimensionError(f"vector has length {x.shape[0]}, seminorm acts on {s.dim}")
        if isinstance(s, HilbertNorm):
            return float(np.sqrt(max(0.0, x @ s.matrix() @ x)))
        if isinstance(s, BodyGauge):
            return self.geometry.gauge(s.body, x)
        a = self.eval(s.left, x)
        b = self.eval(s.right, x)
        return float((s.weight * a**s.p + (1.0 - s.weight) * b**s.p) ** (1.0 / s.p))

    def l2_hull_membership(
        self, norm: HilbertNorm, hull: HilbertNormSet, tol: float = 1e-9
    ) -> MembershipCertificate:
        """
        Is Q = Σ λᵢQᵢ for some λ in the simplex?

        Solves min ‖Σ λᵢQᵢ − Q‖₁ over the upper-triangular entries. When the optimum
        is positive its dual is a separating functional y with yᵀQ > max yᵀQᵢ.

        Args:
            norm: candidate Gram
            hull: generator set
            tol: entrywise tolerance (relative to the Gram scale)

        Returns:
            MembershipCertificate with coefficients or separator
        """
        if norm.dim != hull.dim:
            raise DimensionError(f"norm has dimension {norm.dim}, hull {hull.dim}")
        generators = np.column_stack([_upper_entries(g.matrix()) for g in hull.generators])
        target = _upper_entries(norm.matrix())
        entries, count = generators.shape

        a_eq = np.zeros((entries + 1, count + 2 * entries))
        a_eq[:entries, :count] = generators
        a_eq[:entries, count : count + entries] = np.eye(entries)
        a_eq[:entries, count + entries :] = -np.eye(entries)
        a_eq[entries, :count] = 1.0
        b_eq = np.append(target, 1.0)
        cost = np.concatenate([np.zeros(count), np.ones(2 * entries)])
        result = linprog(cost, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        if result.status != 0:
            raise InternalError(f"membership LP failed: {result.message}")

        coefficients = result.x[:count]
        residual = float(np.max(np.abs(generators @ coefficients - target)))
        scale = max(1.0, float(np.max(np.abs(generators))), float(np.max(np.abs(target))))
        if residual <= tol * scale:
            return MembershipCertificate(member=True, coefficients=coefficients.tolist(), residual=residual)

        separator = np.asarray(result.eqlin.marginals[:entries])
        margin = float(separator @ target - np.max(separator @ generators))
        return MembershipCertificate(
            member=False,
            coefficients=coefficients.tolist(),
            residual=residual,
            separator=separator.tolist(),
            margin=margin,
        )

    # ------------------------------------------------------------- distortion

    @staticmethod
    def _require_nondegenerate(s: Seminorm, role: str):
        if isinstance(s, HilbertNorm) and not s.full_rank:
            raise DegenerateNormError(f"{role} Hilbert norm is not full rank")

    def _pair_scales(self, a: Seminorm, b: Seminorm) -> Optional[Tuple[float, float]]:
        """Exact (max a/b, max b/a) for Hilbert/body pairs, None otherwise."""
        if isinstance(a, HilbertNorm) and isinstance(b, HilbertNorm):
            eigenvalues = eigh(a.matrix(), b.matrix(), eigvals_only=True)
            return float(np.sqrt(eigenvalues[-1])), float(1.0 / np.sqrt(eigenvalues[0]))
        if isinstance(a, BodyGauge) and isinstance(b, BodyGauge):
            up = np.max(self.geometry.facets(a.body) @ self.geometry.vertices(b.body).T)
            down = np.max(self.geometry.facets(b.body) @ self.geometry.vertices(a.body).T)
            return float(up), float(down)
        if isinstance(a, BodyGauge) and isinstance(b, HilbertNorm):
            return self._body_hilbert(a.body, b)
        if isinstance(a, HilbertNorm) and isinstance(b, BodyGauge):
            up, down = self._body_hilbert(b.body, a)
            return down, up
        return None

    def _body_hilbert(self, body: SymmetricBody, norm: HilbertNorm) -> Tuple[float, float]:
        q = norm.matrix()
        facets = self.geometry.facets(body)
        vertices = self.geometry.vertices(body)
        # max gauge over the Hilbert unit ball, max Hilbert norm over the body
        up = np.sqrt(np.max(np.einsum("ij,jk,ik->i", facets, np.linalg.inv(q), facets)))
        down = np.sqrt(np.max(np.einsum("ij,jk,ik->i", vertices, q, vertices)))
        return float(up), float(down)

    def _probe_directions(self, dim: int, probe: Union[SymmetricBody, int, None]) -> np.ndarray:
        if isinstance(probe, SymmetricBody):
            if probe.dim != dim:
                raise DimensionError(f"probe body has dimension {probe.dim}, expected {dim}")
            return np.vstack([self.geometry.vertices(probe), np.eye(dim)])
        budget = probe if isinstance(probe, int) else PROBE_BUDGET
        rng = np.random.default_rng(self.settings.seed)
        return np.vstack([np.eye(dim), rng.standard_normal((budget, dim))])

    def distortion(
        self, a: Seminorm, b: Seminorm, probe: Union[SymmetricBody, int, None] = None
    ) -> DistortionReport:
        """
        α = max a/b, β = max b/a and the identity distortion α·β.

        Exact for any pair of Hilbert norms and polytope gauges; sampled on probe
        directions when an ℓ^p mixture is involved.
        """
        if a.dim != b.dim:
            raise DimensionError(f"seminorms act on dimensions {a.dim} and {b.dim}")
        self._require_nondegenerate(a, "first")
        self._require_nondegenerate(b, "second")

        scales = self._pair_scales(a, b)
        exact = scales is not None
        if scales is None:
            directions = self._probe_directions(a.dim, probe)
            values_a = np.array([self.eval(a, v) for v in directions])
            values_b = np.array([self.eval(b, v) for v in directions])
            if np.any(values_a <= 0) or np.any(values_b <= 0):
                raise DegenerateNormError("seminorm vanishes on a non-zero probe direction")
            scales = float(np.max(values_a / values_b)), float(np.max(values_b / values_a))

        lower, upper = scales
        return DistortionReport(
            lower_scale=lower,
            upper_scale=upper,
            distortion=max(1.0, lower * upper),
            exact=exact,
        )

    def hull_pairs(self, hull: HilbertNormSet, weights: List[float]) -> List[HilbertNorm]:
        """p = 2 combinations of every generator pair at the given weights."""
        combined = []
        for i, left in enumerate(hull.generators):
            for right in hull.generators[i:]:
                for weight in weights:
                    combined.append(self.lp_combine(2, weight, left, right))
        return combined
