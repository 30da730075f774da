from functools import lru_cache
from typing import Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.linalg import cholesky, eigh, null_space, solve_triangular, subspace_angles
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection, QhullError

from src.model.geometry import (
    MAX_DIM,
    MERGE_TOL,
    ContainmentResult,
    EllipseMetrics,
    Ellipsoid,
    Subspace,
    SymmetricBody,
    redundant_rows,
)
from src.service.base_service import BaseService
from src.utils.errors import (
    DegenerateBodyError,
    DegenerateEllipsoidError,
    DimensionError,
    InternalError,
)
from src.utils.logger import Logger

logger = Logger.setup()

EIGEN_FLOOR = 1e-12
SPAN_TOL = 1e-10


def _dedupe_rows(rows: np.ndarray, decimals: int = 9) -> np.ndarray:
    """Drop rows equal to an earlier row after rounding; keeps first occurrences in order."""
    if len(rows) == 0:
        return rows
    _, first = np.unique(np.round(rows, decimals), axis=0, return_index=True)
    return rows[np.sort(first)]


def _canonical_order(rows: np.ndarray) -> np.ndarray:
    order = np.lexsort(rows.T[::-1])
    return rows[order]


@lru_cache(maxsize=4096)
def _facet_rows(key: Tuple[Tuple[float, ...], ...]) -> np.ndarray:
    """Rows a with body = {x : a·x ≤ 1}."""
    points = np.asarray(key, dtype=float)
    if points.shape[1] == 1:
        radius = float(np.max(np.abs(points)))
        rows = np.array([[1.0 / radius], [-1.0 / radius]])
    else:
        hull = ConvexHull(points)
        # equations: n·x + c ≤ 0 with c < 0 because the origin is interior
        rows = hull.equations[:, :-1] / (-hull.equations[:, -1:])
        rows = _dedupe_rows(rows)
    rows.setflags(write=False)
    return rows


class GeometryService(BaseService):
    """Primitives for origin-symmetric polytopes, subspaces and centred ellipsoids."""

    # ------------------------------------------------------------------ helpers

    @staticmethod
    def _vector(v: Sequence[float], dim: int, what: str = "vector") -> np.ndarray:
        arr = np.asarray(v, dtype=float).reshape(-1)
        if arr.shape[0] != dim:
            raise DimensionError(f"{what} has length {arr.shape[0]}, expected {dim}")
        return arr

    @staticmethod
    def _checked_gram(ell: Ellipsoid, what: str = "ellipsoid") -> np.ndarray:
        q = ell.matrix()
        if np.min(np.linalg.eigvalsh(q)) <= EIGEN_FLOOR:
            raise DegenerateEllipsoidError(f"{what} Gram is singular below the eigenvalue floor {EIGEN_FLOOR}")
        return q

    @staticmethod
    def vertices(body: SymmetricBody) -> np.ndarray:
        return np.asarray(body.vertices, dtype=float)

    def facets(self, body: SymmetricBody) -> np.ndarray:
        """Facet normals scaled so that the body is {x : A x ≤ 1} (computed once per body)."""
        key = tuple(tuple(row) for row in body.vertices)
        try:
            return _facet_rows(key)
        except QhullError as e:
            raise DegenerateBodyError(f"facet enumeration failed: {e}")

    # --------------------------------------------------------------- operations

    def gauge(self, body: SymmetricBody, v: Sequence[float]) -> float:
        """Minkowski functional, as the LP  min Σμ  s.t.  Σ μᵢ vᵢ = v, μ ≥ 0."""
        x = self._vector(v, body.dim)
        if not np.any(x):
            return 0.0
        return self.point_gauge(self.vertices(body), x)

    def point_gauge(self, points: np.ndarray, v: np.ndarray) -> float:
        """Gauge of v with respect to the convex hull of a symmetric point set."""
        x = np.asarray(v, dtype=float)
        if not np.any(x):
            return 0.0
        points = np.asarray(points, dtype=float)
        result = linprog(
            c=np.ones(points.shape[0]),
            A_eq=points.T,
            b_eq=x,
            bounds=(0, None),
            method="highs",
        )
        if result.status == 2:
            return float("inf")
        if result.status != 0:
            raise InternalError(f"gauge LP failed: {result.message}")
        return float(result.fun)

    def facet_gauge(self, body: SymmetricBody, v: Sequence[float]) -> float:
        x = self._vector(v, body.dim)
        return max(0.0, float(np.max(self.facets(body) @ x)))

    def support(self, body: SymmetricBody, u: Sequence[float]) -> float:
        x = self._vector(u, body.dim)
        return max(0.0, float(np.max(self.vertices(body) @ x)))

    def ellipsoid_support(self, ell: Ellipsoid, u: Sequence[float]) -> float:
        q = self._checked_gram(ell)
        x = self._vector(u, ell.dim)
        if not np.any(x):
            return 0.0
        return float(np.sqrt(max(0.0, x @ np.linalg.solve(q, x))))

    def restrict(self, ell: Ellipsoid, frame: Subspace) -> Ellipsoid:
        """ell ∩ span(frame) in frame coordinates."""
        if frame.ambient_dim != ell.dim:
            raise DimensionError(f"frame lives in dimension {frame.ambient_dim}, ellipsoid in {ell.dim}")
        b = frame.matrix()
        return Ellipsoid.from_matrix(b.T @ ell.matrix() @ b)

    def contains(
        self,
        outer: Ellipsoid,
        inner: Union[SymmetricBody, Ellipsoid],
        tol: float = 1e-9,
        frame: Optional[Subspace] = None,
    ) -> ContainmentResult:
        """Is `inner` (optionally living in `frame`) inside `outer`? Returns a witness when not."""
        q = self._checked_gram(outer, "outer")
        b = None
        if frame is not None:
            b = frame.matrix()
            q = self.restrict(outer, frame).matrix()
        if inner.dim != q.shape[0]:
            raise DimensionError(f"inner has dimension {inner.dim}, expected {q.shape[0]}")

        if isinstance(inner, SymmetricBody):
            points = self.vertices(inner)
            values = np.einsum("ij,jk,ik->i", points, q, points)
            k = int(np.argmax(values))
            ratio = float(values[k])
            point = points[k]
        else:
            p = self._checked_gram(inner, "inner")
            eigenvalues, vectors = eigh(q, p)
            ratio = float(eigenvalues[-1])
            point = vectors[:, -1]  # normalised so that pointᵀ P point = 1
            pivot = int(np.argmax(np.abs(point)))
            if point[pivot] < 0:
                point = -point

        contained = ratio <= 1.0 + tol
        witness = None
        if not contained:
            witness = (b @ point if b is not None else point).tolist()
        return ContainmentResult(contained=contained, max_ratio=ratio, witness=witness)

    def intersect_subspace(self, body: SymmetricBody, subspace: Subspace) -> SymmetricBody:
        """body ∩ span(subspace), expressed in the coordinates of subspace.basis."""
        if subspace.ambient_dim != body.dim:
            raise DimensionError(f"subspace lives in dimension {subspace.ambient_dim}, body in {body.dim}")
        if subspace.is_empty:
            raise InternalError("the zero subspace has no slice body")

        restricted = self.facets(body) @ subspace.matrix()
        restricted = restricted[np.linalg.norm(restricted, axis=1) > EIGEN_FLOOR]
        rank = subspace.rank
        if rank == 1:
            reach = float(np.max(np.abs(restricted)))
            if reach <= 0:
                raise InternalError("slice is unbounded")
            return SymmetricBody(dim=1, vertices=[[1.0 / reach], [-1.0 / reach]])

        restricted = _dedupe_rows(restricted)
        halfspaces = np.hstack([restricted, -np.ones((len(restricted), 1))])
        try:
            intersection = HalfspaceIntersection(halfspaces, np.zeros(rank))
        except QhullError as e:
            raise InternalError(f"slice has empty interior in the subspace: {e}")
        points = intersection.intersections
        points = points[np.all(np.isfinite(points), axis=1)]
        try:
            return self.convex_hull_points(points)
        except DegenerateBodyError as e:
            raise InternalError(f"slice has empty interior in the subspace: {e}")

    def orthogonal_complement(self, subspace: Subspace, ell: Ellipsoid) -> Subspace:
        """S⊥ for the inner product of `ell`, with a Q-orthonormal basis. Full S gives the zero sentinel."""
        n = subspace.ambient_dim
        if ell.dim != n:
            raise DimensionError(f"inner product has dimension {ell.dim}, subspace lives in {n}")
        q = ell.matrix()
        if subspace.rank == n:
            return Subspace(ambient_dim=n, basis=[])
        if subspace.is_empty:
            complement = np.eye(n)
        else:
            complement = null_space(subspace.matrix().T @ q)
        gram = complement.T @ q @ complement
        lower = cholesky(gram, lower=True)
        basis = solve_triangular(lower, complement.T, lower=True).T
        return Subspace(ambient_dim=n, basis=basis.T.tolist())

    def convex_hull_points(self, points: Iterable[Sequence[float]]) -> SymmetricBody:
        """Irredundant vertex representation of the hull of a symmetric spanning point set."""
        cloud = np.asarray(list(points), dtype=float)
        if cloud.ndim != 2 or cloud.shape[0] == 0:
            raise DegenerateBodyError("point set is empty")
        dim = cloud.shape[1]
        if dim > MAX_DIM:
            raise DimensionError(f"ambient dimension {dim} exceeds {MAX_DIM}")
        cloud = _dedupe_rows(cloud)
        scale = max(1.0, float(np.max(np.abs(cloud))))
        for p in cloud:
            if np.min(np.max(np.abs(cloud + p), axis=1)) > MERGE_TOL * scale:
                raise DegenerateBodyError(f"point set is not symmetric: missing -{p.tolist()}")
        if np.linalg.matrix_rank(cloud, tol=MERGE_TOL * scale) < dim:
            raise DegenerateBodyError("points do not span the space")

        if dim == 1:
            radius = float(np.max(np.abs(cloud)))
            return SymmetricBody(dim=1, vertices=[[-radius], [radius]])

        try:
            kept = np.delete(cloud, redundant_rows(cloud), axis=0)
        except ValueError as e:
            raise DegenerateBodyError(str(e))
        # a vertex whose mirror was classified as non-extreme sits on the boundary within rounding
        paired = [np.min(np.max(np.abs(kept + v), axis=1)) <= MERGE_TOL * scale for v in kept]
        kept = kept[np.asarray(paired, dtype=bool)]
        return SymmetricBody(dim=dim, vertices=_canonical_order(kept).tolist())

    def ellipse_metrics(self, ell: Ellipsoid) -> EllipseMetrics:
        eigenvalues = np.linalg.eigvalsh(ell.matrix())
        semi_axes = (1.0 / np.sqrt(eigenvalues)).tolist()
        eccentricity = None
        if ell.dim == 2:
            a, b = semi_axes
            eccentricity = float(np.sqrt(max(0.0, 1.0 - (b / a) ** 2)))
        return EllipseMetrics(semi_axes=semi_axes, eccentricity=eccentricity)

    # ---------------------------------------------------------------- subspaces

    def orthonormal_span(self, vectors: Iterable[Sequence[float]], ambient_dim: int) -> Subspace:
        """Gram–Schmidt basis of the span, in the given order; near-dependent vectors are skipped."""
        basis: List[np.ndarray] = []
        for v in vectors:
            w = self._vector(v, ambient_dim)
            for _ in range(2):
                for b in basis:
                    w = w - (b @ w) * b
            norm = float(np.linalg.norm(w))
            if norm > SPAN_TOL:
                basis.append(w / norm)
        return Subspace(ambient_dim=ambient_dim, basis=[b.tolist() for b in basis])

    def same_subspace(self, first: Subspace, second: Subspace, tol: float = SPAN_TOL) -> bool:
        if first.ambient_dim != second.ambient_dim or first.rank != second.rank:
            return False
        if first.is_empty:
            return True
        return float(np.max(subspace_angles(first.matrix(), second.matrix()))) <= tol

    def embed(self, subspace: Subspace, coords: np.ndarray) -> np.ndarray:
        """Map rows of subspace coordinates to ambient points."""
        return np.asarray(coords, dtype=float) @ subspace.matrix().T
