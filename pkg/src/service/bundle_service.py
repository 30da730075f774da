from itertools import combinations
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.model.bundle import (
    BaseGraph,
    Bundle,
    BundleDiagnostics,
    Edge,
    NormProfile,
    Section,
    Slice,
    Stratification,
)
from src.model.geometry import Subspace, SymmetricBody
from src.service.base_service import BaseService
from src.service.geometry_service import GeometryService
from src.utils.errors import InternalError, SectionError, ValidationError
from src.utils.logger import Logger

logger = Logger.setup()

RESIDUAL_TOL = 1e-10


class BundleService(BaseService):
    """Discrete subhomogeneous bundles over a finite base graph."""

    def __init__(self, geometry: GeometryService, settings=None):
        super().__init__(settings)
        self.geometry = geometry

    # ---------------------------------------------------------- coordinates

    def fiber_coordinates(self, bundle: Bundle, vertex: str, value: Sequence[float]) -> tuple:
        """Coordinates of an ambient vector in the fiber basis at `vertex`, and the residual."""
        v = np.asarray(value, dtype=float)
        basis = bundle.fiber_basis[vertex].matrix()
        if basis.shape[1] == 0:
            return np.zeros(0), float(np.linalg.norm(v))
        coords, *_ = np.linalg.lstsq(basis, v, rcond=None)
        return coords, float(np.linalg.norm(basis @ coords - v))

    def section_coordinates(self, bundle: Bundle, vertex: str) -> List[np.ndarray]:
        return [self.fiber_coordinates(bundle, vertex, s.values[vertex])[0] for s in bundle.sections]

    # ----------------------------------------------------------- operations

    def validate(self, bundle: Bundle) -> BundleDiagnostics:
        """
        Check the bundle invariants and report fiber dimensions.

        Args:
            bundle: bundle to check

        Returns:
            BundleDiagnostics with dims, warnings and per-edge section-norm variation

        Raises:
            ValidationError: listing the offending vertices
        """
        offending: Dict[str, str] = {}
        warnings: List[str] = []
        for x in bundle.base.vertices:
            basis = bundle.fiber_basis[x]
            rank = basis.rank
            if basis.ambient_dim != bundle.ambient_dim:
                offending[x] = "fiber basis lives in the wrong ambient dimension"
                continue
            if rank == 0:
                message = "rank-0 fiber; apply augment_trivial first"
                warnings.append(f"{x}: {message}")
                logger.warning(f"vertex {x} has a rank-0 fiber")
                offending[x] = message
                continue
            ball = bundle.fiber_ball[x]
            if ball is None or ball.dim != rank:
                offending[x] = f"fiber ball dimension does not match fiber rank {rank}"
                continue
            values = np.asarray([s.values[x] for s in bundle.sections], dtype=float).reshape(-1, bundle.ambient_dim)
            span_rank = np.linalg.matrix_rank(values, tol=RESIDUAL_TOL) if len(values) else 0
            if span_rank != rank:
                offending[x] = f"sections span rank {span_rank}, fiber has rank {rank}"
                continue
            residuals = [self.fiber_coordinates(bundle, x, v)[1] for v in values]
            if residuals and max(residuals) > RESIDUAL_TOL * max(1.0, float(np.max(np.abs(values)))):
                offending[x] = f"section values leave the fiber (residual {max(residuals):.3e})"

        if offending:
            details = "; ".join(f"{x}: {why}" for x, why in sorted(offending.items()))
            logger.error(f"bundle validation failed: {details}")
            raise ValidationError(f"invalid bundle: {details}", vertices=list(offending))

        variation: Dict[str, float] = {}
        dims = bundle.dims()
        for edge in bundle.base.edges:
            if dims[edge.a] != dims[edge.b]:
                warnings.append(f"{edge.a}~{edge.b}: fiber dimension jumps {dims[edge.a]} -> {dims[edge.b]}")
            jumps = [
                abs(self._fiber_norm(bundle, edge.a, s.values[edge.a]) - self._fiber_norm(bundle, edge.b, s.values[edge.b]))
                for s in bundle.sections
            ]
            variation[f"{edge.a}~{edge.b}"] = max(jumps, default=0.0) / edge.length

        logger.info(f"bundle valid: {len(dims)} vertices, dims {sorted(set(dims.values()))}")
        return BundleDiagnostics(valid=True, dims=dims, warnings=warnings, edge_variation=variation)

    def _fiber_norm(self, bundle: Bundle, vertex: str, value: Sequence[float]) -> float:
        coords, _ = self.fiber_coordinates(bundle, vertex, value)
        ball = bundle.fiber_ball[vertex]
        if ball is None or not np.any(coords):
            return 0.0
        return self.geometry.gauge(ball, coords)

    def augment_trivial(self, bundle: Bundle) -> Bundle:
        """Direct sum with a rank-1 trivial bundle: new constant section e_{D+1}, balls co(B ∪ ±e)."""
        dim = bundle.ambient_dim + 1
        extra = [0.0] * bundle.ambient_dim + [1.0]
        sections = [
            Section(id=s.id, values={x: [*v, 0.0] for x, v in s.values.items()}) for s in bundle.sections
        ]
        taken = {s.id for s in bundle.sections}
        extra_id = f"e{dim}"
        while extra_id in taken:
            extra_id = f"{extra_id}'"
        sections.append(Section(id=extra_id, values={x: list(extra) for x in bundle.base.vertices}))

        bases: Dict[str, Subspace] = {}
        balls: Dict[str, Optional[SymmetricBody]] = {}
        for x in bundle.base.vertices:
            old = bundle.fiber_basis[x]
            bases[x] = Subspace(ambient_dim=dim, basis=[[*b, 0.0] for b in old.basis] + [extra])
            rank = old.rank + 1
            tip = [0.0] * old.rank + [1.0]
            ball = bundle.fiber_ball[x]
            points = [[*v, 0.0] for v in ball.vertices] if ball is not None else []
            points += [tip, [-c for c in tip]]
            balls[x] = self.geometry.convex_hull_points(points) if rank > 1 else SymmetricBody(dim=1, vertices=[[1.0], [-1.0]])

        return Bundle(
            ambient_dim=dim,
            base=bundle.base,
            sections=sections,
            fiber_basis=bases,
            fiber_ball=balls,
            augmented=True,
        )

    def stratify(self, bundle: Bundle) -> Stratification:
        """
        X₀ = locally minimal fiber dimension over closed stars; X_k adds x when every
        neighbour is in X_{k−1} or has fiber dimension ≥ dim E_x.
        """
        dims = bundle.dims()
        graph = bundle.base.to_networkx()
        vertices = bundle.base.vertices
        stars = {x: [x, *graph.neighbors(x)] for x in vertices}

        current = {x for x in vertices if all(dims[y] >= dims[x] for y in stars[x])}
        strata = [sorted(current)]
        limit = len(set(dims.values()))
        while len(current) < len(vertices):
            grown = {x for x in vertices if all(y in current or dims[y] >= dims[x] for y in stars[x])}
            if grown == current or len(strata) >= limit:
                raise InternalError("stratification did not terminate", strata=strata)
            if not current <= grown:
                raise InternalError("strata are not ascending", strata=strata)
            current = grown
            strata.append(sorted(current))

        depth: Dict[str, int] = {}
        for k, stratum in enumerate(strata):
            for x in stratum:
                depth.setdefault(x, k)
        logger.info(f"stratified {len(vertices)} vertices into {len(strata)} strata")
        return Stratification(strata=strata, depth=depth)

    def slices_of(self, coords: Sequence[np.ndarray], dim: int, max_rank: Optional[int] = None) -> List[Slice]:
        """Distinct spans of non-empty subsets of `coords` (vectors in a dim-dimensional space)."""
        max_rank = dim if max_rank is None else max_rank
        found: List[Slice] = []
        for size in range(1, len(coords) + 1):
            for subset in combinations(range(len(coords)), size):
                span = self.geometry.orthonormal_span([coords[i] for i in subset], dim)
                if span.is_empty or span.rank > max_rank:
                    continue
                if span.rank == dim:
                    span = Subspace(ambient_dim=dim, basis=np.eye(dim).tolist())
                if any(self.geometry.same_subspace(span, known.subspace) for known in found):
                    continue
                found.append(Slice(sections=list(subset), subspace=span))
        if not any(s.subspace.rank == dim for s in found):
            found.append(
                Slice(sections=list(range(len(coords))), subspace=Subspace(ambient_dim=dim, basis=np.eye(dim).tolist()))
            )
        return found

    def enumerate_slices(self, bundle: Bundle, vertex: str, max_rank: Optional[int] = None) -> List[Slice]:
        """Section-generated slices of the fiber at `vertex`, in fiber coordinates."""
        return self.slices_of(self.section_coordinates(bundle, vertex), bundle.fiber_dim(vertex), max_rank)

    def section_norm_profile(self, bundle: Bundle, section: Section) -> NormProfile:
        values: Dict[str, float] = {}
        worst_vertex, worst = None, 0.0
        for x in bundle.base.vertices:
            value = section.values[x]
            coords, residual = self.fiber_coordinates(bundle, x, value)
            if residual > RESIDUAL_TOL * max(1.0, float(np.max(np.abs(value)))) and residual > worst:
                worst_vertex, worst = x, residual
            values[x] = self._fiber_norm(bundle, x, value)
        if worst_vertex is not None:
            raise SectionError(
                f"section {section.id} leaves the fiber at {worst_vertex}",
                vertex=worst_vertex,
                residual=worst,
            )
        return NormProfile(values=values, sup=max(values.values()))

    # ---------------------------------------------------------- constructors

    def from_ambient_ball(
        self,
        ambient_dim: int,
        base: BaseGraph,
        sections: List[Section],
        ambient_ball: SymmetricBody,
    ) -> Bundle:
        """Sub-bundle of the trivial bundle: fibers are section spans, norms are slices of one ball."""
        bases: Dict[str, Subspace] = {}
        balls: Dict[str, Optional[SymmetricBody]] = {}
        for x in base.vertices:
            span = self.geometry.orthonormal_span([s.values[x] for s in sections], ambient_dim)
            if span.rank == ambient_dim:
                span = Subspace(ambient_dim=ambient_dim, basis=np.eye(ambient_dim).tolist())
            bases[x] = span
            balls[x] = None if span.is_empty else self.geometry.intersect_subspace(ambient_ball, span)
        return Bundle(ambient_dim=ambient_dim, base=base, sections=sections, fiber_basis=bases, fiber_ball=balls)

    @staticmethod
    def path_base(ids: List[str], positions: Optional[List[float]] = None) -> BaseGraph:
        """Path graph on `ids` in the given order; edge lengths are position differences."""
        positions = positions if positions is not None else [float(i) for i in range(len(ids))]
        edges = [
            Edge(a=ids[i], b=ids[i + 1], length=abs(positions[i + 1] - positions[i]))
            for i in range(len(ids) - 1)
        ]
        return BaseGraph(vertices=ids, edges=edges)

