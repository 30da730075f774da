from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy.linalg import null_space, orth
from scipy.optimize import nnls

from src.model.bundle import Bundle, Stratification
from src.model.geometry import MERGE_TOL, Ellipsoid, HullGenerator, Subspace, SymmetricBody
from src.model.norms import BodyGauge, HilbertNorm, HilbertNormSet
from src.model.renorming import (
    EdgeGap,
    LscReport,
    Net,
    NetRecord,
    Renorming,
    RenormingCertificate,
    Selection,
    SelectionCertificate,
    VertexCertificate,
    VertexRenorming,
)
from src.service.base_service import BaseService
from src.service.bundle_service import RESIDUAL_TOL, BundleService
from src.service.geometry_service import GeometryService
from src.service.loewner_service import LoewnerService
from src.service.seminorm_service import SeminormService
from src.utils.errors import CertificateError, InternalError, NetError, SectionError, ValidationError
from src.utils.logger import Logger

logger = Logger.setup()

CONVEXITY_WEIGHTS = [0.0, 0.25, 0.5, 0.75, 1.0]
WITNESS_TOL = 1e-6
SIMPLEX_WEIGHT = 1e3
BOUND_TOL = 1e-9


def _rounded(rows: Sequence[Sequence[float]]) -> Tuple[Tuple[float, ...], ...]:
    return tuple(tuple(float(c) for c in np.round(np.asarray(r, dtype=float), 9)) for r in rows)


def _dedupe_grams(grams: List[np.ndarray]) -> List[np.ndarray]:
    kept: List[np.ndarray] = []
    for gram in grams:
        scale = max(1.0, float(np.max(np.abs(gram))))
        if not any(np.max(np.abs(gram - other)) <= MERGE_TOL * scale for other in kept):
            kept.append(gram)
    return kept


def _projector(first: np.ndarray, second: np.ndarray) -> np.ndarray:
    """Orthogonal projector onto span(first) ∩ span(second) (columns are ambient vectors)."""
    dim = first.shape[0]
    if first.shape[1] == 0 or second.shape[1] == 0:
        return np.zeros((dim, dim))
    u, v = orth(first), orth(second)
    kernel = null_space(np.hstack([u, -v]))
    if kernel.shape[1] == 0:
        return np.zeros((dim, dim))
    common = orth(u @ kernel[: u.shape[1]])
    return common @ common.T


class RenormingService(BaseService):
    """Stratified multi-valued Hilbert renorming, its LSC witnesses and a selection."""

    def __init__(
        self,
        geometry: GeometryService,
        loewner: LoewnerService,
        seminorms: SeminormService,
        bundles: BundleService,
        settings=None,
    ):
        super().__init__(settings)
        self.geometry = geometry
        self.loewner = loewner
        self.seminorms = seminorms
        self.bundles = bundles

    # ------------------------------------------------------------ recursion

    def _loewner_gram(self, body: SymmetricBody) -> np.ndarray:
        return self.loewner.mvee_points(body.vertices, self.settings.mvee_config()).matrix()

    def _family(
        self,
        body: SymmetricBody,
        coords: List[np.ndarray],
        level: int,
        cache: Dict[tuple, List[np.ndarray]],
    ) -> List[np.ndarray]:
        """
        Grams of the level-`level` construction on `body` with section coordinates `coords`.

        Level 0 is the Löwner ellipsoid of the body. Level j ranges over the
        section-generated slices S and the level-(j−1) Grams K of the slice body,
        returning K^L(co(K ∪ (S⊥ ∩ body))) with S⊥ taken for K^L(body).
        """
        key = (level, _rounded(body.vertices), _rounded(coords))
        if key in cache:
            return cache[key]

        reference = self._loewner_gram(body)
        if level == 0:
            cache[key] = [reference]
            return cache[key]

        cfg = self.settings.mvee_config()
        grams: List[np.ndarray] = []
        for piece in self.bundles.slices_of(coords, body.dim):
            subspace = piece.subspace
            if subspace.rank == body.dim:
                grams.extend(self._family(body, coords, level - 1, cache))
                continue
            basis = subspace.matrix()
            inner_coords = [
                basis.T @ c
                for c in coords
                if np.any(np.abs(c) > RESIDUAL_TOL) and np.linalg.norm(basis @ (basis.T @ c) - c) <= RESIDUAL_TOL
            ]
            slice_body = self.geometry.intersect_subspace(body, subspace)
            complement = self.geometry.orthogonal_complement(subspace, Ellipsoid.from_matrix(reference))
            complement_body = self.geometry.intersect_subspace(body, complement)
            for inner in self._family(slice_body, inner_coords, level - 1, cache):
                hull = self.loewner.loewner_hull(
                    [
                        HullGenerator(shape=Ellipsoid.from_matrix(inner), frame=subspace),
                        HullGenerator(shape=complement_body, frame=complement),
                    ],
                    cfg,
                )
                grams.append(hull.matrix())

        if not grams:
            raise InternalError("no slices were enumerated")
        cache[key] = _dedupe_grams(grams)
        return cache[key]

    def _fiber(self, bundle: Bundle, vertex: str) -> Tuple[SymmetricBody, List[np.ndarray]]:
        ball = bundle.fiber_ball[vertex]
        if ball is None:
            raise ValidationError(f"vertex {vertex} has a rank-0 fiber", vertices=[vertex])
        return ball, self.bundles.section_coordinates(bundle, vertex)

    def build_K0(self, bundle: Bundle, vertex: str, strata: Optional[Stratification] = None) -> HilbertNormSet:
        """{K^L(fiber ball)} at a vertex of the lowest stratum."""
        strata = strata or self.bundles.stratify(bundle)
        if strata.depth[vertex] != 0:
            raise ValidationError(f"vertex {vertex} is not in X0", vertices=[vertex])
        ball, _ = self._fiber(bundle, vertex)
        return HilbertNormSet(generators=[HilbertNorm.from_matrix(self._loewner_gram(ball))])

    def build_Kk(
        self,
        bundle: Bundle,
        vertex: str,
        lower: Optional[Dict[str, HilbertNormSet]] = None,
        strata: Optional[Stratification] = None,
    ) -> HilbertNormSet:
        """
        Generators of K(x) for x of depth k ≥ 1.

        Args:
            bundle: validated bundle
            vertex: vertex of depth k ≥ 1
            lower: sets already built on the lower strata (checked for completeness when given)
            strata: stratification (computed when omitted)

        Returns:
            HilbertNormSet in fiber coordinates
        """
        strata = strata or self.bundles.stratify(bundle)
        depth = strata.depth[vertex]
        if depth == 0:
            raise ValidationError(f"vertex {vertex} lies in X0; use build_K0", vertices=[vertex])
        if lower is not None:
            missing = [x for x, d in strata.depth.items() if d < depth and x not in lower]
            if missing:
                raise ValidationError("lower strata are not built yet", vertices=missing)
        ball, coords = self._fiber(bundle, vertex)
        grams = self._family(ball, coords, depth, {})
        return HilbertNormSet(generators=[HilbertNorm.from_matrix(g) for g in grams])

    def _vertex_renorming(self, bundle: Bundle, vertex: str, strata: Stratification) -> VertexRenorming:
        depth = strata.depth[vertex]
        norms = self.build_K0(bundle, vertex, strata) if depth == 0 else self.build_Kk(bundle, vertex, strata=strata)
        ball, coords = self._fiber(bundle, vertex)
        gauge = BodyGauge(body=ball)
        distortions = [self.seminorms.distortion(gauge, g).distortion for g in norms.generators]

        reference = Ellipsoid.from_matrix(self._loewner_gram(ball))
        constants = [
            self.loewner.slice_constant(ball, piece.subspace, reference)
            for piece in self.bundles.slices_of(coords, ball.dim)
            if piece.subspace.rank < ball.dim
        ]
        for combined in self.seminorms.hull_pairs(norms, CONVEXITY_WEIGHTS):
            if not self.seminorms.l2_hull_membership(combined, norms).member:
                raise InternalError(f"K({vertex}) is not closed under p = 2 combinations")
        logger.debug(f"K({vertex}): depth {depth}, {len(norms.generators)} generators")
        return VertexRenorming(
            depth=depth,
            dim=ball.dim,
            norms=norms,
            distortions=distortions,
            slice_constant=max(constants, default=1.0),
        )

    @staticmethod
    def _check_bound(per_vertex: Dict[str, VertexRenorming]) -> Tuple[float, float]:
        """(distortion_sup, bound); raises when the sup exceeds max_x dim_x · max(1, C_S)."""
        distortion_sup = max(max(v.distortions) for v in per_vertex.values())
        if not np.isfinite(distortion_sup):
            raise InternalError("distortion supremum is not finite")
        bound = max(v.dim * max(1.0, v.slice_constant) for v in per_vertex.values())
        if distortion_sup > bound + BOUND_TOL:
            raise CertificateError(
                f"distortion_sup {distortion_sup:.6f} exceeds the per-instance bound {bound:.6f}",
                distortion_sup=distortion_sup,
                bound=bound,
            )
        return distortion_sup, bound

    def build_renorming(self, bundle: Bundle) -> Renorming:
        """
        Build K(x) stratum by stratum and certify its distortion.

        Args:
            bundle: bundle without rank-0 fibers

        Returns:
            Renorming with per-vertex generator sets, distortion_sup and its per-instance bound
        """
        try:
            self.bundles.validate(bundle)
            strata = self.bundles.stratify(bundle)
            per_vertex: Dict[str, VertexRenorming] = {}
            with ThreadPoolExecutor(max_workers=self.settings.threads) as pool:
                for k, stratum in enumerate(strata.strata):
                    fresh = [x for x in stratum if strata.depth[x] == k]
                    built = pool.map(lambda x: self._vertex_renorming(bundle, x, strata), fresh)
                    per_vertex.update(zip(fresh, built))
                    logger.info(f"stratum {k}: built K on {len(fresh)} vertices")

            distortion_sup, bound = self._check_bound(per_vertex)
            logger.info(f"renorming built: distortion_sup={distortion_sup:.9f}, bound={bound:.6f}")
            return Renorming(
                per_vertex={x: per_vertex[x] for x in bundle.base.vertices},
                distortion_sup=distortion_sup,
                distortion_bound=bound,
                strata=strata,
            )
        except Exception as e:
            logger.error(f"Error building renorming: {e}")
            raise

    # ------------------------------------------------------------------ LSC

    def _check_net(self, bundle: Bundle, strata: Stratification, net: Net):
        known = set(bundle.base.vertices)
        unknown = [x for x in [net.limit, *net.approach] if x not in known]
        if unknown:
            raise NetError(f"net uses unknown vertices {unknown}")
        if net.limit in net.approach:
            raise NetError(f"net for {net.limit} contains its own limit")
        if strata.depth[net.limit] > min(strata.depth[x] for x in net.approach):
            raise NetError(f"net approaches {net.limit} from a lower stratum; LSC is only claimed into lower strata")
        hops = nx.single_source_shortest_path_length(bundle.base.to_networkx(), net.limit)
        distances = [hops[x] for x in net.approach]
        if any(b > a for a, b in zip(distances, distances[1:])) or distances[-1] != 1:
            raise NetError(f"net for {net.limit} does not move monotonically onto the limit")

    def _spanning_sections(self, coords: List[np.ndarray], dim: int) -> List[int]:
        chosen: List[int] = []
        for i, c in enumerate(coords):
            if self.geometry.orthonormal_span([coords[j] for j in chosen] + [c], dim).rank > len(chosen):
                chosen.append(i)
            if len(chosen) == dim:
                break
        return chosen

    def _witness(
        self,
        bundle: Bundle,
        vertex: str,
        chosen: List[int],
        target: np.ndarray,
        limit_coords: List[np.ndarray],
        transported: bool,
    ) -> Optional[np.ndarray]:
        """Generator at `vertex` built on the slice spanned by the chosen sections; None if they collapse."""
        ball, coords = self._fiber(bundle, vertex)
        values = [coords[j] for j in chosen]
        subspace = self.geometry.orthonormal_span(values, ball.dim)
        if subspace.rank < len(chosen):
            return None
        full = subspace.rank == ball.dim
        if full:
            subspace = Subspace(ambient_dim=ball.dim, basis=np.eye(ball.dim).tolist())
        basis = subspace.matrix()

        if transported:
            # linear map sending s_j(limit) to s_j(vertex) in slice coordinates
            source = np.column_stack([limit_coords[j] for j in chosen])
            image = np.column_stack([basis.T @ v for v in values])
            inverse = source @ np.linalg.inv(image)
            inner = inverse.T @ target @ inverse
        else:
            slice_body = ball if full else self.geometry.intersect_subspace(ball, subspace)
            inner = self._loewner_gram(slice_body)
        if full:
            return inner

        reference = Ellipsoid.from_matrix(self._loewner_gram(ball))
        complement = self.geometry.orthogonal_complement(subspace, reference)
        complement_body = self.geometry.intersect_subspace(ball, complement)
        hull = self.loewner.loewner_hull(
            [
                HullGenerator(shape=Ellipsoid.from_matrix(inner), frame=subspace),
                HullGenerator(shape=complement_body, frame=complement),
            ],
            self.settings.mvee_config(),
        )
        return hull.matrix()

    def _net_records(
        self,
        renorming: Renorming,
        bundle: Bundle,
        net: Net,
        probes: List[int],
        tol: float,
    ) -> List[NetRecord]:
        strata = renorming.strata
        limit_coords = self.bundles.section_coordinates(bundle, net.limit)
        chosen = self._spanning_sections(limit_coords, bundle.fiber_dim(net.limit))
        transported = strata.depth[net.limit] > 0
        approach_coords = {x: self.bundles.section_coordinates(bundle, x) for x in net.approach}

        records = []
        for generator in renorming.K(net.limit).generators:
            target = generator.matrix()
            witnesses, gaps, members, notes = [], [], [], []
            for x in net.approach:
                witness = self._witness(bundle, x, chosen, target, limit_coords, transported)
                if witness is None:
                    notes.append(f"{x}: sections {chosen} are not independent")
                    witnesses.append(None)
                    gaps.append(None)
                    members.append(False)
                    continue
                gap = max(
                    abs(
                        np.sqrt(max(0.0, approach_coords[x][s] @ witness @ approach_coords[x][s]))
                        - np.sqrt(max(0.0, limit_coords[s] @ target @ limit_coords[s]))
                    )
                    for s in probes
                )
                certificate = self.seminorms.l2_hull_membership(
                    HilbertNorm.from_matrix(witness), renorming.K(x), tol=WITNESS_TOL
                )
                witnesses.append(witness.tolist())
                gaps.append(float(gap))
                members.append(certificate.member)
                if not certificate.member:
                    notes.append(f"{x}: witness is not a member of K({x})")

            observed = [g for g in gaps if g is not None]
            monotone = all(b <= a + 1e-12 for a, b in zip(observed, observed[1:]))
            passed = gaps[-1] is not None and gaps[-1] <= tol and members[-1]
            records.append(
                NetRecord(
                    limit=net.limit,
                    approach=net.approach,
                    target=target.tolist(),
                    witnesses=witnesses,
                    gaps=gaps,
                    witness_in_K=members,
                    monotone=monotone,
                    passed=passed,
                    diagnostics=notes,
                )
            )
        return records

    def verify_lsc(
        self,
        renorming: Renorming,
        bundle: Bundle,
        nets: List[Net],
        probes: Optional[List[str]] = None,
        tol: Optional[float] = None,
    ) -> LscReport:
        """
        Witness members of K along nets approaching each limit vertex.

        Args:
            renorming: built renorming
            bundle: the bundle it was built on
            nets: limit vertex with its approaching vertices (farthest first)
            probes: ids of the probe sections (all sections when omitted)
            tol: tail tolerance (settings.tol when omitted)

        Returns:
            LscReport with one record per (net, target generator)
        """
        tol = self.settings.tol if tol is None else tol
        ids = [s.id for s in bundle.sections]
        if probes is None:
            indices = list(range(len(ids)))
        else:
            unknown = [p for p in probes if p not in ids]
            if unknown:
                raise SectionError(f"unknown probe sections {unknown}")
            indices = [ids.index(p) for p in probes]
        for net in nets:
            self._check_net(bundle, renorming.strata, net)

        with ThreadPoolExecutor(max_workers=self.settings.threads) as pool:
            batches = list(pool.map(lambda net: self._net_records(renorming, bundle, net, indices, tol), nets))
        records = [r for batch in batches for r in batch]
        passed = all(r.passed for r in records)
        logger.info(f"LSC check on {len(nets)} nets: {'passed' if passed else 'failed'}")
        return LscReport(tol=tol, records=records, passed=passed)

    # ------------------------------------------------------------ selection

    @staticmethod
    def _ambient_gram(bundle: Bundle, vertex: str, gram: np.ndarray) -> np.ndarray:
        pseudo = np.linalg.pinv(bundle.fiber_basis[vertex].matrix())
        return pseudo.T @ gram @ pseudo

    def _nearest_coefficients(self, grams: List[np.ndarray], target: np.ndarray, projector: np.ndarray) -> np.ndarray:
        count = len(grams)
        if not np.any(projector):
            return np.full(count, 1.0 / count)
        columns = np.column_stack([(projector @ g @ projector).ravel() for g in grams])
        rhs = (projector @ target @ projector).ravel()
        weight = SIMPLEX_WEIGHT * max(1.0, float(np.max(np.abs(columns))))
        system = np.vstack([columns, weight * np.ones((1, count))])
        coefficients, _ = nnls(system, np.append(rhs, weight))
        total = float(coefficients.sum())
        return coefficients / total if total > 0 else np.full(count, 1.0 / count)

    def select(self, renorming: Renorming, bundle: Bundle, root: Optional[str] = None) -> Selection:
        """
        Pick one Hilbert norm per vertex by breadth-first nearest-point propagation.

        Args:
            renorming: built renorming
            bundle: the bundle it was built on
            root: start vertex (first vertex in canonical order when omitted)

        Returns:
            Selection with membership certificates and the common/complement moduli
        """
        root = root or bundle.base.vertices[0]
        if root not in renorming.per_vertex:
            raise ValidationError(f"unknown root vertex {root}", vertices=[root])
        graph = bundle.base.to_networkx()
        bases = {x: bundle.fiber_basis[x].matrix() for x in bundle.base.vertices}

        generators = renorming.K(root).generators
        coefficients = {root: np.full(len(generators), 1.0 / len(generators))}
        grams = {root: sum(c * g.matrix() for c, g in zip(coefficients[root], generators))}
        for parent, child in nx.bfs_edges(graph, root, sort_neighbors=sorted):
            candidates = [g.matrix() for g in renorming.K(child).generators]
            ambient = [self._ambient_gram(bundle, child, g) for g in candidates]
            target = self._ambient_gram(bundle, parent, grams[parent])
            projector = _projector(bases[parent], bases[child])
            coefficients[child] = self._nearest_coefficients(ambient, target, projector)
            grams[child] = sum(c * g for c, g in zip(coefficients[child], candidates))

        choice: Dict[str, HilbertNorm] = {}
        certificates = {}
        for x in bundle.base.vertices:
            choice[x] = HilbertNorm.from_matrix(grams[x])
            certificates[x] = self.seminorms.l2_hull_membership(choice[x], renorming.K(x))
            if not certificates[x].member:
                raise InternalError(f"selected norm at {x} is not a member of K({x})")

        edges: List[EdgeGap] = []
        modulus, complement_modulus = 0.0, 0.0
        for edge in sorted(bundle.base.edges, key=lambda e: tuple(sorted((e.a, e.b)))):
            a_gram = self._ambient_gram(bundle, edge.a, grams[edge.a])
            b_gram = self._ambient_gram(bundle, edge.b, grams[edge.b])
            projector = _projector(bases[edge.a], bases[edge.b])
            common = float(np.linalg.norm(projector @ (a_gram - b_gram) @ projector))
            complement = float(
                np.linalg.norm(a_gram - projector @ a_gram @ projector)
                + np.linalg.norm(b_gram - projector @ b_gram @ projector)
            )
            edges.append(
                EdgeGap(
                    a=edge.a,
                    b=edge.b,
                    common_rank=int(round(np.trace(projector))),
                    common_gap=common,
                    complement_gap=complement,
                )
            )
            modulus = max(modulus, common / edge.length)
            complement_modulus = max(complement_modulus, complement / edge.length)

        logger.info(f"selection from {root}: modulus={modulus:.6g}, complement modulus={complement_modulus:.6g}")
        return Selection(
            root=root,
            choice=choice,
            certificates=certificates,
            edges=edges,
            modulus=modulus,
            complement_modulus=complement_modulus,
        )

    @staticmethod
    def certificate(
        renorming: Renorming,
        lsc_report: Optional[LscReport] = None,
        selection: Optional[Selection] = None,
    ) -> RenormingCertificate:
        """Assemble the versioned renorm-build certificate from its parts."""
        per_vertex = {
            x: VertexCertificate(
                generators=[g.gram for g in vertex.norms.generators],
                depth=vertex.depth,
                dim=vertex.dim,
                distortions=vertex.distortions,
                slice_constant=vertex.slice_constant,
            )
            for x, vertex in renorming.per_vertex.items()
        }
        picked = None
        if selection is not None:
            picked = SelectionCertificate(
                root=selection.root,
                grams={x: norm.gram for x, norm in selection.choice.items()},
                modulus=selection.modulus,
                complement_modulus=selection.complement_modulus,
            )
        return RenormingCertificate(
            per_vertex=per_vertex,
            distortion_sup=renorming.distortion_sup,
            distortion_bound=renorming.distortion_bound,
            strata=renorming.strata.strata,
            lsc_report=lsc_report,
            selection=picked,
        )
