from itertools import combinations, permutations, product
from math import perm
from typing import Dict, FrozenSet, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np

from src.model.hyperspace import (
    AnchoredCover,
    ContinuityReport,
    ConvexSelection,
    FiniteMetricSpace,
    Hyperspace,
    Incidence,
    NetCheck,
    RoundtripReport,
    SelectionNet,
    SelectionValue,
    SliceResult,
    SubsetPoint,
)
from src.service.base_service import BaseService
from src.utils.errors import (
    AnchorError,
    CertificateError,
    DimensionError,
    EnumerationCapError,
    NetError,
    ValidationError,
)
from src.utils.logger import Logger

logger = Logger.setup()

RECONSTRUCTION_TOL = 1e-12
CoverKey = FrozenSet[Tuple[str, str]]


def _discrete(points: List[str]) -> FiniteMetricSpace:
    size = len(points)
    return FiniteMetricSpace(points=points, dist=(np.ones((size, size)) - np.eye(size)).tolist())


class HyperspaceService(BaseService):
    """Finite hyperspaces Z_[n], anchored branched covers and convex selections."""

    # ----------------------------------------------------------- hyperspace

    @staticmethod
    def hausdorff(space: FiniteMetricSpace, first: Sequence[str], second: Sequence[str]) -> float:
        idx = space.index()
        d = np.asarray(space.dist, dtype=float)[np.ix_([idx[a] for a in first], [idx[b] for b in second])]
        return float(max(np.max(np.min(d, axis=1)), np.max(np.min(d, axis=0))))

    @staticmethod
    def subsets(space: FiniteMetricSpace, n: int) -> List[SubsetPoint]:
        """Non-empty subsets of size ≤ n, by size then lexicographically."""
        if n < 1:
            raise DimensionError("n must be at least 1")
        ordered = sorted(space.points)
        return [
            SubsetPoint(members=list(members))
            for size in range(1, min(n, len(ordered)) + 1)
            for members in combinations(ordered, size)
        ]

    def build_hyperspace(self, space: FiniteMetricSpace, n: int) -> Hyperspace:
        """Z_[n] with the Hausdorff metric."""
        subsets = self.subsets(space, n)
        dist = [[self.hausdorff(space, a.members, b.members) for b in subsets] for a in subsets]
        logger.info(f"hyperspace of {len(space.points)} points, n={n}: {len(subsets)} subsets")
        return Hyperspace(
            base=space,
            n=n,
            subsets=subsets,
            space=FiniteMetricSpace(points=[s.key for s in subsets], dist=dist),
        )

    def build_incidence(self, space: FiniteMetricSpace, n: int) -> Incidence:
        """Z⊆_[n] = {(z, A) : z ∈ A} with the max metric and the projection (z, A) ↦ A."""
        subsets = self.subsets(space, n)
        pairs = [(z, subset) for subset in subsets for z in subset.members]
        keys = [f"({z},{subset.key})" for z, subset in pairs]
        dist = [
            [
                max(space.distance(z, w), self.hausdorff(space, a.members, b.members))
                for w, b in pairs
            ]
            for z, a in pairs
        ]
        projection = {key: subset.key for key, (_, subset) in zip(keys, pairs)}
        fiber_sizes = {subset.key: 0 for subset in subsets}
        for image in projection.values():
            fiber_sizes[image] += 1
        for subset in subsets:
            if fiber_sizes[subset.key] != len(subset.members) or fiber_sizes[subset.key] > n:
                raise ValidationError(f"fiber over {subset.key} has {fiber_sizes[subset.key]} points")
        return Incidence(
            n=n,
            space=FiniteMetricSpace(points=keys, dist=dist),
            pairs={key: [z, subset.key] for key, (z, subset) in zip(keys, pairs)},
            projection=projection,
            fiber_sizes=fiber_sizes,
        )

    # --------------------------------------------------------------- covers

    def cover_to_map(self, cover: AnchoredCover, space: FiniteMetricSpace, n: int) -> Dict[str, SubsetPoint]:
        """
        g(x) = {anchor(y) : proj(y) = x}.

        Raises:
            AnchorError: the anchor collides on a fiber or leaves Z
        """
        known = set(space.points)
        result: Dict[str, SubsetPoint] = {}
        for x in cover.base.points:
            fiber = cover.fiber(x)
            if len(fiber) > n:
                raise ValidationError(f"fiber over {x} has {len(fiber)} > {n} points", vertices=[x])
            seen: Dict[str, str] = {}
            for y in fiber:
                z = cover.anchor[y]
                if z not in known:
                    raise AnchorError(f"anchor of {y} is {z}, which is not a point of Z", point=y)
                if z in seen:
                    raise AnchorError(
                        f"anchor is not injective on the fiber over {x}: {seen[z]} and {y} both map to {z}",
                        pair=[seen[z], y],
                    )
                seen[z] = y
            result[x] = SubsetPoint(members=list(seen))
        return result

    def map_to_cover(
        self,
        g: Dict[str, SubsetPoint],
        space: FiniteMetricSpace,
        n: int,
        base: Optional[FiniteMetricSpace] = None,
    ) -> AnchoredCover:
        """Pullback of Z⊆_[n] → Z_[n] along g: Y = {(x, (z, g(x))) : z ∈ g(x)}."""
        base = base or _discrete(sorted(g))
        if set(base.points) != set(g):
            raise ValidationError("g must be defined exactly on the base points", vertices=sorted(set(base.points) ^ set(g)))
        known = set(space.points)
        total: List[Tuple[str, str, str]] = []
        for x in base.points:
            subset = g[x]
            if len(subset.members) > n or not set(subset.members) <= known:
                raise ValidationError(f"g({x}) = {subset.key} is not a point of Z_[{n}]", vertices=[x])
            total.extend((x, z, f"({x},({z},{subset.key}))") for z in subset.members)

        base_idx, space_idx = base.index(), space.index()
        base_dist, space_dist = np.asarray(base.dist), np.asarray(space.dist)
        spread = {
            (x, u): self.hausdorff(space, g[x].members, g[u].members) for x in base.points for u in base.points
        }
        dist = [
            [
                max(base_dist[base_idx[x], base_idx[u]], space_dist[space_idx[z], space_idx[w]], spread[x, u])
                for u, w, _ in total
            ]
            for x, z, _ in total
        ]
        return AnchoredCover(
            total=FiniteMetricSpace(points=[key for *_, key in total], dist=dist),
            base=base,
            proj={key: x for x, _, key in total},
            anchor={key: z for _, z, key in total},
        )

    def _cover_from_key(self, key: CoverKey, base: FiniteMetricSpace, space: FiniteMetricSpace) -> AnchoredCover:
        points = sorted(key)
        labels = [f"{x}#{z}" for x, z in points]
        dist = [[max(base.distance(x, u), space.distance(z, w)) for u, w in points] for x, z in points]
        return AnchoredCover(
            total=FiniteMetricSpace(points=labels, dist=dist),
            base=base,
            proj={label: x for label, (x, _) in zip(labels, points)},
            anchor={label: z for label, (_, z) in zip(labels, points)},
        )

    @staticmethod
    def _isomorphic_to_pullback(cover: AnchoredCover, pullback: AnchoredCover, g: Dict[str, SubsetPoint]) -> bool:
        """y ↦ (proj y, (anchor y, g(proj y))) is a bijection onto the pullback respecting proj and anchor."""
        image = {y: f"({cover.proj[y]},({cover.anchor[y]},{g[cover.proj[y]].key}))" for y in cover.total.points}
        if sorted(image.values()) != sorted(pullback.total.points):
            return False
        return all(
            pullback.proj[image[y]] == cover.proj[y] and pullback.anchor[image[y]] == cover.anchor[y]
            for y in cover.total.points
        )

    def _raw_covers(self, base: FiniteMetricSpace, space: FiniteMetricSpace, n: int) -> Iterable[CoverKey]:
        """Covers with fibers labelled 0..k−1: one injective anchor tuple per base point."""
        choices = [
            [tuple(t) for size in range(1, min(n, len(space.points)) + 1) for t in permutations(sorted(space.points), size)]
            for _ in base.points
        ]
        for tuples in product(*choices):
            yield frozenset((x, z) for x, anchors in zip(base.points, tuples) for z in anchors)

    def roundtrip_check(
        self,
        base: FiniteMetricSpace,
        space: FiniteMetricSpace,
        n: int,
        cap: Optional[int] = None,
    ) -> RoundtripReport:
        """
        Maps X → Z_[n] against isomorphism classes of Z-anchored (≤n)-branched covers of X.

        Args:
            base: X
            space: Z
            n: branching bound
            cap: enumeration cap (settings.cap when omitted)

        Returns:
            RoundtripReport with both counts and both round-trip verdicts
        """
        cap = self.settings.cap if cap is None else cap
        subsets = self.subsets(space, n)
        map_count = len(subsets) ** len(base.points)
        per_point = sum(perm(len(space.points), k) for k in range(1, min(n, len(space.points)) + 1))
        raw_count = per_point ** len(base.points)
        if max(map_count, raw_count) > cap:
            raise EnumerationCapError(
                f"enumeration needs {max(map_count, raw_count)} candidates, cap is {cap}",
                maps=map_count,
                raw_covers=raw_count,
            )

        maps_ok = True
        pullback_keys = set()
        for values in product(subsets, repeat=len(base.points)):
            g = dict(zip(base.points, values))
            cover = self.map_to_cover(g, space, n, base)
            maps_ok &= self.cover_to_map(cover, space, n) == g
            pullback_keys.add(frozenset((cover.proj[y], cover.anchor[y]) for y in cover.total.points))

        classes = set(self._raw_covers(base, space, n))
        covers_ok = classes == pullback_keys
        for key in sorted(classes, key=sorted):
            cover = self._cover_from_key(key, base, space)
            g = self.cover_to_map(cover, space, n)
            if not self._isomorphic_to_pullback(cover, self.map_to_cover(g, space, n, base), g):
                covers_ok = False
                break

        passed = maps_ok and covers_ok and map_count == len(classes)
        logger.info(f"roundtrip |X|={len(base.points)} |Z|={len(space.points)} n={n}: {map_count} maps, {len(classes)} cover classes")
        return RoundtripReport(
            x_size=len(base.points),
            z_size=len(space.points),
            n=n,
            map_count=map_count,
            cover_class_count=len(classes),
            maps_roundtrip=maps_ok,
            covers_roundtrip=covers_ok,
            passed=passed,
        )

    # ----------------------------------------------------------- selections

    def build_selection(
        self,
        points: Dict[str, List[float]],
        subsets: List[SubsetPoint],
        n: int,
        rule: Literal["barycenter", "midrange"] = "barycenter",
        direction: Optional[List[float]] = None,
    ) -> ConvexSelection:
        """
        Certified convex selection on the given subsets.

        `barycenter` averages the members; `midrange` takes the midpoint of the
        extreme members along `direction` (ties broken by id).
        """
        dims = {len(v) for v in points.values()}
        if len(dims) != 1:
            raise DimensionError("points must share one dimension")
        dim = dims.pop()
        if rule == "midrange":
            if direction is None or len(direction) != dim:
                raise DimensionError(f"midrange needs a direction of length {dim}")
            w = np.asarray(direction, dtype=float)

        phi: Dict[str, SelectionValue] = {}
        for subset in subsets:
            members = subset.members
            if rule == "barycenter":
                coeffs = {m: 1.0 / len(members) for m in members}
            elif rule == "midrange":
                heights = {m: float(w @ np.asarray(points[m], dtype=float)) for m in members}
                low = min(members, key=lambda m: (heights[m], m))
                high = min(members, key=lambda m: (-heights[m], m))
                coeffs = {m: 0.0 for m in members}
                coeffs[low] += 0.5
                coeffs[high] += 0.5
            else:
                raise ValueError(f"unknown selection rule {rule}")
            c = np.asarray([coeffs[m] for m in members])
            point = c @ np.asarray([points[m] for m in members], dtype=float)
            phi[subset.key] = SelectionValue(point=point.tolist(), coeffs=coeffs)
        return ConvexSelection(ambient_dim=dim, n=n, points=points, phi=phi)

    def slice_selection(self, selection: ConvexSelection, x: str, subset: SubsetPoint) -> SliceResult:
        """
        Split φ(A ∪ {x}) = f·x + (1 − f)·φˣ(A).

        Args:
            selection: certified convex selection
            x: distinguished point
            subset: A, not containing x

        Returns:
            SliceResult with f, φˣ(A), its coefficients over A and the reconstruction residual
        """
        if x in subset.members:
            raise ValidationError(f"{x} already belongs to {subset.key}", vertices=[x])
        union = SubsetPoint(members=[*subset.members, x])
        value = selection.phi.get(union.key)
        if value is None:
            raise CertificateError(f"no certified value for {union.key}")

        f = value.coeffs[x]
        if f < 1.0:
            coeffs = {a: value.coeffs[a] / (1.0 - f) for a in subset.members}
        else:
            coeffs = {a: 1.0 / len(subset.members) for a in subset.members}
        members = np.asarray([selection.points[a] for a in subset.members], dtype=float)
        phi_x = np.asarray([coeffs[a] for a in subset.members]) @ members
        reconstructed = f * np.asarray(selection.points[x]) + (1.0 - f) * phi_x
        residual = float(np.max(np.abs(reconstructed - np.asarray(value.point))))
        return SliceResult(f_x=f, phi_x=phi_x.tolist(), coeffs=coeffs, residual=residual)

    def _radius(self, selection: ConvexSelection, x0: str, members: List[str]) -> float:
        center = np.asarray(selection.points[x0], dtype=float)
        return float(max(np.linalg.norm(np.asarray(selection.points[m]) - center) for m in members))

    def _check_net(self, selection: ConvexSelection, net: SelectionNet, tol: float) -> NetCheck:
        if net.x0 not in selection.points:
            raise NetError(f"unknown limit point {net.x0}")
        terms = [SubsetPoint(members=t) for t in net.terms]
        for term in terms:
            if term.key not in selection.phi:
                raise CertificateError(f"no certified value for {term.key}")
        radii = [self._radius(selection, net.x0, t.members) for t in terms]
        if any(b > a + RECONSTRUCTION_TOL for a, b in zip(radii, radii[1:])) or (len(radii) > 1 and radii[-1] >= radii[0]):
            raise NetError(f"net does not converge to {{{net.x0}}} in the Hausdorff metric", radii=radii)

        center = np.asarray(selection.points[net.x0], dtype=float)
        gaps = [float(np.linalg.norm(np.asarray(selection.phi[t.key].point) - center)) for t in terms]
        bounded = all(g <= r + RECONSTRUCTION_TOL for g, r in zip(gaps, radii))
        passed = bounded and gaps[-1] <= tol

        f_values, f_limit, f_converged = None, None, None
        if net.designated is not None:
            x = net.designated
            if x == net.x0:
                raise NetError("the designated point must differ from the limit point")
            if any(x in t.members for t in terms):
                raise NetError(f"designated point {x} lies in a term of the net")
            f_values = [self.slice_selection(selection, x, t).f_x for t in terms]
            f_limit = self.slice_selection(selection, x, SubsetPoint(members=[net.x0])).f_x
            f_converged = abs(f_values[-1] - f_limit) <= tol
            passed = passed and f_converged

        return NetCheck(
            x0=net.x0,
            radii=radii,
            gaps=gaps,
            bounded=bounded,
            tail_gap=gaps[-1],
            f_values=f_values,
            f_limit=f_limit,
            f_converged=f_converged,
            passed=passed,
        )

    def check_singleton_continuity(
        self, selection: ConvexSelection, nets: List[SelectionNet], tol: Optional[float] = None
    ) -> ContinuityReport:
        """φ(A_m) → x₀ along nets A_m → {x₀}; with a designated x also f_x(A_m) → f_x({x₀})."""
        tol = self.settings.tol if tol is None else tol
        checks = [self._check_net(selection, net, tol) for net in nets]
        return ContinuityReport(tol=tol, nets=checks, passed=all(c.passed for c in checks))

