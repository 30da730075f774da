from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from src.model.geometry import (
    MERGE_TOL,
    Ellipsoid,
    HullGenerator,
    LoewnerCertificate,
    MveeConfig,
    MveeSolution,
    Subspace,
    SymmetricBody,
)
from src.service.base_service import BaseService
from src.service.geometry_service import GeometryService
from src.utils.errors import (
    ConvergenceError,
    DegenerateBodyError,
    DimensionError,
    InternalError,
    NotEnclosingError,
)
from src.utils.logger import Logger

logger = Logger.setup()

GeneratorLike = Union[HullGenerator, SymmetricBody, Ellipsoid]


def _half_set(points: np.ndarray) -> np.ndarray:
    """One representative of every ±pair (first non-zero coordinate positive), zeros dropped."""
    kept = []
    for p in points:
        nonzero = np.flatnonzero(np.abs(p) > MERGE_TOL)
        if nonzero.size == 0:
            continue
        kept.append(p if p[nonzero[0]] > 0 else -p)
    if not kept:
        return np.zeros((0, points.shape[1]))
    half = np.asarray(kept)
    _, first = np.unique(np.round(half, 9), axis=0, return_index=True)
    return half[np.sort(first)]


def _boundary_directions(dim: int) -> np.ndarray:
    """±eᵢ and ±(eᵢ ± eⱼ)/√2: a symmetric design whose enclosing ellipsoid is the unit ball."""
    directions = [np.eye(dim)[i] for i in range(dim)]
    for i in range(dim):
        for j in range(i + 1, dim):
            for sign in (1.0, -1.0):
                d = np.zeros(dim)
                d[i], d[j] = 1.0, sign
                directions.append(d / np.sqrt(2.0))
    half = np.asarray(directions)
    return np.vstack([half, -half])


class LoewnerService(BaseService):
    """Minimum-volume origin-centred enclosing ellipsoids and their certificates."""

    def __init__(self, geometry: GeometryService, settings=None):
        super().__init__(settings)
        self.geometry = geometry

    def _config(self, cfg: Optional[MveeConfig]) -> MveeConfig:
        return cfg if cfg is not None else self.settings.mvee_config()

    # ----------------------------------------------------------------- points

    def solve_points(self, points: Sequence[Sequence[float]], cfg: Optional[MveeConfig] = None) -> MveeSolution:
        """
        Khachiyan-type ascent with away steps on the symmetric point set.

        Weights u live on one point of every ±pair. With X = Σ uᵢ pᵢpᵢᵀ and
        Mᵢ = pᵢᵀ X⁻¹ pᵢ the iteration stops once max Mᵢ ≤ d(1+ε); the returned
        Gram X⁻¹ / max Mᵢ encloses every point exactly.

        Args:
            points: symmetric spanning point set
            cfg: solver tolerances (defaults from settings)

        Returns:
            MveeSolution with the ellipsoid, iteration count, achieved gap and weights
        """
        cfg = self._config(cfg)
        cloud = np.asarray(points, dtype=float)
        if cloud.ndim != 2 or cloud.shape[0] == 0:
            raise DegenerateBodyError("point set is empty")
        dim = cloud.shape[1]
        half = _half_set(cloud)
        if half.shape[0] == 0 or np.linalg.matrix_rank(half, tol=MERGE_TOL) < dim:
            raise DegenerateBodyError("points do not span the space")

        if dim == 1:
            radius = float(np.max(np.abs(half)))
            return MveeSolution(
                ellipsoid=Ellipsoid(gram=[[1.0 / radius**2]]),
                iterations=0,
                achieved_gap=0.0,
                weights=[1.0 if abs(p[0]) == radius else 0.0 for p in half],
            )

        count = half.shape[0]
        u = np.full(count, 1.0 / count)
        limit = cfg.iteration_limit(dim)
        iterations = 0
        while True:
            x = half.T @ (u[:, None] * half)
            x_inv = np.linalg.inv(x)
            m = np.einsum("ij,jk,ik->i", half, x_inv, half)
            j = int(np.argmax(m))
            kappa = float(m[j])
            gap = kappa / dim - 1.0
            if gap <= cfg.epsilon:
                break
            if iterations >= limit:
                best = MveeSolution(
                    ellipsoid=Ellipsoid.from_matrix(x_inv / kappa),
                    iterations=iterations,
                    achieved_gap=gap,
                    weights=u.tolist(),
                )
                raise ConvergenceError(
                    f"MVEE did not reach gap {cfg.epsilon} within {limit} iterations (gap {gap:.3e})",
                    best=best,
                )

            support = np.flatnonzero(u > 0)
            i = int(support[np.argmin(m[support])])
            kappa_min = float(m[i])
            if kappa - dim >= dim - kappa_min:
                tau = (kappa - dim) / (dim * (kappa - 1.0))
                u = (1.0 - tau) * u
                u[j] += tau
            else:
                drop = -u[i] / (1.0 - u[i])
                if kappa_min <= 1.0:
                    tau = drop
                else:
                    tau = max(drop, (kappa_min - dim) / (dim * (kappa_min - 1.0)))
                u = (1.0 - tau) * u
                u[i] += tau
                if tau == drop:
                    u[i] = 0.0
            iterations += 1

        logger.debug(f"MVEE dim={dim} points={count} converged in {iterations} iterations, gap={gap:.3e}")
        return MveeSolution(
            ellipsoid=Ellipsoid.from_matrix(x_inv / kappa),
            iterations=iterations,
            achieved_gap=max(gap, 0.0),
            weights=u.tolist(),
        )

    def mvee_points(self, points: Sequence[Sequence[float]], cfg: Optional[MveeConfig] = None) -> Ellipsoid:
        return self.solve_points(points, cfg).ellipsoid

    # ------------------------------------------------------------------ hulls

    @staticmethod
    def _as_generator(generator: GeneratorLike) -> HullGenerator:
        if isinstance(generator, HullGenerator):
            return generator
        return HullGenerator(shape=generator)

    @staticmethod
    def _to_ambient(points: np.ndarray, frame: Optional[Subspace]) -> np.ndarray:
        return points if frame is None else points @ frame.matrix().T

    def _seed_points(self, generator: HullGenerator) -> np.ndarray:
        shape = generator.shape
        if isinstance(shape, SymmetricBody):
            local = np.asarray(shape.vertices, dtype=float)
        else:
            eigenvalues, vectors = np.linalg.eigh(shape.matrix())
            inverse_root = vectors @ np.diag(1.0 / np.sqrt(eigenvalues)) @ vectors.T
            local = _boundary_directions(shape.dim) @ inverse_root.T
        return self._to_ambient(local, generator.frame)

    def _worst_ratio(self, ellipsoid: Ellipsoid, generators: List[HullGenerator]) -> float:
        worst = 0.0
        for generator in generators:
            check = self.geometry.contains(ellipsoid, generator.shape, tol=np.inf, frame=generator.frame)
            worst = max(worst, check.max_ratio)
        return worst

    def hull_solution(
        self, generators: Sequence[GeneratorLike], cfg: Optional[MveeConfig] = None
    ) -> Tuple[MveeSolution, int]:
        """Löwner ellipsoid of co(∪ generators) by cutting planes; returns the solution and the round count."""
        cfg = self._config(cfg)
        if not generators:
            raise DegenerateBodyError("loewner_hull needs at least one generator")
        hull = [self._as_generator(g) for g in generators]
        ambient = {g.ambient_dim for g in hull}
        if len(ambient) != 1:
            raise DimensionError(f"generators live in different dimensions: {sorted(ambient)}")

        points = np.vstack([self._seed_points(g) for g in hull])
        ellipsoids = [g for g in hull if isinstance(g.shape, Ellipsoid)]
        solution = self.solve_points(points, cfg)
        rounds = 0
        while rounds < cfg.max_rounds:
            cuts = []
            for generator in ellipsoids:
                check = self.geometry.contains(
                    solution.ellipsoid, generator.shape, tol=cfg.oracle_tol, frame=generator.frame
                )
                if not check.contained:
                    cuts.append(np.asarray(check.witness))
            if not cuts:
                return solution, rounds
            cuts = np.asarray(cuts)
            points = np.vstack([points, cuts, -cuts])
            solution = self.solve_points(points, cfg)
            rounds += 1

        # rescale so the returned ellipsoid certainly encloses every generator
        ratio = self._worst_ratio(solution.ellipsoid, hull)
        logger.warning(f"cutting-plane loop hit {cfg.max_rounds} rounds; rescaling by {ratio:.6g}")
        scaled = Ellipsoid.from_matrix(solution.ellipsoid.matrix() / max(1.0, ratio))
        return solution.model_copy(update={"ellipsoid": scaled}), rounds

    def loewner_hull(self, generators: Sequence[GeneratorLike], cfg: Optional[MveeConfig] = None) -> Ellipsoid:
        return self.hull_solution(generators, cfg)[0].ellipsoid

    # ----------------------------------------------------------- certificates

    def john_check(
        self,
        body: SymmetricBody,
        ellipsoid: Ellipsoid,
        cfg: Optional[MveeConfig] = None,
        loewner: bool = True,
    ) -> LoewnerCertificate:
        """
        Identity-map distortion between a body and an enclosing ellipsoid.

        Args:
            body: polytope unit ball
            ellipsoid: ellipsoid claimed to contain the body
            cfg: tolerances
            loewner: whether `ellipsoid` is the computed Löwner ellipsoid (John bound applies)

        Returns:
            LoewnerCertificate with α·β and the John bound √dim
        """
        cfg = self._config(cfg)
        if body.dim != ellipsoid.dim:
            raise DimensionError(f"body has dimension {body.dim}, ellipsoid {ellipsoid.dim}")
        containment = self.geometry.contains(ellipsoid, body, tol=cfg.oracle_tol)
        if not containment.contained:
            raise NotEnclosingError(
                "ellipsoid does not contain the body",
                max_ratio=containment.max_ratio,
                witness=containment.witness,
            )
        q = ellipsoid.matrix()
        upper = float(np.sqrt(containment.max_ratio))
        facets = self.geometry.facets(body)
        lower = float(np.sqrt(np.max(np.einsum("ij,jk,ik->i", facets, np.linalg.inv(q), facets))))
        distortion = max(1.0, lower * upper)
        john_bound = float(np.sqrt(body.dim))
        within = distortion <= john_bound * (1.0 + cfg.epsilon) + 1e-9
        if loewner and not within:
            logger.warning(f"distortion {distortion:.9f} exceeds the John bound {john_bound:.9f}")
        return LoewnerCertificate(
            ellipsoid=ellipsoid,
            distortion=distortion,
            john_bound=john_bound,
            lower_scale=lower,
            upper_scale=upper,
            within_john_bound=within,
        )

    def certify(self, body: SymmetricBody, cfg: Optional[MveeConfig] = None) -> LoewnerCertificate:
        """Löwner ellipsoid of a body together with its John certificate."""
        cfg = self._config(cfg)
        solution = self.solve_points(body.vertices, cfg)
        certificate = self.john_check(body, solution.ellipsoid, cfg)
        if not certificate.within_john_bound:
            raise InternalError(
                "Löwner ellipsoid violates the John bound",
                distortion=certificate.distortion,
                john_bound=certificate.john_bound,
            )
        return certificate.model_copy(
            update={"iterations": solution.iterations, "achieved_gap": solution.achieved_gap}
        )

    def slice_constant(self, body: SymmetricBody, subspace: Subspace, reference: Ellipsoid) -> float:
        """
        Smallest C with body ⊆ C·co((body ∩ S) ∪ (body ∩ S⊥)), S⊥ taken for `reference`.

        Args:
            body: polytope unit ball
            subspace: non-zero slice direction S
            reference: inner product defining S⊥

        Returns:
            C_S ≥ 1
        """
        if subspace.is_empty:
            raise DimensionError("slice constant needs a non-zero subspace")
        if subspace.rank == body.dim:
            return 1.0
        slice_body = self.geometry.intersect_subspace(body, subspace)
        complement = self.geometry.orthogonal_complement(subspace, reference)
        complement_body = self.geometry.intersect_subspace(body, complement)
        hull = np.vstack(
            [
                self.geometry.embed(subspace, np.asarray(slice_body.vertices)),
                self.geometry.embed(complement, np.asarray(complement_body.vertices)),
            ]
        )
        return max(self.geometry.point_gauge(hull, v) for v in self.geometry.vertices(body))
