"""
Tests for the Löwner ellipsoid solver and its certificates
"""
import numpy as np
import pytest

from src.model.geometry import Ellipsoid, HullGenerator, MveeConfig, MveeSolution, Subspace, SymmetricBody
from src.utils.errors import ConvergenceError, DegenerateBodyError, DimensionError, NotEnclosingError

DIAGONAL = 1.0 / np.sqrt(2.0)


class TestPointSolver:
    """Tests for solve_points / mvee_points"""

    def test_cube_is_a_ball(self, loewner, cube):
        """Test that the Löwner ellipsoid of the cube is the ball of radius sqrt 3"""
        gram = loewner.mvee_points(cube.vertices).matrix()

        assert np.max(np.abs(gram - np.eye(3) / 3.0)) <= 1e-5

    def test_square(self, loewner, square):
        """Test the circumscribed disc of the square"""
        gram = loewner.mvee_points(square.vertices).matrix()

        assert np.max(np.abs(gram - np.eye(2) / 2.0)) <= 1e-5

    def test_segment(self, loewner):
        """Test the one-dimensional case"""
        solution = loewner.solve_points([[2.0], [-2.0], [0.5], [-0.5]])

        assert solution.ellipsoid.gram == [[0.25]]
        assert solution.iterations == 0

    def test_encloses_every_point(self, loewner):
        """Test that the returned ellipsoid contains all input points"""
        rng = np.random.default_rng(11)
        half = rng.standard_normal((9, 3))
        points = np.vstack([half, -half])
        q = loewner.mvee_points(points).matrix()

        assert np.max(np.einsum("ij,jk,ik->i", points, q, points)) <= 1.0 + 1e-9

    def test_flat_points(self, loewner):
        """Test rejection of points that do not span"""
        with pytest.raises(DegenerateBodyError):
            loewner.solve_points([[1.0, 1.0], [-1.0, -1.0]])

    def test_iteration_limit(self, loewner):
        """Test that running out of iterations reports the best iterate"""
        points = [[1.0, 0.0], [0.3, 1.0], [0.9, 0.5], [-1.0, 0.0], [-0.3, -1.0], [-0.9, -0.5]]
        cfg = MveeConfig(epsilon=1e-8, oracle_tol=1e-9, max_iter=1)

        with pytest.raises(ConvergenceError) as excinfo:
            loewner.solve_points(points, cfg)

        assert excinfo.value.exit_code == 3
        assert isinstance(excinfo.value.best, MveeSolution)
        assert excinfo.value.best.achieved_gap > 1e-8


class TestDiagonalSlice:
    """Tests for the diagonal slice of the cube"""

    def test_slice_ellipse(self, geometry, loewner, cube):
        """Test semi-axes (2, sqrt 2) and eccentricity 1/sqrt 2"""
        plane = Subspace(ambient_dim=3, basis=[[DIAGONAL, DIAGONAL, 0.0], [0.0, 0.0, 1.0]])
        slice_body = geometry.intersect_subspace(cube, plane)
        metrics = geometry.ellipse_metrics(loewner.mvee_points(slice_body.vertices))

        assert metrics.semi_axes == pytest.approx([2.0, np.sqrt(2.0)], abs=1e-5)
        assert metrics.eccentricity == pytest.approx(DIAGONAL, abs=1e-6)

    def test_slice_ellipse_leaves_circumscribed_ball(self, geometry, loewner, cube):
        """Test that the slice ellipse is not inside the Löwner ball of the cube"""
        plane = Subspace(ambient_dim=3, basis=[[DIAGONAL, DIAGONAL, 0.0], [0.0, 0.0, 1.0]])
        ellipse = loewner.mvee_points(geometry.intersect_subspace(cube, plane).vertices)
        ball = loewner.mvee_points(cube.vertices)

        result = geometry.contains(ball, ellipse, frame=plane)

        assert not result.contained
        assert np.linalg.norm(result.witness) >= 2.0 - 1e-6


class TestCertificates:
    """Tests for john_check / certify"""

    def test_cube_certificate(self, loewner, cube):
        """Test that the cube attains the John bound sqrt 3"""
        certificate = loewner.certify(cube)

        assert certificate.distortion == pytest.approx(np.sqrt(3.0), rel=1e-6)
        assert certificate.john_bound == pytest.approx(np.sqrt(3.0))
        assert certificate.within_john_bound

    def test_scaled_ellipsoid(self, loewner, square):
        """Test that distortion does not depend on the scale of the enclosing ellipsoid"""
        certificate = loewner.john_check(square, Ellipsoid(gram=[[0.25, 0.0], [0.0, 0.25]]), loewner=False)

        assert certificate.distortion == pytest.approx(np.sqrt(2.0))
        assert certificate.upper_scale == pytest.approx(np.sqrt(0.5))
        assert certificate.lower_scale == pytest.approx(2.0)

    def test_not_enclosing(self, loewner, square):
        """Test rejection of an ellipsoid missing the corners"""
        with pytest.raises(NotEnclosingError) as excinfo:
            loewner.john_check(square, Ellipsoid(gram=[[1.0, 0.0], [0.0, 1.0]]))

        assert excinfo.value.details["max_ratio"] == pytest.approx(2.0)

    def test_dimension_mismatch(self, loewner, square):
        """Test body and ellipsoid dimensions"""
        with pytest.raises(DimensionError):
            loewner.john_check(square, Ellipsoid(gram=np.eye(3).tolist()))

    @pytest.mark.slow
    @pytest.mark.parametrize("dim", [2, 3, 4, 5])
    def test_john_bound_on_random_polytopes(self, geometry, loewner, dim):
        """Test distortion <= sqrt(dim) on seeded random symmetric polytopes"""
        rng = np.random.default_rng(dim)
        cfg = MveeConfig(epsilon=1e-4, max_iter=200000)
        worst = 0.0
        for _ in range(200):
            half = rng.standard_normal((dim + 3, dim))
            body = geometry.convex_hull_points(np.vstack([half, -half]))
            certificate = loewner.certify(body, cfg)
            worst = max(worst, certificate.distortion)

        assert worst <= np.sqrt(dim) + 1e-3


class TestHull:
    """Tests for loewner_hull"""

    def test_hull_of_orthogonal_segments(self, loewner):
        """Test that a segment ellipse and a segment body on the axes give the unit disc"""
        generators = [
            HullGenerator(shape=Ellipsoid(gram=[[1.0]]), frame=Subspace(ambient_dim=2, basis=[[1.0, 0.0]])),
            HullGenerator(
                shape=SymmetricBody(dim=1, vertices=[[1.0], [-1.0]]),
                frame=Subspace(ambient_dim=2, basis=[[0.0, 1.0]]),
            ),
        ]
        gram = loewner.loewner_hull(generators).matrix()

        assert np.max(np.abs(gram - np.eye(2))) <= 1e-6

    def test_hull_of_single_ellipsoid(self, loewner):
        """Test that the hull of one ellipsoid is itself"""
        ellipse = Ellipsoid(gram=[[1.0, 0.0], [0.0, 4.0]])
        gram = loewner.loewner_hull([ellipse]).matrix()

        assert np.max(np.abs(gram - ellipse.matrix())) <= 1e-5

    def test_hull_contains_generators(self, geometry, loewner, square):
        """Test containment of a tall ellipse and the square"""
        tall = Ellipsoid(gram=[[4.0, 0.0], [0.0, 0.25]])
        hull = loewner.loewner_hull([tall, square], MveeConfig(max_iter=20000))

        assert geometry.contains(hull, tall, tol=1e-6).contained
        assert geometry.contains(hull, square, tol=1e-6).contained

    def test_hull_of_long_segment_and_disc(self, geometry, loewner):
        """Test that the segment of radius 2 on e1 and the unit disc give semi-axes (2, 1)"""
        segment = HullGenerator(
            shape=SymmetricBody(dim=1, vertices=[[2.0], [-2.0]]),
            frame=Subspace(ambient_dim=2, basis=[[1.0, 0.0]]),
        )
        disc = Ellipsoid(gram=[[1.0, 0.0], [0.0, 1.0]])
        hull = loewner.loewner_hull([segment, disc])

        assert np.max(np.abs(hull.matrix() - np.diag([0.25, 1.0]))) <= 1e-4
        assert geometry.contains(hull, disc, tol=1e-6).contained
        assert geometry.contains(hull, segment.shape, tol=1e-6, frame=segment.frame).contained

    def test_mixed_dimensions(self, loewner, square, cube):
        """Test rejection of generators in different ambient spaces"""
        with pytest.raises(DimensionError):
            loewner.loewner_hull([square, cube])


class TestSliceConstant:
    """Tests for slice_constant"""

    def test_square_axis(self, loewner, square):
        """Test that the square is twice the l1 ball spanned by its axis slices"""
        reference = Ellipsoid(gram=[[0.5, 0.0], [0.0, 0.5]])
        constant = loewner.slice_constant(square, Subspace(ambient_dim=2, basis=[[1.0, 0.0]]), reference)

        assert constant == pytest.approx(2.0)

    def test_full_subspace(self, loewner, square):
        """Test that the whole fiber has constant 1"""
        reference = Ellipsoid(gram=[[0.5, 0.0], [0.0, 0.5]])
        full = Subspace(ambient_dim=2, basis=[[1.0, 0.0], [0.0, 1.0]])

        assert loewner.slice_constant(square, full, reference) == 1.0


class TestInvariance:
    """Tests for volume monotonicity and linear equivariance of mvee_points"""

    @staticmethod
    def symmetric_cloud(rng, pairs, dim):
        half = rng.standard_normal((pairs, dim))
        return np.vstack([half, -half])

    @pytest.mark.parametrize("dim", [2, 3, 4])
    def test_volume_monotone_on_nested_sets(self, loewner, dim):
        """Test vol(mvee(A)) <= vol(mvee(B)) (1 + eps)^dim for A inside B"""
        rng = np.random.default_rng(10 + dim)
        cfg = MveeConfig(max_iter=200000)
        for _ in range(20):
            small = self.symmetric_cloud(rng, dim + 2, dim)
            large = np.vstack([small, self.symmetric_cloud(rng, 3, dim)])
            inner = loewner.mvee_points(small, cfg).matrix()
            outer = loewner.mvee_points(large, cfg).matrix()

            volume_small = np.linalg.det(inner) ** -0.5
            volume_large = np.linalg.det(outer) ** -0.5
            assert volume_small <= volume_large * (1.0 + cfg.epsilon) ** dim

    @pytest.mark.parametrize("dim", [2, 3])
    def test_linear_equivariance(self, loewner, dim):
        """Test that mvee(T points) has Gram T^-T Q T^-1"""
        rng = np.random.default_rng(20 + dim)
        cfg = MveeConfig(epsilon=1e-10, oracle_tol=1e-10, max_iter=10**6)
        for _ in range(10):
            points = self.symmetric_cloud(rng, dim + 3, dim)
            transform = np.eye(dim) + 0.5 * rng.standard_normal((dim, dim))
            while abs(np.linalg.det(transform)) < 0.1:
                transform = np.eye(dim) + 0.5 * rng.standard_normal((dim, dim))
            inverse = np.linalg.inv(transform)

            gram = loewner.mvee_points(points, cfg).matrix()
            moved = loewner.mvee_points(points @ transform.T, cfg).matrix()
            expected = inverse.T @ gram @ inverse

            assert np.linalg.norm(moved - expected) <= 1e-4 * np.linalg.norm(expected)
