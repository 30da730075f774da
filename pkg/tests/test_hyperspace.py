"""
Tests for hyperspaces, anchored covers and convex selections
"""
import numpy as np
import pytest

from src.model.hyperspace import AnchoredCover, FiniteMetricSpace, SelectionNet, SubsetPoint
from src.utils.errors import AnchorError, CertificateError, EnumerationCapError, NetError, ValidationError

from tests.conftest import line_space


class TestHyperspace:
    """Tests for Z_[n] and the incidence space"""

    def test_hausdorff(self, hyperspace, three_points):
        """Test the Hausdorff distance on the line"""
        assert hyperspace.hausdorff(three_points, ["a"], ["b", "c"]) == pytest.approx(3.0)
        assert hyperspace.hausdorff(three_points, ["a", "c"], ["b", "c"]) == pytest.approx(1.0)
        assert hyperspace.hausdorff(three_points, ["b"], ["b"]) == 0.0

    def test_subsets(self, hyperspace, three_points):
        """Test enumeration order: by size, then lexicographic"""
        keys = [s.key for s in hyperspace.subsets(three_points, 2)]

        assert keys == ["{a}", "{b}", "{c}", "{a,b}", "{a,c}", "{b,c}"]

    def test_build_hyperspace(self, hyperspace, three_points):
        """Test the hyperspace metric space"""
        result = hyperspace.build_hyperspace(three_points, 3)

        assert len(result.subsets) == 7
        assert result.space.distance("{a}", "{a,b,c}") == pytest.approx(3.0)
        assert result.space.distance("{a}", "{b}") == pytest.approx(1.0)

    def test_singletons_embed_isometrically(self, hyperspace, three_points):
        """Test that x -> {x} preserves distances"""
        result = hyperspace.build_hyperspace(three_points, 2)

        for a in three_points.points:
            for b in three_points.points:
                assert result.space.distance(f"{{{a}}}", f"{{{b}}}") == pytest.approx(three_points.distance(a, b))

    @pytest.mark.parametrize("size", [2, 3, 4, 5, 6])
    def test_hausdorff_is_a_metric(self, hyperspace, size):
        """Test the metric axioms of the Hausdorff distance over every triple of subsets"""
        rng = np.random.default_rng(size)
        cells = rng.choice(100, size=size, replace=False)
        grid = np.column_stack([cells // 10, cells % 10]).astype(float)
        space = FiniteMetricSpace(
            points=[f"z{i}" for i in range(size)],
            dist=np.abs(grid[:, None, :] - grid[None, :, :]).sum(axis=2).tolist(),
        )
        subsets = hyperspace.subsets(space, size)
        d = np.array([[hyperspace.hausdorff(space, a.members, b.members) for b in subsets] for a in subsets])

        assert len(subsets) == 2**size - 1
        assert np.array_equal(d, d.T)
        assert np.all(d[~np.eye(len(subsets), dtype=bool)] > 0)
        assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-12)

    def test_incidence(self, hyperspace, three_points):
        """Test the incidence space and its projection"""
        incidence = hyperspace.build_incidence(three_points, 2)

        assert len(incidence.space.points) == 9
        assert incidence.fiber_sizes["{a,b}"] == 2
        assert incidence.projection["(a,{a,b})"] == "{a,b}"
        assert incidence.pairs["(b,{a,b})"] == ["b", "{a,b}"]
        assert incidence.space.distance("(a,{a,b})", "(b,{a,b})") == pytest.approx(1.0)


class TestCovers:
    """Tests for the map / cover correspondence"""

    def test_roundtrip_single_map(self, hyperspace, three_points, subset):
        """Test that a map survives the trip through its pullback cover"""
        g = {"x": subset("a", "b"), "y": subset("c")}
        cover = hyperspace.map_to_cover(g, three_points, 2)

        assert sorted(cover.total.points) == ["(x,(a,{a,b}))", "(x,(b,{a,b}))", "(y,(c,{c}))"]
        assert cover.fiber("x") == ["(x,(a,{a,b}))", "(x,(b,{a,b}))"]
        assert hyperspace.cover_to_map(cover, three_points, 2) == g

    def test_map_outside_hyperspace(self, hyperspace, three_points, subset):
        """Test rejection of values larger than n"""
        with pytest.raises(ValidationError):
            hyperspace.map_to_cover({"x": subset("a", "b", "c")}, three_points, 2)

    def test_anchor_collision(self, hyperspace, three_points):
        """Test that an anchor repeating on a fiber is reported with the pair"""
        base = FiniteMetricSpace(points=["x"], dist=[[0.0]])
        total = FiniteMetricSpace(points=["y1", "y2"], dist=[[0.0, 1.0], [1.0, 0.0]])
        cover = AnchoredCover(
            total=total, base=base, proj={"y1": "x", "y2": "x"}, anchor={"y1": "a", "y2": "a"}
        )

        with pytest.raises(AnchorError) as excinfo:
            hyperspace.cover_to_map(cover, three_points, 2)

        assert excinfo.value.details["pair"] == ["y1", "y2"]

    def test_anchor_outside_space(self, hyperspace, three_points):
        """Test that anchors must land in Z"""
        base = FiniteMetricSpace(points=["x"], dist=[[0.0]])
        total = FiniteMetricSpace(points=["y"], dist=[[0.0]])
        cover = AnchoredCover(total=total, base=base, proj={"y": "x"}, anchor={"y": "q"})

        with pytest.raises(AnchorError):
            hyperspace.cover_to_map(cover, three_points, 2)

    @pytest.mark.parametrize("x_size", [1, 2, 3])
    @pytest.mark.parametrize("z_size", [1, 2, 3, 4])
    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_roundtrip_check(self, hyperspace, x_size, z_size, n):
        """Test equal counts and exact round trips on small spaces"""
        base = line_space([float(i) for i in range(x_size)])
        space = line_space([0.0, 1.0, 3.0, 7.0][:z_size])

        report = hyperspace.roundtrip_check(base, space, n)

        assert report.passed
        assert report.maps_roundtrip
        assert report.covers_roundtrip
        assert report.map_count == report.cover_class_count

    def test_enumeration_cap(self, hyperspace):
        """Test that the cap is checked before enumerating"""
        with pytest.raises(EnumerationCapError):
            hyperspace.roundtrip_check(line_space([0.0, 1.0, 2.0]), line_space([0.0, 1.0, 2.0, 3.0]), 3, cap=100)


class TestSlicing:
    """Tests for slice_selection"""

    def test_barycenter_slice(self, hyperspace, subset):
        """Test f and the sliced point on a barycentric selection"""
        points = {"a": [0.0, 0.0], "b": [2.0, 0.0], "c": [0.0, 3.0]}
        selection = hyperspace.build_selection(points, [subset("a", "b", "c")], 3)

        result = hyperspace.slice_selection(selection, "c", subset("a", "b"))

        assert result.f_x == pytest.approx(1.0 / 3.0)
        assert result.phi_x == pytest.approx([1.0, 0.0])
        assert result.coeffs == pytest.approx({"a": 0.5, "b": 0.5})
        assert result.residual <= 1e-12

    def test_point_already_in_subset(self, hyperspace, subset):
        """Test rejection of x in A"""
        selection = hyperspace.build_selection({"a": [0.0], "b": [1.0]}, [subset("a", "b")], 2)

        with pytest.raises(ValidationError):
            hyperspace.slice_selection(selection, "a", subset("a", "b"))

    def test_missing_certificate(self, hyperspace, subset):
        """Test that the union must carry a certified value"""
        selection = hyperspace.build_selection({"a": [0.0], "b": [1.0], "c": [2.0]}, [subset("a", "b")], 2)

        with pytest.raises(CertificateError):
            hyperspace.slice_selection(selection, "c", subset("a"))

    def test_full_weight_on_x(self, hyperspace, subset):
        """Test the f = 1 case where the sliced point is arbitrary"""
        selection = hyperspace.build_selection(
            {"a": [0.0], "b": [1.0]}, [subset("a", "b")], 2, "midrange", [1.0]
        )
        selection.phi["{a,b}"].coeffs.update({"a": 0.0, "b": 1.0})
        selection.phi["{a,b}"].point[0] = 1.0

        result = hyperspace.slice_selection(selection, "b", subset("a"))

        assert result.f_x == 1.0
        assert result.residual <= 1e-12

    @pytest.mark.slow
    def test_reconstruction_on_random_selections(self, hyperspace, random_selection):
        """Test phi(A + x) = f x + (1 - f) phi^x(A) on seeded random selections"""
        rng = np.random.default_rng(8)
        checked = 0
        while checked < 10**3:
            selection = random_selection(rng)
            for key, value in selection.phi.items():
                members = sorted(value.coeffs)
                x = members[int(rng.integers(len(members)))]
                rest = SubsetPoint(members=[m for m in members if m != x])
                result = hyperspace.slice_selection(selection, x, rest)

                assert result.residual <= 1e-12
                assert sum(result.coeffs.values()) == pytest.approx(1.0)
                checked += 1


class TestSingletonContinuity:
    """Tests for check_singleton_continuity"""

    @pytest.fixture
    def shrinking_net(self):
        return SelectionNet(x0="x0", terms=[["x0", f"x{m}"] for m in range(1, 9)])

    def test_gaps_bounded_by_radius(self, hyperspace, midrange_selection, shrinking_net):
        """Test |phi(A_m) - x0| <= Hausdorff radius of A_m"""
        report = hyperspace.check_singleton_continuity(midrange_selection, [shrinking_net])
        check = report.nets[0]

        assert check.bounded
        assert check.radii == pytest.approx([2.0**-m for m in range(1, 9)])
        assert check.gaps == pytest.approx([2.0 ** -(m + 1) for m in range(1, 9)])
        assert report.passed

    def test_bounded_on_random_nets(self, hyperspace, midrange_selection, counterexample_selection):
        """Test the radius bound on seeded nets for both selections"""
        rng = np.random.default_rng(5)
        for _ in range(100):
            start = int(rng.integers(1, 5))
            terms = [["x0", f"x{m}"] for m in range(start, 9)]
            if rng.uniform() < 0.5:
                terms = [["x0", f"x{m}", f"x{m + 1}"] for m in range(start, 8)]
            net = SelectionNet(x0="x0", terms=terms)
            for selection in (midrange_selection, counterexample_selection):
                check = hyperspace.check_singleton_continuity(selection, [net]).nets[0]
                assert check.bounded

    def test_designated_point_converges(self, hyperspace, midrange_selection):
        """Test f_y(A_m) -> f_y({x0}) for a continuous selection on seeded nets"""
        rng = np.random.default_rng(6)
        for _ in range(100):
            start = int(rng.integers(1, 5))
            net = SelectionNet(x0="x0", terms=[["x0", f"x{m}"] for m in range(start, 9)], designated="y")
            check = hyperspace.check_singleton_continuity(midrange_selection, [net]).nets[0]

            assert check.f_converged
            assert check.f_limit == pytest.approx(0.5)

    def test_counterexample_breaks_convergence(self, hyperspace, counterexample_selection, shrinking_net):
        """Test that sending pairs to x0 keeps gaps bounded but breaks f convergence"""
        net = shrinking_net.model_copy(update={"designated": "y"})
        report = hyperspace.check_singleton_continuity(counterexample_selection, [net])
        check = report.nets[0]

        assert check.bounded
        assert check.tail_gap == 0.0
        assert check.f_limit == 0.0
        assert check.f_values == pytest.approx([1.0 / 3.0] * 8)
        assert not check.f_converged
        assert not report.passed

    def test_net_must_shrink(self, hyperspace, midrange_selection):
        """Test rejection of a net that does not approach the singleton"""
        net = SelectionNet(x0="x0", terms=[["x0", "x3"], ["x0", "x1"]])

        with pytest.raises(NetError):
            hyperspace.check_singleton_continuity(midrange_selection, [net])

    def test_designated_inside_term(self, hyperspace, midrange_selection):
        """Test that the designated point may not appear in the net"""
        net = SelectionNet(x0="x0", terms=[["x0", "x1"], ["x0", "x2"]], designated="x2")

        with pytest.raises(NetError):
            hyperspace.check_singleton_continuity(midrange_selection, [net])

    def test_uncertified_term(self, hyperspace, midrange_selection):
        """Test that every term needs a certified value"""
        net = SelectionNet(x0="x0", terms=[["x0", "x1", "x2", "x3"]])

        with pytest.raises(CertificateError):
            hyperspace.check_singleton_continuity(midrange_selection, [net])
