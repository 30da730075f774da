"""
Pytest fixtures for testing
"""
import os

os.environ.setdefault("HILBUND_LOG_DIR", "")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from src.model.bundle import Section  # noqa: E402
from src.model.geometry import SymmetricBody  # noqa: E402
from src.model.hyperspace import (  # noqa: E402
    ConvexSelection,
    FiniteMetricSpace,
    SelectionValue,
    SubsetPoint,
    subset_key,
)
from src.repository.json_repository import JsonRepository  # noqa: E402
from src.service.bundle_service import BundleService  # noqa: E402
from src.service.geometry_service import GeometryService  # noqa: E402
from src.service.hyperspace_service import HyperspaceService  # noqa: E402
from src.service.loewner_service import LoewnerService  # noqa: E402
from src.service.renorming_service import RenormingService  # noqa: E402
from src.service.seminorm_service import SeminormService  # noqa: E402
from src.utils.settings import Settings  # noqa: E402

DYADIC_POSITIONS = [0.0] + [2.0**-k for k in range(7, 0, -1)] + [1.0]


@pytest.fixture
def settings():
    """Default run settings"""
    return Settings()


@pytest.fixture
def geometry(settings):
    return GeometryService(settings)


@pytest.fixture
def loewner(geometry, settings):
    return LoewnerService(geometry, settings)


@pytest.fixture
def seminorms(geometry, settings):
    return SeminormService(geometry, settings)


@pytest.fixture
def bundles(geometry, settings):
    return BundleService(geometry, settings)


@pytest.fixture
def renorming(geometry, loewner, seminorms, bundles, settings):
    """Renorming service wired to the other services"""
    return RenormingService(geometry, loewner, seminorms, bundles, settings)


@pytest.fixture
def hyperspace(settings):
    return HyperspaceService(settings)


@pytest.fixture
def json_repo():
    return JsonRepository()


# ------------------------------------------------------------------ bodies


@pytest.fixture
def square():
    """Unit ball of the max norm in the plane"""
    return SymmetricBody(dim=2, vertices=[[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]])


@pytest.fixture
def cube():
    """[-1, 1]^3"""
    signs = [-1.0, 1.0]
    return SymmetricBody(dim=3, vertices=[[a, b, c] for a in signs for b in signs for c in signs])


@pytest.fixture
def cross_polytope():
    """Unit ball of the l1 norm in the plane"""
    return SymmetricBody(dim=2, vertices=[[-1.0, 0.0], [0.0, -1.0], [0.0, 1.0], [1.0, 0.0]])


# ----------------------------------------------------------------- bundles


def dims_122_bundle(bundles: BundleService, square: SymmetricBody, ids, positions):
    """s1 = e1 and s2 = t·e2 over a path; the fiber drops to rank 1 where t = 0."""
    base = bundles.path_base(ids, positions)
    sections = [
        Section(id="s1", values={x: [1.0, 0.0] for x in ids}),
        Section(id="s2", values={x: [0.0, t] for x, t in zip(ids, positions)}),
    ]
    return bundles.from_ambient_ball(2, base, sections, square)


@pytest.fixture
def path_bundle(bundles, square):
    """Dims (1, 2, 2) on the path x0 - x1 - x2"""
    return dims_122_bundle(bundles, square, ["x0", "x1", "x2"], [0.0, 0.5, 1.0])


@pytest.fixture
def dyadic_bundle(bundles, square):
    """Dims (1, 2, ..., 2) on t0 - ... - t8 with t in {0, 2^-7, ..., 2^-1, 1}"""
    ids = [f"t{i}" for i in range(len(DYADIC_POSITIONS))]
    return dims_122_bundle(bundles, square, ids, DYADIC_POSITIONS)


@pytest.fixture
def constant_square_bundle(bundles, square):
    """Trivial bundle with the square norm on every fiber"""
    ids = ["a", "b", "c"]
    sections = [
        Section(id="e1", values={x: [1.0, 0.0] for x in ids}),
        Section(id="e2", values={x: [0.0, 1.0] for x in ids}),
    ]
    return bundles.from_ambient_ball(2, bundles.path_base(ids), sections, square)


# --------------------------------------------------------------- hyperspace


def line_space(positions) -> FiniteMetricSpace:
    """Points p0, p1, ... on the real line at the given positions."""
    points = [f"p{i}" for i in range(len(positions))]
    dist = [[abs(a - b) for b in positions] for a in positions]
    return FiniteMetricSpace(points=points, dist=dist)


@pytest.fixture
def three_points():
    """a, b, c at 0, 1, 3"""
    return FiniteMetricSpace(
        points=["a", "b", "c"],
        dist=[[0.0, 1.0, 3.0], [1.0, 0.0, 2.0], [3.0, 2.0, 0.0]],
    )


@pytest.fixture
def shrinking_points():
    """x0 at 0, xm at 2^-m for m = 1..8 and a far point y at 1.5, on the line"""
    points = {"x0": [0.0], "y": [1.5]}
    points.update({f"x{m}": [2.0**-m] for m in range(1, 9)})
    return points


def all_subsets(points, n):
    ids = sorted(points)
    space = FiniteMetricSpace(
        points=ids,
        dist=[[float(np.linalg.norm(np.subtract(points[a], points[b]))) for b in ids] for a in ids],
    )
    return HyperspaceService.subsets(space, n)


@pytest.fixture
def midrange_selection(hyperspace, shrinking_points):
    """Midpoint of the extreme members along the line; continuous on the hyperspace"""
    return hyperspace.build_selection(shrinking_points, all_subsets(shrinking_points, 3), 3, "midrange", [1.0])


@pytest.fixture
def counterexample_selection(shrinking_points):
    """Barycenters, except that every pair containing x0 is sent to x0"""
    phi = {}
    for subset in all_subsets(shrinking_points, 3):
        members = subset.members
        if len(members) == 2 and "x0" in members:
            coeffs = {m: (1.0 if m == "x0" else 0.0) for m in members}
        else:
            coeffs = {m: 1.0 / len(members) for m in members}
        point = np.asarray([coeffs[m] for m in members]) @ np.asarray([shrinking_points[m] for m in members])
        phi[subset.key] = SelectionValue(point=point.tolist(), coeffs=coeffs)
    return ConvexSelection(ambient_dim=1, n=3, points=shrinking_points, phi=phi)


@pytest.fixture
def random_selection():
    """Factory for certified selections with Dirichlet coefficients on random planar points"""

    def build(rng: np.random.Generator, size: int = 6, n: int = 4, count: int = 8) -> ConvexSelection:
        ids = [f"q{i}" for i in range(size)]
        points = {p: rng.uniform(-1.0, 1.0, 2).tolist() for p in ids}
        phi = {}
        for _ in range(count):
            k = int(rng.integers(2, n + 1))
            members = sorted(rng.choice(ids, size=k, replace=False).tolist())
            coeffs = rng.dirichlet(np.ones(k))
            coeffs = coeffs / coeffs.sum()
            point = coeffs @ np.asarray([points[m] for m in members])
            phi[subset_key(members)] = SelectionValue(
                point=point.tolist(), coeffs=dict(zip(members, coeffs.tolist()))
            )
        return ConvexSelection(ambient_dim=2, n=n, points=points, phi=phi)

    return build


@pytest.fixture
def subset():
    """Shorthand for SubsetPoint construction"""
    return lambda *members: SubsetPoint(members=list(members))
