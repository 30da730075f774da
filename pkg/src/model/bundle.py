from typing import Dict, List, Optional

import networkx as nx
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from src.model.geometry import Subspace, SymmetricBody, Vector


class Edge(BaseModel):
    model_config = ConfigDict(frozen=True)

    a: str
    b: str
    length: float = Field(default=1.0, gt=0)


class BaseGraph(BaseModel):
    """Finite connected metric graph standing in for the base space."""

    model_config = ConfigDict(frozen=True)

    vertices: List[str] = Field(min_length=1)
    edges: List[Edge] = Field(default_factory=list)

    @field_validator("vertices")
    @classmethod
    def _canonical_order(cls, vertices: List[str]) -> List[str]:
        if len(set(vertices)) != len(vertices):
            raise ValueError("vertex ids must be unique")
        return sorted(vertices)

    @model_validator(mode="after")
    def _check_graph(self) -> "BaseGraph":
        known = set(self.vertices)
        seen = set()
        for edge in self.edges:
            if edge.a not in known or edge.b not in known:
                raise ValueError(f"edge ({edge.a}, {edge.b}) uses an unknown vertex")
            if edge.a == edge.b:
                raise ValueError(f"self-loop at {edge.a}")
            key = frozenset((edge.a, edge.b))
            if key in seen:
                raise ValueError(f"duplicate edge ({edge.a}, {edge.b})")
            seen.add(key)
        if not nx.is_connected(self.to_networkx()):
            raise ValueError("base graph must be connected")
        return self

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.vertices)
        for edge in self.edges:
            graph.add_edge(edge.a, edge.b, length=edge.length)
        return graph

    def closed_star(self, vertex: str) -> List[str]:
        graph = self.to_networkx()
        return sorted([vertex, *graph.neighbors(vertex)])


class Section(BaseModel):
    model_config = ConfigDict(frozen=True)

    id: str
    values: Dict[str, Vector]


class Bundle(BaseModel):
    """Discrete Banach bundle: fibers are spans of section values at each vertex.

    `fiber_basis[x]` holds an (ambient) basis of the fiber E_x and `fiber_ball[x]`
    the unit ball of ‖·‖_x in the coordinates of that basis. Rank-0 fibers have an
    empty basis and no ball.
    """

    model_config = ConfigDict(frozen=True)

    ambient_dim: int = Field(ge=1)
    base: BaseGraph
    sections: List[Section] = Field(default_factory=list)
    fiber_basis: Dict[str, Subspace]
    fiber_ball: Dict[str, Optional[SymmetricBody]]
    augmented: bool = False

    @model_validator(mode="after")
    def _check_shape(self) -> "Bundle":
        vertices = set(self.base.vertices)
        if set(self.fiber_basis) != vertices or set(self.fiber_ball) != vertices:
            raise ValueError("fiber data must be given for every base vertex")
        for section in self.sections:
            if set(section.values) != vertices:
                raise ValueError(f"section {section.id} must have a value at every vertex")
            for vertex, value in section.values.items():
                if len(value) != self.ambient_dim:
                    raise ValueError(f"section {section.id} at {vertex} has wrong length")
        return self

    def fiber_dim(self, vertex: str) -> int:
        return self.fiber_basis[vertex].rank

    def dims(self) -> Dict[str, int]:
        return {x: self.fiber_dim(x) for x in self.base.vertices}


class Stratification(BaseModel):
    strata: List[List[str]]
    depth: Dict[str, int]

    @property
    def height(self) -> int:
        """Index K of the last stratum."""
        return len(self.strata) - 1


class Slice(BaseModel):
    """Span of a subset of section values inside a fiber, in fiber coordinates."""

    sections: List[int]
    subspace: Subspace


class BundleDiagnostics(BaseModel):
    valid: bool
    dims: Dict[str, int]
    warnings: List[str] = Field(default_factory=list)
    edge_variation: Dict[str, float] = Field(default_factory=dict)


class NormProfile(BaseModel):
    values: Dict[str, float]
    sup: float
