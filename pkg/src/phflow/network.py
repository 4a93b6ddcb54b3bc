"""Directed network topology with per-edge geometry.

A network is a directed graph whose edges carry a length, an optional
diameter and a cross-sectional area. The area enters all integral
quantities as an edge weight and turns the plain +/-1 incidence signs
into +/-A weights. Boundary nodes must have exactly one adjacent edge;
all remaining nodes are interior junctions.

Instances are immutable after construction and safe to share across
threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import SchemaError

_QUARTER_PI = math.pi / 4.0


@dataclass(frozen=True)
class Edge:
    """One directed edge (pipe) of the network.

    The area defaults to the circular cross-section pi/4 * diameter**2
    when only a diameter is given. ``num_elements`` is the mesh
    resolution used for this edge; it may be left unset and resolved
    later from a global element-size cap.
    """

    id: str
    tail: str
    head: str
    length: float
    diameter: float | None = None
    area: float | None = None
    num_elements: int | None = None

    def __post_init__(self):
        if self.tail == self.head:
            raise SchemaError(f"edge {self.id!r}: self-loops are not allowed")
        if not self.length > 0:
            raise SchemaError(f"edge {self.id!r}: length must be positive")
        if self.diameter is not None and not self.diameter > 0:
            raise SchemaError(f"edge {self.id!r}: diameter must be positive")
        area = self.area
        if area is None:
            if self.diameter is None:
                area = 1.0
            else:
                area = _QUARTER_PI * self.diameter**2
            object.__setattr__(self, "area", area)
        if not self.area > 0:
            raise SchemaError(f"edge {self.id!r}: area must be positive")
        if self.num_elements is not None and self.num_elements < 1:
            raise SchemaError(f"edge {self.id!r}: num_elements must be >= 1")


@dataclass(frozen=True)
class NetworkTopology:
    """Directed graph with boundary/interior node classification.

    ``boundary_nodes`` keeps the order given in the input file; this
    order defines the port numbering of boundary efforts and flows.
    Edge and node lookups use dense indices derived from sorted ids so
    that assembly order is reproducible.
    """

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    boundary_nodes: tuple[str, ...]
    interior_nodes: tuple[str, ...] = field(init=False)

    def __post_init__(self):
        known = set(self.nodes)
        if len(known) != len(self.nodes):
            raise SchemaError("duplicate node ids")
        if len({e.id for e in self.edges}) != len(self.edges):
            raise SchemaError("duplicate edge ids")
        for e in self.edges:
            for n in (e.tail, e.head):
                if n not in known:
                    raise SchemaError(f"edge {e.id!r} references unknown node {n!r}")
        for n in self.boundary_nodes:
            if n not in known:
                raise SchemaError(f"unknown boundary node {n!r}")
        interior = tuple(n for n in self.nodes if n not in set(self.boundary_nodes))
        object.__setattr__(self, "interior_nodes", interior)
        object.__setattr__(self, "_edge_by_id", {e.id: e for e in self.edges})
        adjacency: dict[str, list[tuple[Edge, float]]] = {n: [] for n in self.nodes}
        for e in sorted(self.edges, key=lambda e: e.id):
            adjacency[e.tail].append((e, +e.area))
            adjacency[e.head].append((e, -e.area))
        object.__setattr__(self, "_adjacency", adjacency)

    # -- lookups -------------------------------------------------------

    def edge(self, edge_id: str) -> Edge:
        try:
            return self._edge_by_id[edge_id]
        except KeyError:
            raise SchemaError(f"unknown edge {edge_id!r}") from None

    def sorted_edges(self) -> list[Edge]:
        """Edges in deterministic (id-sorted) assembly order."""
        return sorted(self.edges, key=lambda e: e.id)

    def incidence(self, edge_id: str, node_id: str) -> float:
        """Signed area weight of ``edge`` at ``node``.

        Returns +A for the tail node and -A for the head node of the
        edge. Raises for nodes that are not an endpoint of the edge.
        """
        e = self.edge(edge_id)
        if node_id == e.tail:
            return +e.area
        if node_id == e.head:
            return -e.area
        raise SchemaError(f"node {node_id!r} is not an endpoint of edge {edge_id!r}")

    def adjacent_edges(self, node_id: str) -> list[tuple[Edge, float]]:
        """All edges meeting ``node`` with their signed area weights, id-sorted."""
        try:
            return list(self._adjacency[node_id])
        except KeyError:
            raise SchemaError(f"unknown node {node_id!r}") from None

    def degree(self, node_id: str) -> int:
        return len(self.adjacent_edges(node_id))

    # -- validation ----------------------------------------------------

    def validate(self) -> list[str]:
        """Check structural invariants; returns a list of violations.

        An empty list means the topology is valid. Violations are data,
        not exceptions, so callers can report all of them at once.
        """
        violations = []
        if not self.edges:
            violations.append("network has no edges")
            return violations
        for n in self.boundary_nodes:
            deg = self.degree(n)
            if deg != 1:
                violations.append(f"boundary node {n!r} has degree {deg}, expected 1")
        for n in self.interior_nodes:
            if self.degree(n) == 0:
                violations.append(f"interior node {n!r} is isolated")
        if not self._connected():
            violations.append("network is disconnected")
        return violations

    def _connected(self) -> bool:
        if not self.nodes:
            return True
        seen = {self.nodes[0]}
        stack = [self.nodes[0]]
        while stack:
            n = stack.pop()
            for e, _ in self.adjacent_edges(n):
                for other in (e.tail, e.head):
                    if other not in seen:
                        seen.add(other)
                        stack.append(other)
        return len(seen) == len(self.nodes)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        nodes = [
            {"id": n, "type": "boundary" if n in set(self.boundary_nodes) else "interior"}
            for n in self.nodes
        ]
        edges = []
        for e in self.edges:
            rec = {"id": e.id, "from": e.tail, "to": e.head, "length_m": e.length}
            if e.diameter is not None:
                rec["diameter_m"] = e.diameter
            rec["area_m2"] = e.area
            if e.num_elements is not None:
                rec["num_elements"] = e.num_elements
            edges.append(rec)
        return {"nodes": nodes, "edges": edges}


def topology_from_dict(data: dict) -> NetworkTopology:
    """Build a topology from the JSON network schema.

    Expected shape::

        {"nodes": [{"id": ..., "type": "interior"|"boundary"}, ...],
         "edges": [{"id": ..., "from": ..., "to": ..., "length_m": ...,
                    "diameter_m"?: ..., "area_m2"?: ..., "num_elements"?: ...}, ...]}
    """
    try:
        node_recs = data["nodes"]
        edge_recs = data["edges"]
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"network: missing section {exc}") from None
    nodes = []
    boundary = []
    for rec in node_recs:
        try:
            nid = rec["id"]
            ntype = rec["type"]
        except KeyError as exc:
            raise SchemaError(f"network node {rec!r}: missing field {exc}") from None
        if ntype not in ("interior", "boundary"):
            raise SchemaError(f"network node {nid!r}: unknown type {ntype!r}")
        nodes.append(nid)
        if ntype == "boundary":
            boundary.append(nid)
    edges = []
    for rec in edge_recs:
        try:
            edges.append(
                Edge(
                    id=rec["id"],
                    tail=rec["from"],
                    head=rec["to"],
                    length=float(rec["length_m"]),
                    diameter=float(rec["diameter_m"]) if "diameter_m" in rec else None,
                    area=float(rec["area_m2"]) if "area_m2" in rec else None,
                    num_elements=int(rec["num_elements"]) if "num_elements" in rec else None,
                )
            )
        except KeyError as exc:
            raise SchemaError(f"network edge {rec!r}: missing field {exc}") from None
    topo = NetworkTopology(nodes=tuple(nodes), edges=tuple(edges), boundary_nodes=tuple(boundary))
    violations = topo.validate()
    if violations:
        raise SchemaError("invalid network: " + "; ".join(violations))
    return topo
