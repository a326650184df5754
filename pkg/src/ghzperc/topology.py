"""Grid network topologies, consumer placements and four-region partitions.

The network is a width x height square grid of repeater nodes with edges
between Manhattan-distance-1 neighbours.  All types are immutable after
construction and safe for concurrent reads.
"""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .errors import InvalidDimension, PartitionInfeasible

REGIONS = ("I", "II", "III", "IV")


class NodeId(NamedTuple):
    x: int
    y: int

    def __str__(self) -> str:
        return f"{self.x}.{self.y}"


class Edge(NamedTuple):
    a: NodeId
    b: NodeId
    index: int

    @property
    def edge_id(self) -> str:
        """Canonical id ``x1.y1-x2.y2`` with the numerically smaller endpoint first."""
        return f"{self.a}-{self.b}"


def manhattan(u: NodeId, v: NodeId) -> int:
    return abs(u.x - v.x) + abs(u.y - v.y)


@dataclass(frozen=True)
class NetworkTopology:
    """Immutable square-grid graph of repeater nodes.

    Edges are indexed 0..E-1 in construction order; ``adjacency`` maps each
    node to the indices of its incident edges.
    """

    width: int
    height: int
    edges: tuple[Edge, ...]
    adjacency: dict[NodeId, tuple[int, ...]]
    _edge_index: dict[str, int] = field(repr=False, default_factory=dict)

    @property
    def node_count(self) -> int:
        return self.width * self.height

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    def nodes(self) -> Iterable[NodeId]:
        for y in range(self.height):
            for x in range(self.width):
                yield NodeId(x, y)

    def node_index(self, node: NodeId) -> int:
        return node.y * self.width + node.x

    def contains(self, node: NodeId) -> bool:
        return 0 <= node.x < self.width and 0 <= node.y < self.height

    def degree(self, node: NodeId) -> int:
        return len(self.adjacency[node])

    def edge_between(self, u: NodeId, v: NodeId) -> Edge | None:
        a, b = (u, v) if u <= v else (v, u)
        idx = self._edge_index.get(f"{a}-{b}")
        return self.edges[idx] if idx is not None else None

    def edge_by_id(self, edge_id: str) -> Edge | None:
        idx = self._edge_index.get(edge_id)
        return self.edges[idx] if idx is not None else None

    def endpoint_array(self) -> np.ndarray:
        """(E, 2) int32 array of node indices; column 0 is the canonical first endpoint."""
        out = np.empty((self.edge_count, 2), dtype=np.int32)
        for e in self.edges:
            out[e.index, 0] = self.node_index(e.a)
            out[e.index, 1] = self.node_index(e.b)
        return out


def build_square_grid(width: int, height: int) -> NetworkTopology:
    """Build a width x height grid; raises InvalidDimension below 2x2.

    Edge count is 2*w*h - w - h: interior nodes have degree 4, boundary 3,
    corners 2.
    """
    if width < 2 or height < 2:
        raise InvalidDimension(f"grid must be at least 2x2, got {width}x{height}")
    edges: list[Edge] = []
    adjacency: dict[NodeId, list[int]] = {
        NodeId(x, y): [] for y in range(height) for x in range(width)
    }
    edge_index: dict[str, int] = {}
    for y in range(height):
        for x in range(width):
            u = NodeId(x, y)
            for v in (NodeId(x + 1, y), NodeId(x, y + 1)):
                if v.x >= width or v.y >= height:
                    continue
                e = Edge(u, v, len(edges))
                edges.append(e)
                edge_index[e.edge_id] = e.index
                adjacency[u].append(e.index)
                adjacency[v].append(e.index)
    return NetworkTopology(
        width=width,
        height=height,
        edges=tuple(edges),
        adjacency={n: tuple(ix) for n, ix in adjacency.items()},
        _edge_index=edge_index,
    )


@dataclass(frozen=True)
class ConsumerPlacement:
    alice: NodeId
    bob: NodeId

    def __post_init__(self):
        if self.alice == self.bob:
            raise ValueError("alice and bob must be distinct nodes")

    @property
    def distance(self) -> int:
        return manhattan(self.alice, self.bob)


def centered_placement(topology: NetworkTopology, distance: int) -> ConsumerPlacement:
    """Same-row placement at the given Manhattan distance, centred on the grid.

    The margin to the boundary is whatever remains; raises ValueError if the
    pair does not fit.
    """
    if distance < 1 or distance > topology.width - 1:
        raise ValueError(f"distance {distance} does not fit a width-{topology.width} grid")
    row = topology.height // 2
    ax = (topology.width - 1 - distance) // 2
    return ConsumerPlacement(NodeId(ax, row), NodeId(ax + distance, row))


@dataclass(frozen=True)
class Violation:
    kind: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


@dataclass(frozen=True)
class RegionPartition:
    """Total assignment of every edge index to one of regions I..IV."""

    edge_region: tuple[str, ...]

    def region_of(self, edge_index: int) -> str:
        return self.edge_region[edge_index]

    def edges_in(self, region: str) -> list[int]:
        return [i for i, r in enumerate(self.edge_region) if r == region]


def _diamond_member(u: NodeId, p: NodeId, q: NodeId) -> bool:
    """True iff u lies in the tilted square whose diagonal is the segment p-q.

    Equivalently: u is within Manhattan distance |p-q| of both endpoints.
    """
    d = manhattan(p, q)
    return manhattan(u, p) <= d and manhattan(u, q) <= d


def generate_quadrant_partition(
    topology: NetworkTopology, placement: ConsumerPlacement
) -> RegionPartition:
    """Divide the grid's edges into four regions around same-row consumers.

    Region I is the shortest-path diamond (tilted square) with the consumers
    at opposite corners.  Region II is a staple of three congruent diamonds
    over the top (via the points D above each consumer), region III its mirror
    below, and region IV everything else, which wraps around the outside.
    Each consumer's four incident edges land in four distinct regions:
    right->I, up->II, down->III, left->IV for Alice, mirrored for Bob.
    """
    a, b = placement.alice, placement.bob
    if a.y != b.y:
        raise PartitionInfeasible("consumers must share a row")
    if a.x > b.x:
        a, b = b, a
    d = b.x - a.x
    if d < 2:
        raise PartitionInfeasible("consumers must be at distance >= 2")
    # The region II staple tops out at y = a.y + d + d//2 and reaches d//2
    # columns past each consumer.  Region IV must wrap around it, which for
    # odd d needs one spare row/column beyond the staple's reach.
    pad = (d + 1) // 2
    w, h = topology.width, topology.height
    if a.x - pad < 0 or b.x + pad > w - 1:
        raise PartitionInfeasible("not enough horizontal margin for the side diamonds")
    if a.y - d - pad < 0 or a.y + d + pad > h - 1:
        raise PartitionInfeasible("not enough vertical margin for the region II/III staples")

    up_a, up_b = NodeId(a.x, a.y + d), NodeId(b.x, b.y + d)
    dn_a, dn_b = NodeId(a.x, a.y - d), NodeId(b.x, b.y - d)

    def in_band(u: NodeId, c1: NodeId, c2: NodeId) -> bool:
        return (
            _diamond_member(u, a, c1)
            or _diamond_member(u, c1, c2)
            or _diamond_member(u, c2, b)
        )

    regions = []
    for e in topology.edges:
        if _diamond_member(e.a, a, b) and _diamond_member(e.b, a, b):
            regions.append("I")
        elif in_band(e.a, up_a, up_b) and in_band(e.b, up_a, up_b):
            regions.append("II")
        elif in_band(e.a, dn_a, dn_b) and in_band(e.b, dn_a, dn_b):
            regions.append("III")
        else:
            regions.append("IV")
    partition = RegionPartition(edge_region=tuple(regions))
    violations = validate_partition(topology, placement, partition)
    if violations:
        raise PartitionInfeasible(
            "generated partition fails validation: " + "; ".join(map(str, violations))
        )
    return partition


def validate_partition(
    topology: NetworkTopology,
    placement: ConsumerPlacement,
    partition: RegionPartition,
) -> list[Violation]:
    """Check a partition against the region invariants; violations are data.

    Checks: total assignment over exactly the topology's edges, the consumers'
    incident edges landing in distinct regions, all four regions nonempty, and
    each region's edge-induced subgraph (with boundary nodes duplicated per
    region) connecting the consumers' edges of that region.
    """
    violations: list[Violation] = []
    n_edges = topology.edge_count
    assigned = partition.edge_region
    if len(assigned) != n_edges:
        violations.append(
            Violation("UnassignedEdge", f"partition covers {len(assigned)} of {n_edges} edges")
        )
        return violations
    for i, r in enumerate(assigned):
        if r not in REGIONS:
            violations.append(
                Violation("UnknownRegion", f"edge {topology.edges[i].edge_id} -> {r!r}")
            )
    if violations:
        return violations

    region_edges: dict[str, list[int]] = {r: [] for r in REGIONS}
    for i, r in enumerate(assigned):
        region_edges[r].append(i)
    for r in REGIONS:
        if not region_edges[r]:
            violations.append(Violation("EmptyRegion", f"region {r} has no edges"))

    consumer_edge: dict[tuple[str, str], int] = {}
    for name, node in (("alice", placement.alice), ("bob", placement.bob)):
        seen: dict[str, list[int]] = {}
        for ei in topology.adjacency[node]:
            seen.setdefault(assigned[ei], []).append(ei)
        for r, eis in seen.items():
            if len(eis) > 1:
                ids = ", ".join(topology.edges[ei].edge_id for ei in eis)
                violations.append(
                    Violation(
                        "ConsumerEdgeMultiplicity",
                        f"{name} has {len(eis)} edges in region {r}: {ids}",
                    )
                )
            else:
                consumer_edge[(name, r)] = eis[0]

    # Region connectivity with split boundary repeaters: work on (node, region)
    # vertices so a node shared by two regions does not merge them.
    for r in REGIONS:
        ea = consumer_edge.get(("alice", r))
        eb = consumer_edge.get(("bob", r))
        if ea is None or eb is None or not region_edges[r]:
            continue
        adj: dict[int, list[int]] = {}
        for ei in region_edges[r]:
            e = topology.edges[ei]
            ia, ib = topology.node_index(e.a), topology.node_index(e.b)
            adj.setdefault(ia, []).append(ib)
            adj.setdefault(ib, []).append(ia)
        start = topology.node_index(topology.edges[ea].a)
        seen_nodes = {start}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in adj.get(u, ()):
                if v not in seen_nodes:
                    seen_nodes.add(v)
                    queue.append(v)
        e_b = topology.edges[eb]
        if topology.node_index(e_b.a) not in seen_nodes:
            violations.append(
                Violation(
                    "RegionDisconnected",
                    f"region {r} does not connect alice's edge "
                    f"{topology.edges[ea].edge_id} to bob's edge {e_b.edge_id}",
                )
            )
    return violations


def write_partition_csv(path, topology: NetworkTopology, partition: RegionPartition) -> None:
    """Write the ``edge_id,region`` partition file."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["edge_id", "region"])
        for e in topology.edges:
            writer.writerow([e.edge_id, partition.edge_region[e.index]])


def read_partition_csv(path, topology: NetworkTopology) -> RegionPartition:
    """Read an ``edge_id,region`` file; unknown or missing edges raise ValueError."""
    regions: list[str | None] = [None] * topology.edge_count
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["edge_id", "region"]:
            raise ValueError(f"expected header 'edge_id,region', got {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 2:
                raise ValueError(f"line {lineno}: expected 'edge_id,region', got {row}")
            edge_id, region = row
            edge = topology.edge_by_id(edge_id)
            if edge is None:
                raise ValueError(f"line {lineno}: unknown edge id {edge_id!r}")
            if region not in REGIONS:
                raise ValueError(f"line {lineno}: unknown region {region!r}")
            if regions[edge.index] is not None:
                raise ValueError(f"line {lineno}: duplicate assignment for {edge_id!r}")
            regions[edge.index] = region
    missing = [topology.edges[i].edge_id for i, r in enumerate(regions) if r is None]
    if missing:
        raise ValueError(f"{len(missing)} edges unassigned (first: {missing[0]})")
    return RegionPartition(edge_region=tuple(regions))  # type: ignore[arg-type]
