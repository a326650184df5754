"""One k-slot block of the (n,k)-GHZ protocol.

Pipeline per block: sample links on every edge for k slots, apply heralded
decoherence, form fusion groups per node from local counts, sample fusion
outcomes.  Consumers never fuse.  ``run_block`` is pure given its inputs and
an RngStream; independent blocks may run concurrently on distinct streams.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from . import _kernels
from .errors import InvalidConfig
from .topology import ConsumerPlacement, NetworkTopology, NodeId

_STREAM_MASK = (1 << 63) - 1


def derive_stream(*parts: int) -> int:
    """Stable 63-bit hash of integer parts, for naming independent substreams."""
    h = 0x8C2F_9D71_0B3A_55E1
    for part in parts:
        h = int(_kernels.mix64_np(np.uint64(h ^ int(_kernels.mix64_np(np.uint64(part & 0xFFFFFFFFFFFFFFFF))))))
    return h & _STREAM_MASK


@dataclass(frozen=True)
class RngStream:
    """Deterministic, platform-independent random stream (seed, stream index).

    Distinct stream indices give statistically independent PCG64 generators.
    """

    seed: int
    stream: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream,))
        return np.random.default_rng(ss)

    def child(self, *parts: int) -> "RngStream":
        return RngStream(self.seed, derive_stream(self.stream, *parts))


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if isinstance(rng, (int, np.integer)):
        return RngStream(int(rng)).generator()
    raise TypeError(f"expected RngStream, Generator or int seed, got {type(rng)!r}")


@dataclass(frozen=True)
class ProtocolParams:
    """Knobs for one experiment: (p, q, n, k, mu, latency_slots)."""

    p: float
    q: float
    n: int = 4
    k: int = 1
    mu: float = math.inf
    latency_slots: int = 0

    def __post_init__(self):
        if not 0.0 <= self.p <= 1.0:
            raise InvalidConfig(f"p must be in [0, 1], got {self.p}")
        if not 0.0 <= self.q <= 1.0:
            raise InvalidConfig(f"q must be in [0, 1], got {self.q}")
        if self.n < 2:
            raise InvalidConfig(f"n must be >= 2, got {self.n}")
        if self.k < 1:
            raise InvalidConfig(f"k must be >= 1, got {self.k}")
        if not (self.mu > 0):
            raise InvalidConfig(f"mu must be positive or inf, got {self.mu}")
        if self.latency_slots < 0:
            raise InvalidConfig(f"latency_slots must be >= 0, got {self.latency_slots}")


class QubitId(NamedTuple):
    """One qubit of a link: its edge id, 1-based slot, and holding endpoint."""

    edge: str
    slot: int
    endpoint: NodeId


@dataclass(frozen=True)
class LinkBlock:
    """Sampled link successes and per-qubit alive flags for one block.

    ``success[e, t]`` covers edge index e at 0-based slot t; ``alive[e, t, s]``
    covers the qubit at the edge's canonical endpoint s.  Alive flags are
    meaningful only where the link succeeded.
    """

    topology: NetworkTopology
    k: int
    success: np.ndarray
    alive: np.ndarray

    def _locate(self, qubit: QubitId) -> tuple[int, int, int]:
        edge = self.topology.edge_by_id(qubit.edge)
        if edge is None:
            raise LookupError(f"unknown edge {qubit.edge!r}")
        if not 1 <= qubit.slot <= self.k:
            raise LookupError(f"slot {qubit.slot} outside 1..{self.k}")
        if qubit.endpoint == edge.a:
            side = 0
        elif qubit.endpoint == edge.b:
            side = 1
        else:
            raise LookupError(f"{qubit.endpoint} is not an endpoint of {qubit.edge}")
        return edge.index, qubit.slot - 1, side

    def success_of(self, edge_id: str, slot: int) -> bool:
        edge = self.topology.edge_by_id(edge_id)
        if edge is None:
            raise LookupError(f"unknown edge {edge_id!r}")
        return bool(self.success[edge.index, slot - 1])

    def is_alive(self, qubit: QubitId) -> bool:
        """Alive flag of a qubit; raises LookupError if its link never succeeded."""
        e, t, side = self._locate(qubit)
        if not self.success[e, t]:
            raise LookupError(f"link {qubit.edge} slot {qubit.slot} failed; qubit undefined")
        return bool(self.alive[e, t, side])

    def live_qubits(self):
        """Iterate every alive qubit in the block."""
        for e, t, side in zip(*np.nonzero(self.alive)):
            edge = self.topology.edges[e]
            endpoint = edge.a if side == 0 else edge.b
            yield QubitId(edge.edge_id, int(t) + 1, endpoint)

    @property
    def success_count(self) -> int:
        return int(self.success.sum())


@dataclass(frozen=True)
class FusionGroup:
    node: NodeId
    members: tuple[QubitId, ...]
    succeeded: bool | None = None
    region: str | None = None


@dataclass(frozen=True)
class BlockOutcome:
    links: LinkBlock
    groups: tuple[FusionGroup, ...]
    params: ProtocolParams
    placement: ConsumerPlacement | None


def sample_links(topology: NetworkTopology, params: ProtocolParams, rng) -> LinkBlock:
    """Attempt one link per edge per slot, each succeeding with probability p."""
    gen = as_generator(rng)
    e, k = topology.edge_count, params.k
    success = gen.random((e, k)) < params.p
    alive = np.repeat(success[:, :, None], 2, axis=2)
    return LinkBlock(topology=topology, k=k, success=success, alive=alive)


def decoherence_thresholds(params: ProtocolParams) -> np.ndarray:
    """Per-slot survival thresholds: a slot-t qubit (0-based) dies iff its
    exponential lifetime sample is <= k - t - 1 + latency_slots."""
    t = np.arange(params.k)
    return (params.k - t - 1 + params.latency_slots).astype(np.float64)


def apply_decoherence(block: LinkBlock, params: ProtocolParams, rng) -> LinkBlock:
    """Kill qubits whose ceil(Exp(mu)) lifetime ends before fusions happen.

    Lifetimes of a link's two qubits are independent; with mu infinite the
    block is returned unchanged.
    """
    if math.isinf(params.mu):
        return block
    gen = as_generator(rng)
    expo = gen.exponential(params.mu, size=block.alive.shape)
    survive = expo > decoherence_thresholds(params)[None, :, None]
    return replace(block, alive=block.alive & survive)


def form_fusion_groups(
    live_counts: Mapping[str, Sequence[QubitId]], n: int, rng
) -> list[FusionGroup]:
    """Greedily group one node's live qubits for fusion.

    ``live_counts`` maps each neighbouring edge id to that node's unassigned
    live qubits on it (the node-local view: own dead qubits excluded, neighbour
    deaths unknown).  While two or more edges hold unassigned qubits, a group
    of g = min(n, #such edges) is formed from the g largest edges (ties
    uniform at random), drawing one qubit uniformly from each.  Leftovers are
    implicitly X-measured and appear in no group.
    """
    edges = [eid for eid, qubits in live_counts.items() if len(qubits) > 0]
    if len(edges) < 2:
        return []
    nodes = {q.endpoint for eid in edges for q in live_counts[eid]}
    if len(nodes) != 1:
        raise ValueError(f"live_counts must be one node's view, saw endpoints {nodes}")
    (node,) = nodes
    gen = as_generator(rng)
    n_edges = len(edges)
    k_local = max(len(live_counts[eid]) for eid in edges)
    alive = np.zeros((n_edges, k_local, 2), dtype=np.bool_)
    alive[:, :, 0] = [
        [t < len(live_counts[eid]) for t in range(k_local)] for eid in edges
    ]
    group_id = np.full(n_edges * k_local * 2, -1, dtype=np.int32)
    group_bucket = np.empty(n_edges * k_local + 1, dtype=np.int32)
    group_within = np.empty(n_edges * k_local + 1, dtype=np.int32)
    n_groups = _kernels.group_blocks(
        np.array([0, n_edges], dtype=np.int32),
        np.arange(n_edges, dtype=np.int32),
        np.zeros(n_edges, dtype=np.uint8),
        np.zeros(n_edges, dtype=np.uint8),
        alive,
        n,
        np.uint64(gen.integers(0, 1 << 63)),
        n_edges,
        group_id,
        group_bucket,
        group_within,
    )
    members: list[list[QubitId]] = [[] for _ in range(n_groups)]
    for j, eid in enumerate(edges):
        for t in range(len(live_counts[eid])):
            gid = group_id[(j * k_local + t) * 2]
            if gid >= 0:
                members[gid].append(live_counts[eid][t])
    return [FusionGroup(node=node, members=tuple(ms)) for ms in members]


def sample_fusion_outcomes(groups: Sequence[FusionGroup], q: float, rng) -> list[FusionGroup]:
    """Set each group's succeeded flag independently with probability q."""
    gen = as_generator(rng)
    coins = gen.random(len(groups)) < q
    return [replace(g, succeeded=bool(c)) for g, c in zip(groups, coins)]


def run_block(
    topology: NetworkTopology,
    placement: ConsumerPlacement | None,
    params: ProtocolParams,
    rng,
    partition=None,
) -> BlockOutcome:
    """Run one full block and return its sampled outcome.

    With a partition (k=1 only), each node's qubits are bucketed by the region
    of their edge and grouped per bucket; consumers never fuse either way.
    Loops over many blocks should hold a :class:`ghzperc.engine.BlockEngine`
    instead of calling this repeatedly (it rebuilds the engine each call).
    """
    from .engine import BlockEngine

    engine = BlockEngine(topology, params, placement=placement, partition=partition)
    return engine.to_outcome(engine.run_arrays(as_generator(rng)))
