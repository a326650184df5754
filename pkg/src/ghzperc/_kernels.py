"""Numba kernels for the hot per-block loops.

Flat qubit layout used throughout: a block on E edges with k slots has
2*E*k qubit cells, indexed ``q = (e * k + t) * 2 + side`` where ``side`` 0/1
matches the edge's canonical endpoint order.  Kernel-internal randomness
(tie-breaks, qubit draws) is counter-based splitmix64 keyed per grouping
bucket, so common-random-number reruns leave untouched buckets' draws
bit-identical.
"""

from __future__ import annotations

import numpy as np
from numba import njit, uint64

_GOLD = uint64(0x9E3779B97F4A7C15)
_MASK = uint64(0xFFFFFFFFFFFFFFFF)


@njit(cache=True, nogil=True, inline="always")
def _mix64(z):
    z = (uint64(z) + _GOLD) & _MASK
    z = ((z ^ (z >> uint64(30))) * uint64(0xBF58476D1CE4E5B9)) & _MASK
    z = ((z ^ (z >> uint64(27))) * uint64(0x94D049BB133111EB)) & _MASK
    return z ^ (z >> uint64(31))


@njit(cache=True, nogil=True, inline="always")
def _u01(key, ctr):
    # 53-bit mantissa in [0, 1)
    return (_mix64(uint64(key) + uint64(ctr) * _GOLD) >> uint64(11)) * (1.0 / 9007199254740992.0)


def mix64_np(z: np.ndarray) -> np.ndarray:
    """Vectorised twin of the kernel's splitmix64 finaliser."""
    z = (z.astype(np.uint64) + np.uint64(0x9E3779B97F4A7C15))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


def u01_np(key: int, ctr: np.ndarray) -> np.ndarray:
    """Vectorised twin of the kernel's counter-based uniform."""
    x = np.uint64(key) + ctr.astype(np.uint64) * np.uint64(0x9E3779B97F4A7C15)
    return (mix64_np(x) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


def bucket_coin_u01(coin_key: int, bucket: np.ndarray, within: np.ndarray) -> np.ndarray:
    """Uniform per (bucket, within-bucket group index), stable under reruns."""
    bkey = mix64_np(np.uint64(coin_key) ^ mix64_np(bucket.astype(np.uint64) + np.uint64(1)))
    x = bkey + (within.astype(np.uint64)) * np.uint64(0x9E3779B97F4A7C15)
    return (mix64_np(x) >> np.uint64(11)) * (1.0 / 9007199254740992.0)


@njit(cache=True, nogil=True, inline="always")
def _find(parent, x):
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


@njit(cache=True, nogil=True, inline="always")
def _union(parent, size, a, b):
    ra = _find(parent, a)
    rb = _find(parent, b)
    if ra == rb:
        return
    if size[ra] < size[rb]:
        ra, rb = rb, ra
    parent[rb] = ra
    size[ra] += size[rb]


@njit(cache=True, nogil=True)
def group_blocks(
    bucket_ptr,  # (B+1,) int32 CSR over grouping buckets
    bucket_edge,  # (S,) int32 edge index of each incidence
    bucket_side,  # (S,) uint8 side of each incidence
    bucket_forced,  # (S,) uint8 consumer-shared incidences picked first
    alive,  # (E, k, 2) uint8
    n_max,  # max fusion size
    kernel_key,  # uint64 randomness key
    max_slots,  # max incidences per bucket
    group_id,  # (2*E*k,) int32 out, pre-filled with -1
    group_bucket,  # (E*k+1,) int32 out
    group_within,  # (E*k+1,) int32 out
):
    """Greedy fusion grouping, one bucket (node, or node-region) at a time.

    While at least two incidences hold unassigned live qubits, emit a group of
    g = min(n_max, #nonempty incidences) members: pick the g incidences with
    the largest remaining counts (forced ones first, ties uniform at random)
    and draw one unassigned qubit uniformly from each.  Leftovers stay -1 in
    ``group_id`` (implicitly X-measured).  Returns the number of groups.
    """
    k = alive.shape[1]
    n_buckets = bucket_ptr.shape[0] - 1
    rem = np.empty((max_slots, k), dtype=np.int32)
    rem_n = np.empty(max_slots, dtype=np.int32)
    keys = np.empty(max_slots, dtype=np.float64)
    used = np.empty(max_slots, dtype=np.uint8)
    gid = 0
    for b in range(n_buckets):
        s0 = bucket_ptr[b]
        ns = bucket_ptr[b + 1] - s0
        if ns < 2:
            continue
        nonempty = 0
        for j in range(ns):
            e = bucket_edge[s0 + j]
            side = bucket_side[s0 + j]
            c = 0
            for t in range(k):
                if alive[e, t, side]:
                    rem[j, c] = t
                    c += 1
            rem_n[j] = c
            if c > 0:
                nonempty += 1
        if nonempty < 2:
            continue
        bkey = _mix64(uint64(kernel_key) ^ _mix64(uint64(b) + uint64(1)))
        ctr = uint64(0)
        within = 0
        while True:
            m = 0
            for j in range(ns):
                if rem_n[j] > 0:
                    m += 1
            if m < 2:
                break
            g = m if m < n_max else n_max
            for j in range(ns):
                keys[j] = _u01(bkey, ctr)
                ctr += uint64(1)
                used[j] = 0
            for _pick in range(g):
                best = -1
                for j in range(ns):
                    if used[j] or rem_n[j] == 0:
                        continue
                    if best < 0:
                        best = j
                        continue
                    fb = bucket_forced[s0 + best]
                    fj = bucket_forced[s0 + j]
                    if fj != fb:
                        if fj > fb:
                            best = j
                    elif rem_n[j] != rem_n[best]:
                        if rem_n[j] > rem_n[best]:
                            best = j
                    elif keys[j] > keys[best]:
                        best = j
                used[best] = 1
                r = int(_u01(bkey, ctr) * rem_n[best])
                ctr += uint64(1)
                t = rem[best, r]
                rem[best, r] = rem[best, rem_n[best] - 1]
                rem_n[best] -= 1
                e = bucket_edge[s0 + best]
                side = bucket_side[s0 + best]
                group_id[(e * k + t) * 2 + side] = gid
            group_bucket[gid] = b
            group_within[gid] = within
            gid += 1
            within += 1
    return gid


@njit(cache=True, nogil=True)
def label_components(success, alive, group_id, group_ok):
    """Union-find labels over qubit cells; -1 for cells with no live qubit.

    Edges: the two qubits of a link when both alive, plus a star over each
    successful group's members.  Labels are root cell indices.
    """
    E = success.shape[0]
    k = success.shape[1]
    nq = E * k * 2
    parent = np.arange(nq, dtype=np.int32)
    size = np.ones(nq, dtype=np.int32)
    for e in range(E):
        for t in range(k):
            if success[e, t] and alive[e, t, 0] and alive[e, t, 1]:
                q0 = (e * k + t) * 2
                _union(parent, size, q0, q0 + 1)
    ngroups = group_ok.shape[0]
    anchor = np.full(ngroups, -1, dtype=np.int64)
    for q in range(nq):
        g = group_id[q]
        if g >= 0 and group_ok[g]:
            if anchor[g] < 0:
                anchor[g] = q
            else:
                _union(parent, size, anchor[g], q)
    labels = np.empty(nq, dtype=np.int32)
    for q in range(nq):
        e = q // (k * 2)
        t = (q % (k * 2)) // 2
        side = q & 1
        if success[e, t] and alive[e, t, side]:
            labels[q] = _find(parent, q)
        else:
            labels[q] = -1
    return labels


@njit(cache=True, nogil=True)
def spans_columns(labels, col_flat, width):
    """True iff one component holds qubits at both column 0 and column width-1."""
    nq = labels.shape[0]
    left = np.zeros(nq, dtype=np.uint8)
    right = np.zeros(nq, dtype=np.uint8)
    for q in range(nq):
        lab = labels[q]
        if lab < 0:
            continue
        c = col_flat[q]
        if c == 0:
            if right[lab]:
                return True
            left[lab] = 1
        elif c == width - 1:
            if left[lab]:
                return True
            right[lab] = 1
    return False


@njit(cache=True, nogil=True)
def count_shared(labels, node_flat, a_idx, b_idx):
    """Number of components holding qubits of both consumers."""
    nq = labels.shape[0]
    seen_a = np.zeros(nq, dtype=np.uint8)
    seen_b = np.zeros(nq, dtype=np.uint8)
    count = 0
    for q in range(nq):
        lab = labels[q]
        if lab < 0:
            continue
        node = node_flat[q]
        if node == a_idx:
            if not seen_a[lab]:
                seen_a[lab] = 1
                if seen_b[lab]:
                    count += 1
        elif node == b_idx:
            if not seen_b[lab]:
                seen_b[lab] = 1
                if seen_a[lab]:
                    count += 1
    return count


@njit(cache=True, nogil=True)
def newman_ziff_threshold(endpoints, order, occupied, node_col, width):
    """Bond count at which a site-bond realization first spans left-right.

    Bonds are activated in ``order``; a bond conducts only if both endpoint
    sites are occupied.  Returns len(order) + 1 if the realization never spans.
    """
    n_nodes = occupied.shape[0]
    parent = np.arange(n_nodes, dtype=np.int32)
    size = np.ones(n_nodes, dtype=np.int32)
    left = np.zeros(n_nodes, dtype=np.uint8)
    right = np.zeros(n_nodes, dtype=np.uint8)
    for v in range(n_nodes):
        if occupied[v]:
            c = node_col[v]
            if c == 0:
                left[v] = 1
            if c == width - 1:
                right[v] = 1
            if left[v] and right[v]:  # width == 1 degenerate
                return 0
    for i in range(order.shape[0]):
        e = order[i]
        u = endpoints[e, 0]
        v = endpoints[e, 1]
        if not (occupied[u] and occupied[v]):
            continue
        ru = _find(parent, u)
        rv = _find(parent, v)
        if ru != rv:
            if size[ru] < size[rv]:
                ru, rv = rv, ru
            parent[rv] = ru
            size[ru] += size[rv]
            if left[rv]:
                left[ru] = 1
            if right[rv]:
                right[ru] = 1
            if left[ru] and right[ru]:
                return i + 1
    return order.shape[0] + 1
