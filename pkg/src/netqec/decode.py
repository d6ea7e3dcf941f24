"""Decoders: exact minimum-weight perfect matching and BP-OSD.

Surface-code detector models are matched per basis (the basis whose checks
detect observable-flipping errors); faults touching more than two same-basis
detectors are decomposed into existing graphlike edges or rejected.  BB codes
are decoded with min-sum belief propagation plus ordered-statistics
post-processing, which always returns a syndrome-consistent estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import networkx as nx
import numpy as np
from numba import njit
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, dijkstra

from .codes import BinaryMatrix
from .sim import DetectorErrorModel, FrameSample, pack_bits


class DecodeError(ValueError):
    pass


#: cumulative count of BP-OSD estimates that passed the hard syndrome check
VALIDATED_SYNDROMES = 0

_WILSON_Z = 1.959963984540054


def _edge_weight(p: float) -> float:
    return math.log((1.0 - p) / p) if p < 0.5 else 0.0


def _merge_prior(a: float, b: float) -> float:
    return a + b - 2.0 * a * b


# ---------------------------------------------------------------------------
# Matching graph

@dataclass(frozen=True)
class MatchingGraph:
    """Weighted defect graph: one node per matched detector plus a boundary.

    Edges are (u, v, weight, observable mask) with v == ``boundary`` for
    single-detector faults; weight = ln((1-p)/p).
    """

    node_detectors: tuple[int, ...]
    edges: tuple[tuple[int, int, float, int], ...]
    observable_count: int

    @property
    def boundary(self) -> int:
        return len(self.node_detectors)

    @classmethod
    def from_dem(cls, dem: DetectorErrorModel) -> "MatchingGraph":
        """Strict construction: every fault must touch at most 2 detectors."""
        acc = _accumulate_edges(
            dem,
            node_of={d: d for d in range(dem.detector_count)},
            decompose=False,
        )
        return cls(
            tuple(range(dem.detector_count)),
            _edge_tuple(acc, dem.detector_count),
            dem.observable_count,
        )


def _obs_mask(obs: tuple[int, ...]) -> int:
    m = 0
    for o in obs:
        m |= 1 << o
    return m


def _edge_tuple(acc: dict, n: int):
    out = []
    for (u, v, obs), p in sorted(acc.items()):
        out.append((u, n if v < 0 else v, _edge_weight(p), obs))
    return tuple(out)


def _partitions_leq2(elems: tuple[int, ...]):
    """All partitions of elems into blocks of size 1 or 2."""
    if not elems:
        yield []
        return
    head, rest = elems[0], elems[1:]
    for tail in _partitions_leq2(rest):
        yield [(head,)] + tail
    for i in range(len(rest)):
        rem = rest[:i] + rest[i + 1:]
        for tail in _partitions_leq2(rem):
            yield [(head, rest[i])] + tail


def _accumulate_edges(dem: DetectorErrorModel, node_of: dict, decompose: bool):
    """Merge DEM faults into graph edges keyed (u, v|-1, obs mask).

    With ``decompose``, faults projecting onto >2 matched detectors are
    split into existing graphlike edges (exact cover over block partitions,
    requiring the blocks' observable masks to XOR to the fault's); the
    fault's prior merges into every block edge.
    """
    acc: dict[tuple[int, int, int], float] = {}
    pending = []

    for dets, obs, p in zip(dem.dets, dem.obs, map(float, dem.priors)):
        nodes = sorted(node_of[d] for d in dets if d in node_of)
        mask = _obs_mask(obs)
        if not decompose and len(dets) > 2:
            raise DecodeError(
                f"non-matchable DEM: fault touches {len(dets)} detectors"
            )
        if not nodes:
            if mask:
                raise DecodeError(
                    "non-matchable DEM: observable-flipping fault has no "
                    "matched detectors"
                )
            continue
        if len(nodes) <= 2:
            key = (nodes[0], nodes[1] if len(nodes) == 2 else -1, mask)
            acc[key] = _merge_prior(acc.get(key, 0.0), p)
        else:
            pending.append((tuple(nodes), mask, p))

    if pending:
        by_block: dict[frozenset, set[int]] = {}
        for (u, v, m) in acc:
            blk = frozenset((u,)) if v < 0 else frozenset((u, v))
            by_block.setdefault(blk, set()).add(m)
        for nodes, mask, p in pending:
            choice = _decompose_fault(nodes, mask, by_block)
            if choice is None:
                raise DecodeError(
                    f"non-matchable DEM: cannot decompose fault on "
                    f"detectors {nodes}"
                )
            for blk, m in choice:
                bl = sorted(blk)
                key = (bl[0], bl[1] if len(bl) == 2 else -1, m)
                acc[key] = _merge_prior(acc[key], p)
    return acc


def _decompose_fault(nodes, mask, by_block):
    best = None
    for part in _partitions_leq2(nodes):
        blocks = [frozenset(b) for b in part]
        if any(b not in by_block for b in blocks):
            continue
        pick = _assign_obs(blocks, mask, by_block)
        if pick is None:
            continue
        cand = tuple(sorted((tuple(sorted(b)), m) for b, m in pick))
        if best is None or (len(blocks), cand) < best[0]:
            best = ((len(blocks), cand), pick)
    return None if best is None else best[1]


def _assign_obs(blocks, target, by_block):
    """Pick one observable mask per block so their XOR equals target."""

    def rec(i, left):
        if i == len(blocks):
            return [] if left == 0 else None
        for m in sorted(by_block[blocks[i]]):
            tail = rec(i + 1, left ^ m)
            if tail is not None:
                return [(blocks[i], m)] + tail
        return None

    return rec(0, target)


# ---------------------------------------------------------------------------
# Exact per-shot matching

@njit(cache=True)
def _match_dp(dist, dist_b):
    """Exact min-weight matching of k defects with per-defect boundary option.

    Returns partner index per defect, -1 for boundary."""
    k = dist_b.shape[0]
    full = 1 << k
    dp = np.full(full, np.inf)
    choice = np.full(full, -2, dtype=np.int64)
    dp[0] = 0.0
    for s in range(1, full):
        i = 0
        while not (s >> i) & 1:
            i += 1
        s2 = s & ~(1 << i)
        best = dp[s2] + dist_b[i]
        ch = -1
        rem = s2
        while rem:
            j = 0
            while not (rem >> j) & 1:
                j += 1
            rem &= rem - 1
            c = dp[s2 & ~(1 << j)] + dist[i, j]
            if c < best - 1e-12:
                best = c
                ch = j
        dp[s] = best
        choice[s] = ch
    pairs = np.full(k, -1, dtype=np.int64)
    s = full - 1
    while s:
        i = 0
        while not (s >> i) & 1:
            i += 1
        ch = choice[s]
        if ch < 0:
            pairs[i] = -1
            s &= ~(1 << i)
        else:
            pairs[i] = ch
            pairs[ch] = i
            s &= ~((1 << i) | (1 << ch))
    return pairs, dp[full - 1]


class MatchingDecoder:
    """Exact MWPM over the metric closure of a DEM's matching graph.

    For circuit DEMs carrying ``detector_basis`` metadata only the basis
    whose checks detect observable-flipping errors is matched (the other
    basis carries no observable information in a memory experiment).
    """

    def __init__(self, dem: DetectorErrorModel, basis: str | None = None,
                 max_dp_defects: int = 18):
        labels = dem.metadata.get("detector_basis")
        if basis is None:
            basis = dem.metadata.get("basis") if labels is not None else None
        if labels is not None and basis is not None:
            det_ids = [d for d in range(dem.detector_count)
                       if labels[d] == basis]
            decompose = True
        else:
            det_ids = list(range(dem.detector_count))
            decompose = False
        self.basis = basis
        self.detector_ids = np.array(det_ids, dtype=np.int64)
        node_of = {d: i for i, d in enumerate(det_ids)}
        acc = _accumulate_edges(dem, node_of, decompose)
        n = len(det_ids)
        self.graph = MatchingGraph(tuple(det_ids), _edge_tuple(acc, n),
                                   dem.observable_count)
        self.observable_count = dem.observable_count
        self.max_dp_defects = max_dp_defects

        # metric closure: min weight per node pair, observable of the
        # minimal representative
        w = np.full((n + 1, n + 1), np.inf)
        np.fill_diagonal(w, 0.0)
        self._edge_obs: dict[tuple[int, int], int] = {}
        for u, v, wt, m in sorted(self.graph.edges,
                                  key=lambda e: (e[2], e[3])):
            if wt < w[u, v] - 1e-15:
                w[u, v] = w[v, u] = wt
                self._edge_obs[(u, v)] = self._edge_obs[(v, u)] = m
        finite = np.isfinite(w) & (w > 0)
        rows, cols = np.nonzero(finite)
        sp = csr_matrix((w[rows, cols], (rows, cols)), shape=w.shape)
        self._dist, self._pred = dijkstra(
            sp, directed=False, return_predecessors=True
        )
        # zero-weight edges (p = 0.5) are kept for path reconstruction only
        self._path_cache: dict[tuple[int, int], int] = {}

    def _path_obs(self, u: int, v: int) -> int:
        key = (u, v) if u <= v else (v, u)
        hit = self._path_cache.get(key)
        if hit is not None:
            return hit
        mask = 0
        cur = v
        while cur != u:
            prev = self._pred[u, cur]
            if prev < 0:
                raise DecodeError("unmatchable syndrome: disconnected defects")
            mask ^= self._edge_obs.get((prev, cur), 0)
            cur = prev
        self._path_cache[key] = mask
        return mask

    def decode_batch(self, detector_events: np.ndarray) -> np.ndarray:
        """(shots, n_detectors) bool -> (shots, n_observables) bool."""
        dets = np.atleast_2d(np.asarray(detector_events, dtype=bool))
        sub = dets[:, self.detector_ids]
        shots = sub.shape[0]
        preds = np.zeros((shots, self.observable_count), dtype=bool)
        bnd = self.graph.boundary
        for s in range(shots):
            nodes = np.nonzero(sub[s])[0]
            if nodes.size == 0:
                continue
            mask = self._match_defects(nodes, bnd)
            for o in range(self.observable_count):
                preds[s, o] = bool((mask >> o) & 1)
        return preds

    def decode(self, detector_events: np.ndarray) -> np.ndarray:
        return self.decode_batch(detector_events)[0]

    def _match_defects(self, nodes: np.ndarray, bnd: int) -> int:
        # A pair edge with w(u,v) >= w(u,bnd) + w(bnd,v) never beats sending
        # both defects to the boundary, so the defect graph splits into
        # independent components along the surviving edges; each component is
        # solved exactly on its own (optimum is preserved).
        dist_b = self._dist[nodes, bnd]
        sub = self._dist[np.ix_(nodes, nodes)]
        if nodes.size > 2:
            keep = sub < (dist_b[:, None] + dist_b[None, :] - 1e-12)
            np.fill_diagonal(keep, False)
            _, labels = connected_components(csr_matrix(keep), directed=False)
        else:
            labels = np.zeros(nodes.size, dtype=np.int64)
        mask = 0
        for comp in range(labels.max() + 1):
            idx = np.flatnonzero(labels == comp)
            grp = nodes[idx]
            db = dist_b[idx]
            if idx.size <= self.max_dp_defects:
                pairs, total = _match_dp(sub[np.ix_(idx, idx)], db)
                if not np.isfinite(total):
                    raise DecodeError("unmatchable syndrome: no finite matching")
            else:
                pairs = self._match_blossom(grp, db)
            for i in range(idx.size):
                j = pairs[i]
                if j == -1:
                    mask ^= self._path_obs(int(grp[i]), bnd)
                elif j > i:
                    mask ^= self._path_obs(int(grp[i]), int(grp[j]))
        return mask

    def _match_blossom(self, nodes: np.ndarray, dist_b: np.ndarray):
        k = nodes.size
        g = nx.Graph()
        g.add_nodes_from(range(2 * k))
        for i in range(k):
            if np.isfinite(dist_b[i]):
                g.add_edge(i, k + i, weight=float(dist_b[i]))
            for j in range(i + 1, k):
                d = self._dist[nodes[i], nodes[j]]
                if np.isfinite(d):
                    g.add_edge(i, j, weight=float(d))
                g.add_edge(k + i, k + j, weight=0.0)
        mate = nx.min_weight_matching(g)
        if len(mate) != k:
            raise DecodeError("unmatchable syndrome: no perfect matching")
        pairs = np.full(k, -1, dtype=np.int64)
        for a, b in mate:
            a, b = min(a, b), max(a, b)
            if b < k:
                pairs[a] = b
                pairs[b] = a
        return pairs


def mwpm_decode(dem: DetectorErrorModel,
                detector_events: np.ndarray) -> np.ndarray:
    """Exact minimum-weight matching prediction of observable flips.

    Every DEM fault must touch at most two detectors; raises
    ``DecodeError("non-matchable DEM...")`` otherwise.  Accepts one shot
    (n_detectors,) or a batch (shots, n_detectors).
    """
    dec = MatchingDecoder(dem, basis=None)
    arr = np.asarray(detector_events, dtype=bool)
    out = dec.decode_batch(arr)
    return out[0] if arr.ndim == 1 else out


# ---------------------------------------------------------------------------
# BP-OSD

@dataclass(frozen=True)
class BpOsdConfig:
    bp_method: str = "product_sum"  # or "minimum_sum"
    max_iterations: int = 60
    scaling: float = 0.625  # minimum-sum only
    osd_order: int = 1
    osd_candidates: int = 60

    def __post_init__(self):
        if self.bp_method not in ("product_sum", "minimum_sum"):
            raise ValueError(
                f"bp_method must be product_sum or minimum_sum, got {self.bp_method!r}")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if not (0.0 < self.scaling <= 1.0):
            raise ValueError("scaling must lie in (0, 1]")
        if self.osd_order < 0:
            raise ValueError("osd_order must be >= 0")


@njit(cache=True)
def _bp_minsum(row_ptr, col_idx, cm_ptr, cm_edge, llr0, synd,
               scaling, max_iters, msg_vc, msg_cv, total, hard):
    n_checks = row_ptr.shape[0] - 1
    n_vars = llr0.shape[0]
    for e in range(col_idx.shape[0]):
        msg_vc[e] = llr0[col_idx[e]]
        msg_cv[e] = 0.0
    for it in range(max_iters):
        for c in range(n_checks):
            lo, hi = row_ptr[c], row_ptr[c + 1]
            min1 = np.inf
            min2 = np.inf
            arg = -1
            sprod = -1.0 if synd[c] else 1.0
            for e in range(lo, hi):
                v = msg_vc[e]
                a = abs(v)
                if v < 0.0:
                    sprod = -sprod
                if a < min1:
                    min2 = min1
                    min1 = a
                    arg = e
                elif a < min2:
                    min2 = a
            for e in range(lo, hi):
                s = sprod
                if msg_vc[e] < 0.0:
                    s = -s
                m = min2 if e == arg else min1
                msg_cv[e] = s * scaling * m
        for v in range(n_vars):
            t = llr0[v]
            for q in range(cm_ptr[v], cm_ptr[v + 1]):
                t += msg_cv[cm_edge[q]]
            total[v] = t
            hard[v] = t < 0.0
            for q in range(cm_ptr[v], cm_ptr[v + 1]):
                e = cm_edge[q]
                msg_vc[e] = t - msg_cv[e]
        ok = True
        for c in range(n_checks):
            par = False
            for e in range(row_ptr[c], row_ptr[c + 1]):
                if hard[col_idx[e]]:
                    par = not par
            if par != (synd[c] != 0):
                ok = False
                break
        if ok:
            return it + 1
    return -max_iters


@njit(cache=True)
def _bp_prodsum(row_ptr, col_idx, cm_ptr, cm_edge, llr0, synd,
                max_iters, msg_vc, msg_cv, total, hard, tnh, fwd):
    n_checks = row_ptr.shape[0] - 1
    n_vars = llr0.shape[0]
    for e in range(col_idx.shape[0]):
        msg_vc[e] = llr0[col_idx[e]]
        msg_cv[e] = 0.0
    cap = 1.0 - 1e-15
    for it in range(max_iters):
        for c in range(n_checks):
            lo, hi = row_ptr[c], row_ptr[c + 1]
            for e in range(lo, hi):
                v = msg_vc[e]
                if v > 60.0:
                    v = 60.0
                elif v < -60.0:
                    v = -60.0
                tnh[e] = math.tanh(0.5 * v)
            # leave-one-out products via a forward and a backward sweep
            run = -1.0 if synd[c] else 1.0
            for e in range(lo, hi):
                fwd[e] = run
                run *= tnh[e]
            back = 1.0
            for e in range(hi - 1, lo - 1, -1):
                prod = fwd[e] * back
                if prod > cap:
                    prod = cap
                elif prod < -cap:
                    prod = -cap
                msg_cv[e] = 2.0 * math.atanh(prod)
                back *= tnh[e]
        for v in range(n_vars):
            t = llr0[v]
            for q in range(cm_ptr[v], cm_ptr[v + 1]):
                t += msg_cv[cm_edge[q]]
            total[v] = t
            hard[v] = t < 0.0
            for q in range(cm_ptr[v], cm_ptr[v + 1]):
                e = cm_edge[q]
                msg_vc[e] = t - msg_cv[e]
        ok = True
        for c in range(n_checks):
            par = False
            for e in range(row_ptr[c], row_ptr[c + 1]):
                if hard[col_idx[e]]:
                    par = not par
            if par != (synd[c] != 0):
                ok = False
                break
        if ok:
            return it + 1
    return -max_iters


@njit(cache=True)
def _osd_eliminate(order, col_words, rank, pivot_vec, pivot_coeff,
                   pivot_row, chosen):
    """Gaussian elimination over ordered columns until `rank` pivots."""
    dw = col_words.shape[1]
    rw = pivot_coeff.shape[1]
    npiv = 0
    for oi in range(order.shape[0]):
        idx = order[oi]
        w = col_words[idx].copy()
        coeff = np.zeros(rw, dtype=np.uint64)
        for t in range(npiv):
            pr = pivot_row[t]
            if (w[pr >> 6] >> np.uint64(pr & 63)) & np.uint64(1):
                for d in range(dw):
                    w[d] ^= pivot_vec[t, d]
                for d in range(rw):
                    coeff[d] ^= pivot_coeff[t, d]
        nz = -1
        for d in range(dw):
            if w[d]:
                b = 0
                while not (w[d] >> np.uint64(b)) & np.uint64(1):
                    b += 1
                nz = (d << 6) + b
                break
        if nz < 0:
            continue
        pivot_row[npiv] = nz
        for d in range(dw):
            pivot_vec[npiv, d] = w[d]
        coeff[npiv >> 6] ^= np.uint64(1) << np.uint64(npiv & 63)
        for d in range(rw):
            pivot_coeff[npiv, d] = coeff[d]
        chosen[npiv] = idx
        npiv += 1
        if npiv == rank:
            break
    return npiv


@njit(cache=True)
def _osd_solve(synd_words, npiv, pivot_vec, pivot_coeff, pivot_row,
               sol_coeff):
    dw = synd_words.shape[0]
    rw = sol_coeff.shape[0]
    t = synd_words.copy()
    for d in range(rw):
        sol_coeff[d] = 0
    for p in range(npiv):
        pr = pivot_row[p]
        if (t[pr >> 6] >> np.uint64(pr & 63)) & np.uint64(1):
            for d in range(dw):
                t[d] ^= pivot_vec[p, d]
            for d in range(rw):
                sol_coeff[d] ^= pivot_coeff[p, d]
    for d in range(dw):
        if t[d]:
            return False
    return True


class BpOsdDecoder:
    """Min-sum BP with OSD fallback; estimates always satisfy the syndrome."""

    def __init__(self, dem: DetectorErrorModel,
                 config: BpOsdConfig | None = None):
        self.config = config or BpOsdConfig()
        self.dem = dem
        n_det, n_obs = dem.detector_count, dem.observable_count
        if n_obs > 63:
            raise DecodeError("more than 63 observables not supported")
        self._n_det = n_det
        self._n_obs = n_obs
        nf = dem.fault_count

        rows = [[] for _ in range(n_det)]
        for f, ds in enumerate(dem.dets):
            for d in ds:
                rows[d].append(f)
        row_ptr = np.zeros(n_det + 1, dtype=np.int64)
        col_idx = []
        for d in range(n_det):
            row_ptr[d + 1] = row_ptr[d] + len(rows[d])
            col_idx.extend(rows[d])
        self._row_ptr = row_ptr
        self._col_idx = np.array(col_idx, dtype=np.int64)

        cm = [[] for _ in range(nf)]
        for e, f in enumerate(col_idx):
            cm[f].append(e)
        cm_ptr = np.zeros(nf + 1, dtype=np.int64)
        cm_edge = []
        for f in range(nf):
            cm_ptr[f + 1] = cm_ptr[f] + len(cm[f])
            cm_edge.extend(cm[f])
        self._cm_ptr = cm_ptr
        self._cm_edge = np.array(cm_edge, dtype=np.int64)

        p = np.clip(dem.priors, 1e-12, 0.5)
        self._llr0 = np.log((1.0 - p) / p)
        self._weights = self._llr0.copy()

        dense = np.zeros((n_det, nf), dtype=bool)
        for f, ds in enumerate(dem.dets):
            dense[list(ds), f] = True
        self._col_words = np.ascontiguousarray(pack_bits(dense.T))
        self._col_obs = np.zeros(nf, dtype=np.uint64)
        for f, os_ in enumerate(dem.obs):
            self._col_obs[f] = np.uint64(_obs_mask(os_))

        natural = np.arange(nf, dtype=np.int64)
        dw = self._col_words.shape[1]
        rw = (min(n_det, nf) + 63) // 64 or 1
        pv = np.zeros((min(n_det, nf), dw), dtype=np.uint64)
        pc = np.zeros((min(n_det, nf), max(rw, 1)), dtype=np.uint64)
        pr = np.zeros(min(n_det, nf), dtype=np.int64)
        ch = np.zeros(min(n_det, nf), dtype=np.int64)
        self.rank = int(_osd_eliminate(natural, self._col_words,
                                       min(n_det, nf), pv, pc, pr, ch))
        self._work = None

    def _workspace(self):
        if self._work is None:
            ne = self._col_idx.shape[0]
            nf = self.dem.fault_count
            dw = self._col_words.shape[1]
            rw = (self.rank + 63) // 64 or 1
            self._work = dict(
                msg_vc=np.empty(ne), msg_cv=np.empty(ne),
                tnh=np.empty(ne), fwd=np.empty(ne),
                total=np.empty(nf), hard=np.zeros(nf, dtype=np.bool_),
                pivot_vec=np.zeros((self.rank or 1, dw), dtype=np.uint64),
                pivot_coeff=np.zeros((self.rank or 1, rw), dtype=np.uint64),
                pivot_row=np.zeros(self.rank or 1, dtype=np.int64),
                chosen=np.zeros(self.rank or 1, dtype=np.int64),
                sol_coeff=np.zeros(rw, dtype=np.uint64),
            )
        return self._work

    def decode_shot(self, syndrome: np.ndarray) -> np.ndarray:
        """(n_detectors,) bool -> fault estimate (n_faults,) bool."""
        global VALIDATED_SYNDROMES
        synd = np.asarray(syndrome, dtype=bool)
        if synd.shape != (self._n_det,):
            raise DecodeError("syndrome length mismatch")
        ws = self._workspace()
        cfg = self.config
        if cfg.bp_method == "product_sum":
            its = _bp_prodsum(self._row_ptr, self._col_idx, self._cm_ptr,
                              self._cm_edge, self._llr0,
                              synd.astype(np.uint8), cfg.max_iterations,
                              ws["msg_vc"], ws["msg_cv"], ws["total"],
                              ws["hard"], ws["tnh"], ws["fwd"])
        else:
            its = _bp_minsum(self._row_ptr, self._col_idx, self._cm_ptr,
                             self._cm_edge, self._llr0,
                             synd.astype(np.uint8), cfg.scaling,
                             cfg.max_iterations, ws["msg_vc"], ws["msg_cv"],
                             ws["total"], ws["hard"])
        if its > 0:
            est = ws["hard"].copy()
        else:
            est = self._osd(synd, ws["total"])
        self._assert_valid(synd, est)
        VALIDATED_SYNDROMES += 1
        return est

    def _osd(self, synd, total) -> np.ndarray:
        ws = self._workspace()
        cfg = self.config
        order = np.argsort(total, kind="stable").astype(np.int64)
        npiv = int(_osd_eliminate(order, self._col_words, self.rank,
                                  ws["pivot_vec"], ws["pivot_coeff"],
                                  ws["pivot_row"], ws["chosen"]))
        synd_words = pack_bits(synd[None, :])[0]
        ok = _osd_solve(synd_words, npiv, ws["pivot_vec"],
                        ws["pivot_coeff"], ws["pivot_row"], ws["sol_coeff"])
        if not ok:
            raise DecodeError("syndrome outside the check column space")
        best = self._coeff_to_est(npiv, ws)
        if cfg.osd_order > 0:
            best_w = float(self._weights[best].sum())
            in_basis = np.zeros(self.dem.fault_count, dtype=bool)
            in_basis[ws["chosen"][:npiv]] = True
            cands = [int(j) for j in order if not in_basis[j]]
            for j in cands[:cfg.osd_candidates]:
                sw = synd_words ^ self._col_words[j]
                if not _osd_solve(sw, npiv, ws["pivot_vec"],
                                  ws["pivot_coeff"], ws["pivot_row"],
                                  ws["sol_coeff"]):
                    continue
                est = self._coeff_to_est(npiv, ws)
                est[j] = True
                wgt = float(self._weights[est].sum())
                if wgt < best_w - 1e-12:
                    best, best_w = est, wgt
        return best

    def _coeff_to_est(self, npiv, ws) -> np.ndarray:
        est = np.zeros(self.dem.fault_count, dtype=bool)
        sol = ws["sol_coeff"]
        for t in range(npiv):
            if (int(sol[t >> 6]) >> (t & 63)) & 1:
                est[ws["chosen"][t]] = True
        return est

    def _assert_valid(self, synd, est) -> None:
        # recompute via packed columns: cheap and independent of BP state
        acc = np.zeros(self._col_words.shape[1], dtype=np.uint64)
        for f in np.nonzero(est)[0]:
            acc ^= self._col_words[f]
        sw = pack_bits(synd[None, :])[0]
        if not np.array_equal(acc, sw):
            raise DecodeError("estimate does not reproduce the syndrome")

    def predict_obs(self, est: np.ndarray) -> np.ndarray:
        m = np.uint64(0)
        for f in np.nonzero(est)[0]:
            m ^= self._col_obs[f]
        return np.array([(int(m) >> o) & 1 for o in range(self._n_obs)],
                        dtype=bool)

    def decode_batch(self, detector_events: np.ndarray) -> np.ndarray:
        dets = np.atleast_2d(np.asarray(detector_events, dtype=bool))
        preds = np.zeros((dets.shape[0], self._n_obs), dtype=bool)
        for s in range(dets.shape[0]):
            preds[s] = self.predict_obs(self.decode_shot(dets[s]))
        return preds


def bposd_decode(check: BinaryMatrix, priors, syndrome,
                 config: BpOsdConfig | None = None,
                 logical: BinaryMatrix | None = None):
    """One-shot functional BP-OSD.

    Returns the fault estimate (bool vector over columns); with ``logical``
    given, returns (estimate, predicted observable flips).
    """
    syndrome = np.asarray(syndrome, dtype=bool)
    if syndrome.shape != (check.rows,):
        raise DecodeError("syndrome length must equal the check row count")
    dets = [[] for _ in range(check.cols)]
    for (r, c) in check.entries():
        dets[c].append(r)
    obs = [[] for _ in range(check.cols)]
    if logical is not None:
        for (r, c) in logical.entries():
            obs[c].append(r)
    dem = DetectorErrorModel(
        check.rows,
        logical.rows if logical is not None else 0,
        tuple(tuple(sorted(d)) for d in dets),
        tuple(tuple(sorted(o)) for o in obs),
        np.clip(np.asarray(priors, dtype=np.float64), 1e-12, 0.5),
    )
    dec = BpOsdDecoder(dem, config)
    est = dec.decode_shot(syndrome)
    if logical is None:
        return est
    return est, dec.predict_obs(est)


# ---------------------------------------------------------------------------
# Statistics

@dataclass(frozen=True)
class ErrorRateEstimate:
    failures: int
    shots: int
    rate: float
    ci_low: float
    ci_high: float


def wilson_interval(failures: int, shots: int,
                    z: float = _WILSON_Z) -> tuple[float, float]:
    if shots < 1:
        raise ValueError("shots must be >= 1")
    phat = failures / shots
    denom = 1.0 + z * z / shots
    center = (phat + z * z / (2 * shots)) / denom
    half = (z / denom) * math.sqrt(
        phat * (1 - phat) / shots + z * z / (4 * shots * shots)
    )
    return max(0.0, center - half), min(1.0, center + half)


def logical_error_rate(predictions: np.ndarray,
                       observable_flips: np.ndarray) -> ErrorRateEstimate:
    """Failure = any observable bit mismatch in a shot; Wilson 95% interval."""
    pred = np.atleast_2d(np.asarray(predictions, dtype=bool))
    obs = np.atleast_2d(np.asarray(observable_flips, dtype=bool))
    if pred.shape != obs.shape:
        raise ValueError(
            f"shape mismatch: predictions {pred.shape} vs flips {obs.shape}"
        )
    fails = int(np.any(pred != obs, axis=1).sum())
    shots = pred.shape[0]
    lo, hi = wilson_interval(fails, shots)
    return ErrorRateEstimate(fails, shots, fails / shots, lo, hi)


def predictions_to_sample(predictions: np.ndarray) -> FrameSample:
    """Wrap decoder predictions in the bit-packed sample container."""
    pred = np.atleast_2d(np.asarray(predictions, dtype=bool))
    shots = pred.shape[0]
    return FrameSample(
        shots,
        np.zeros((0, (shots + 63) // 64), dtype=np.uint64),
        pack_bits(pred.T),
    )
