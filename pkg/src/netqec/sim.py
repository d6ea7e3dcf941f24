"""Pauli-frame Monte Carlo sampling and detector-error-model extraction.

The frame sampler propagates X/Z error planes, bit-packed 64 shots per uint64
word, through the instruction stream; measurements append record rows, and
detectors/observables are XORs of record rows.  DEM extraction runs the same
propagation once with one bit column per elementary fault, then merges equal
detector/observable signatures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .codes import BinaryMatrix
from .circuit import (
    Circuit,
    CircuitError,
    Instruction,
    PauliTarget,
    Rec,
    chain_branch_probs,
)

BATCH_SHOTS = 1 << 14


# ---------------------------------------------------------------------------
# Packed sample container

def pack_bits(mat: np.ndarray) -> np.ndarray:
    """(rows, shots) bool -> (rows, ceil(shots/64)) uint64, little-endian bits."""
    mat = np.ascontiguousarray(mat, dtype=np.uint8)
    rows, shots = mat.shape
    pad = (-shots) % 64
    if pad:
        mat = np.concatenate([mat, np.zeros((rows, pad), dtype=np.uint8)], axis=1)
    packed = np.packbits(mat, axis=1, bitorder="little")
    return packed.view(np.uint64).reshape(rows, -1)


def unpack_bits(words: np.ndarray, shots: int) -> np.ndarray:
    """(rows, W) uint64 -> (rows, shots) bool."""
    rows = words.shape[0]
    if rows == 0:
        return np.zeros((0, shots), dtype=bool)
    as_bytes = words.reshape(rows, -1).view(np.uint8)
    bits = np.unpackbits(as_bytes, axis=1, bitorder="little")
    return bits[:, :shots].astype(bool)


@dataclass
class FrameSample:
    """Detector events and observable flips for a block of shots.

    Stored bit-packed, detector-major: word w of row d holds shots
    64w..64w+63.  ``detector_events`` / ``observable_flips`` unpack to
    (shots, count) bool matrices.
    """

    shots: int
    det_words: np.ndarray  # (n_detectors, W) uint64
    obs_words: np.ndarray  # (n_observables, W) uint64

    @property
    def detector_count(self) -> int:
        return self.det_words.shape[0]

    @property
    def observable_count(self) -> int:
        return self.obs_words.shape[0]

    @property
    def detector_events(self) -> np.ndarray:
        return unpack_bits(self.det_words, self.shots).T

    @property
    def observable_flips(self) -> np.ndarray:
        return unpack_bits(self.obs_words, self.shots).T

    @classmethod
    def concatenate(cls, parts: list["FrameSample"]) -> "FrameSample":
        if not parts:
            raise ValueError("nothing to concatenate")
        for p in parts[:-1]:
            if p.shots % 64:
                raise ValueError("only the final part may have partial words")
        shots = sum(p.shots for p in parts)
        return cls(
            shots,
            np.concatenate([p.det_words for p in parts], axis=1),
            np.concatenate([p.obs_words for p in parts], axis=1),
        )

    def counts(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-detector and per-observable set-bit counts."""
        det = np.array([int(_popcount(r)) for r in self.det_words], dtype=np.int64)
        obs = np.array([int(_popcount(r)) for r in self.obs_words], dtype=np.int64)
        return det, obs

    # -- binary export ----------------------------------------------------

    MAGIC = b"FSMP"

    def to_file(self, path) -> None:
        with open(path, "wb") as fh:
            header = np.array(
                [self.shots, self.detector_count, self.observable_count],
                dtype="<u8",
            )
            fh.write(self.MAGIC)
            fh.write(header.tobytes())
            fh.write(self.det_words.astype("<u8").tobytes())
            fh.write(self.obs_words.astype("<u8").tobytes())

    @classmethod
    def from_file(cls, path) -> "FrameSample":
        with open(path, "rb") as fh:
            if fh.read(4) != cls.MAGIC:
                raise ValueError("not a frame-sample file")
            shots, n_det, n_obs = np.frombuffer(fh.read(24), dtype="<u8")
            w = (int(shots) + 63) // 64
            det = np.frombuffer(fh.read(8 * int(n_det) * w), dtype="<u8")
            obs = np.frombuffer(fh.read(8 * int(n_obs) * w), dtype="<u8")
        return cls(
            int(shots),
            det.astype(np.uint64).reshape(int(n_det), w),
            obs.astype(np.uint64).reshape(int(n_obs), w),
        )

    def to_csv(self, path) -> None:
        """Debug form: one row per shot, detector bits then observable bits."""
        det = self.detector_events.astype(np.uint8)
        obs = self.observable_flips.astype(np.uint8)
        with open(path, "w") as fh:
            fh.write(",".join(
                [f"d{i}" for i in range(self.detector_count)]
                + [f"o{i}" for i in range(self.observable_count)]
            ) + "\n")
            for s in range(self.shots):
                fh.write(",".join(map(str, det[s])) + ","
                         + ",".join(map(str, obs[s])) + "\n")


def _popcount(row: np.ndarray) -> int:
    return int(np.unpackbits(row.view(np.uint8)).sum())


# ---------------------------------------------------------------------------
# Program compilation (shared by sampler and DEM extraction)

_DEP1 = [(1, 0), (1, 1), (0, 1)]  # (x, z) masks of X, Y, Z
_PAULI_XZ = {"X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


def _pauli2_components():
    out = []
    for c in range(1, 16):
        pa, pb = c >> 2, c & 3
        out.append((
            (pa in (1, 2), pa in (2, 3)),
            (pb in (1, 2), pb in (2, 3)),
        ))
    return out


_DEP2 = _pauli2_components()


def _compile(circuit: Circuit) -> list:
    """Flatten instructions into vectorizable ops with absolute record indices."""
    prog = []
    n_meas = 0
    det_idx = obs_pending = 0
    i = 0
    ins_list = circuit.instructions
    while i < len(ins_list):
        ins = ins_list[i]
        name, tg, args = ins.name, ins.targets, ins.args
        if name == "TICK":
            pass
        elif name in ("R", "RX"):
            prog.append(("reset", np.array(tg, dtype=np.int64)))
        elif name == "H":
            prog.append(("h", np.array(tg, dtype=np.int64)))
        elif name in ("CX", "CZ"):
            phys_c, phys_t, cond = [], [], []
            for c, t in zip(tg[::2], tg[1::2]):
                if isinstance(c, Rec):
                    cond.append((n_meas + c.offset, t))
                else:
                    phys_c.append(c)
                    phys_t.append(t)
            if phys_c:
                kind = "cx" if name == "CX" else "cz"
                # Vectorized row-XOR needs disjoint pairs; split if a qubit
                # appears twice in one instruction.
                if len(set(phys_c) | set(phys_t)) == 2 * len(phys_c):
                    groups = [(phys_c, phys_t)]
                else:
                    groups = [([c], [t]) for c, t in zip(phys_c, phys_t)]
                for gc, gt in groups:
                    prog.append((kind,
                                 np.array(gc, dtype=np.int64),
                                 np.array(gt, dtype=np.int64)))
            for rec_abs, t in cond:
                prog.append(("condx" if name == "CX" else "condz", rec_abs, t))
        elif name in ("M", "MX"):
            prog.append((name.lower(), np.array(tg, dtype=np.int64), n_meas))
            n_meas += len(tg)
        elif name in ("X", "Y", "Z"):
            prog.append(("pauli", _PAULI_XZ[name], np.array(tg, dtype=np.int64)))
        elif name in ("X_ERROR", "Z_ERROR"):
            if args[0] > 0:
                prog.append(("perr", _PAULI_XZ[name[0]], args[0],
                             np.array(tg, dtype=np.int64)))
        elif name == "DEPOLARIZE1":
            if args[0] > 0:
                prog.append(("dep1", args[0], np.array(tg, dtype=np.int64)))
        elif name == "DEPOLARIZE2":
            if args[0] > 0:
                prog.append(("dep2", args[0],
                             np.array(tg[::2], dtype=np.int64),
                             np.array(tg[1::2], dtype=np.int64)))
        elif name == "E":
            chain = [ins]
            while i + 1 < len(ins_list) and ins_list[i + 1].name == "ELSE_CORRELATED_ERROR":
                i += 1
                chain.append(ins_list[i])
            probs = chain_branch_probs(chain)
            branches = [
                tuple((_PAULI_XZ[t.pauli], t.qubit) for t in c.targets)
                for c in chain
            ]
            prog.append(("chain", np.cumsum(probs), branches))
        elif name == "ELSE_CORRELATED_ERROR":
            raise CircuitError("ELSE_CORRELATED_ERROR without a leading E")
        elif name == "DETECTOR":
            prog.append(("det", np.array([n_meas + r.offset for r in tg],
                                         dtype=np.int64), det_idx))
            det_idx += 1
        elif name == "OBSERVABLE_INCLUDE":
            prog.append(("obs", np.array([n_meas + r.offset for r in tg],
                                         dtype=np.int64), int(args[0])))
        else:  # pragma: no cover
            raise CircuitError(f"cannot simulate {name}")
        i += 1
    return prog


def _program(circuit: Circuit) -> list:
    prog = circuit.metadata.get("_program")
    if prog is None:
        prog = _compile(circuit)
        circuit.metadata["_program"] = prog
    return prog


# ---------------------------------------------------------------------------
# Frame sampler

def _batch_rng(seed: int, batch: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(key=np.array([seed, batch], dtype=np.uint64))
    )


def _bern_words(rng, p: float, rows: int, shots: int) -> np.ndarray:
    return pack_bits(rng.random((rows, shots)) < p)


def _sample_batch(circuit: Circuit, shots: int, rng) -> FrameSample:
    prog = _program(circuit)
    w = (shots + 63) // 64
    q = circuit.qubit_count
    fx = np.zeros((q, w), dtype=np.uint64)
    fz = np.zeros((q, w), dtype=np.uint64)
    rec = np.zeros((circuit.num_measurements, w), dtype=np.uint64)
    det = np.zeros((circuit.detector_count, w), dtype=np.uint64)
    obs = np.zeros((circuit.observable_count, w), dtype=np.uint64)
    ones = np.full(w, ~np.uint64(0), dtype=np.uint64)

    for op in prog:
        kind = op[0]
        if kind == "cx":
            _, cs, ts = op
            fx[ts] ^= fx[cs]
            fz[cs] ^= fz[ts]
        elif kind == "dep2":
            _, p, cs, ts = op
            u = rng.random((len(cs), shots))
            sel = u < p
            comp = np.where(sel, (u * (15 / p)).astype(np.int64) + 1, 0)
            pa, pb = comp >> 2, comp & 3
            fx[cs] ^= pack_bits((pa == 1) | (pa == 2))
            fz[cs] ^= pack_bits((pa == 2) | (pa == 3))
            fx[ts] ^= pack_bits((pb == 1) | (pb == 2))
            fz[ts] ^= pack_bits((pb == 2) | (pb == 3))
        elif kind == "dep1":
            _, p, qs = op
            u = rng.random((len(qs), shots))
            sel = u < p
            comp = np.where(sel, (u * (3 / p)).astype(np.int64), 3)
            fx[qs] ^= pack_bits(comp <= 1)
            fz[qs] ^= pack_bits((comp == 1) | (comp == 2))
        elif kind == "perr":
            _, (px, pz), p, qs = op
            mask = _bern_words(rng, p, len(qs), shots)
            if px:
                fx[qs] ^= mask
            if pz:
                fz[qs] ^= mask
        elif kind == "m":
            _, qs, base = op
            rec[base:base + len(qs)] = fx[qs]
        elif kind == "mx":
            _, qs, base = op
            rec[base:base + len(qs)] = fz[qs]
        elif kind == "reset":
            _, qs = op
            fx[qs] = 0
            fz[qs] = 0
        elif kind == "h":
            _, qs = op
            tmp = fx[qs].copy()
            fx[qs] = fz[qs]
            fz[qs] = tmp
        elif kind == "cz":
            _, aa, bb = op
            fz[aa] ^= fx[bb]
            fz[bb] ^= fx[aa]
        elif kind == "condx":
            _, rec_abs, t = op
            fx[t] ^= rec[rec_abs]
        elif kind == "condz":
            _, rec_abs, t = op
            fz[t] ^= rec[rec_abs]
        elif kind == "pauli":
            _, (px, pz), qs = op
            if px:
                fx[qs] ^= ones
            if pz:
                fz[qs] ^= ones
        elif kind == "chain":
            _, cum, branches = op
            u = rng.random(shots)
            idx = np.searchsorted(cum, u, side="right")
            hit = idx < len(branches)
            if not np.any(hit):
                continue
            for bi in np.unique(idx[hit]):
                mask = pack_bits((idx == bi)[None, :])[0]
                for (px, pz), qb in branches[bi]:
                    if px:
                        fx[qb] ^= mask
                    if pz:
                        fz[qb] ^= mask
        elif kind == "det":
            _, idxs, d = op
            det[d] = np.bitwise_xor.reduce(rec[idxs], axis=0)
        elif kind == "obs":
            _, idxs, o = op
            obs[o] ^= np.bitwise_xor.reduce(rec[idxs], axis=0)
    if shots % 64:
        tail = np.uint64((1 << (shots % 64)) - 1)
        det[:, -1] &= tail
        obs[:, -1] &= tail
    return FrameSample(shots, det, obs)


def frame_sample(
    circuit: Circuit,
    shots: int,
    seed: int,
    batch_shots: int = BATCH_SHOTS,
    first_batch: int = 0,
) -> FrameSample:
    """Sample detector events and observable flips.

    Deterministic given ``seed``: batch b uses a counter-based generator keyed
    (seed, b), so results are identical however batches are distributed over
    workers.  ``first_batch`` lets a caller sample a mid-stream slice.
    """
    if shots < 1:
        raise ValueError("shots must be >= 1")
    parts = []
    done, batch = 0, first_batch
    while done < shots:
        take = min(batch_shots, shots - done)
        parts.append(_sample_batch(circuit, take, _batch_rng(seed, batch)))
        done += take
        batch += 1
    return FrameSample.concatenate(parts)


# ---------------------------------------------------------------------------
# Detector error model

@dataclass
class DetectorErrorModel:
    """Detector/observable signatures and priors of elementary faults.

    Column-aligned: fault f flips detectors ``dets[f]`` and observables
    ``obs[f]`` and fires independently with probability ``priors[f]``.
    Signatures are unique (merged) and priors lie in (0, 0.5].
    """

    detector_count: int
    observable_count: int
    dets: tuple[tuple[int, ...], ...]
    obs: tuple[tuple[int, ...], ...]
    priors: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        self.priors = np.asarray(self.priors, dtype=np.float64)
        if np.any(self.priors <= 0) or np.any(self.priors > 0.5):
            raise ValueError("priors must lie in (0, 0.5]")

    @property
    def fault_count(self) -> int:
        return len(self.priors)

    @property
    def check(self) -> BinaryMatrix:
        return BinaryMatrix(
            self.detector_count,
            self.fault_count,
            [(d, f) for f, ds in enumerate(self.dets) for d in ds],
        )

    @property
    def logical(self) -> BinaryMatrix:
        return BinaryMatrix(
            self.observable_count,
            self.fault_count,
            [(o, f) for f, os_ in enumerate(self.obs) for o in os_],
        )

    def to_text(self) -> str:
        lines = []
        for p, ds, os_ in zip(self.priors, self.dets, self.obs):
            parts = [f"error({repr(float(p))})"]
            parts += [f"D{d}" for d in ds]
            parts += [f"L{o}" for o in os_]
            lines.append(" ".join(parts))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, detector_count=None, observable_count=None):
        dets, obs, priors = [], [], []
        max_d = max_o = -1
        for raw in text.splitlines():
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if not line.startswith("error("):
                raise ValueError(f"unparseable DEM line {raw!r}")
            close = line.index(")")
            p = float(line[6:close])
            ds, os_ = [], []
            for tok in line[close + 1:].split():
                if tok.startswith("D"):
                    ds.append(int(tok[1:]))
                elif tok.startswith("L"):
                    os_.append(int(tok[1:]))
                else:
                    raise ValueError(f"bad DEM target {tok!r}")
            max_d = max([max_d] + ds)
            max_o = max([max_o] + os_)
            dets.append(tuple(ds))
            obs.append(tuple(os_))
            priors.append(p)
        return cls(
            detector_count if detector_count is not None else max_d + 1,
            observable_count if observable_count is not None else max_o + 1,
            tuple(dets),
            tuple(obs),
            np.array(priors),
        )


def dem_matrices(dem: DetectorErrorModel):
    """(check, logical, priors) in column-aligned order."""
    return dem.check, dem.logical, list(map(float, dem.priors))


def _uniform_group_prior(p_total: float, group_order: int) -> float:
    """Independent-flip probability reproducing a uniform Pauli channel.

    A channel applying each of the ``group_order - 1`` non-identity elements
    of a Pauli group with equal probability (total ``p_total``) equals the
    composition of independent flips of every element, each with probability
    q satisfying (1 - 2q)^(order/2) = 1 - p_total * order / (order - 1).
    The conversion is exact, so the extracted model reproduces the sampled
    circuit distribution and not just its first-order expansion.
    """
    n = group_order
    base = 1.0 - p_total * n / (n - 1)
    if base <= 0.0:
        raise ValueError(f"channel probability {p_total} too large to convert")
    return 0.5 * (1.0 - base ** (2.0 / n))


def _enumerate_faults(circuit: Circuit):
    """List the independent elementary faults of each program step.

    Returned as parallel arrays: for program step k, components[k] is a list
    of ([(x, z, qubit) flips], prior).  Depolarizing channels and uniform
    correlated chains are converted exactly to independent components via
    ``_uniform_group_prior``.
    """
    prog = _program(circuit)
    comp_at = [[] for _ in prog]
    for k, op in enumerate(prog):
        kind = op[0]
        if kind == "perr":
            _, (px, pz), p, qs = op
            for q in qs:
                comp_at[k].append(([(px, pz, int(q))], p))
        elif kind == "dep1":
            _, p, qs = op
            q1 = _uniform_group_prior(p, 4)
            for q in qs:
                for (px, pz) in _DEP1:
                    comp_at[k].append(([(px, pz, int(q))], q1))
        elif kind == "dep2":
            _, p, cs, ts = op
            q2 = _uniform_group_prior(p, 16)
            for a, bq in zip(cs, ts):
                for (pa, pb) in _DEP2:
                    flips = []
                    if pa[0] or pa[1]:
                        flips.append((pa[0], pa[1], int(a)))
                    if pb[0] or pb[1]:
                        flips.append((pb[0], pb[1], int(bq)))
                    comp_at[k].append((flips, q2))
        elif kind == "chain":
            _, cum, branches = op
            probs = np.diff(np.concatenate([[0.0], cum]))
            order = len(branches) + 1
            uniform = (probs.max() - probs.min() < 1e-12
                       and order & (order - 1) == 0)
            if uniform:
                qc = _uniform_group_prior(float(probs.sum()), order)
                for br in branches:
                    flips = [(px, pz, qb) for (px, pz), qb in br]
                    comp_at[k].append((flips, qc))
            else:
                # Non-uniform chains keep raw branch probabilities; the
                # independence approximation is then first-order only.
                for br, p in zip(branches, probs):
                    flips = [(px, pz, qb) for (px, pz), qb in br]
                    comp_at[k].append((flips, float(p)))
    return prog, comp_at


def extract_dem(circuit: Circuit) -> DetectorErrorModel:
    """Propagate every elementary fault to its detector/observable signature.

    One bit-parallel pass: each fault owns a bit column; gates act on whole
    rows.  Identical signatures merge with p' = p + q - 2pq; empty signatures
    are dropped.
    """
    prog, comp_at = _enumerate_faults(circuit)
    n_faults = sum(len(c) for c in comp_at)
    w = (n_faults + 63) // 64
    q = circuit.qubit_count
    fx = np.zeros((q, max(w, 1)), dtype=np.uint64)
    fz = np.zeros((q, max(w, 1)), dtype=np.uint64)
    rec = np.zeros((circuit.num_measurements, max(w, 1)), dtype=np.uint64)
    det = np.zeros((circuit.detector_count, max(w, 1)), dtype=np.uint64)
    obs = np.zeros((circuit.observable_count, max(w, 1)), dtype=np.uint64)
    priors = np.empty(n_faults, dtype=np.float64)

    f = 0
    for k, op in enumerate(prog):
        for flips, p in comp_at[k]:
            word, bit = f >> 6, np.uint64(1 << (f & 63))
            for px, pz, qb in flips:
                if px:
                    fx[qb, word] ^= bit
                if pz:
                    fz[qb, word] ^= bit
            priors[f] = p
            f += 1
        kind = op[0]
        if kind == "cx":
            _, cs, ts = op
            fx[ts] ^= fx[cs]
            fz[cs] ^= fz[ts]
        elif kind == "cz":
            _, aa, bb = op
            fz[aa] ^= fx[bb]
            fz[bb] ^= fx[aa]
        elif kind == "h":
            _, qs = op
            tmp = fx[qs].copy()
            fx[qs] = fz[qs]
            fz[qs] = tmp
        elif kind == "reset":
            _, qs = op
            fx[qs] = 0
            fz[qs] = 0
        elif kind == "m":
            _, qs, base = op
            rec[base:base + len(qs)] = fx[qs]
        elif kind == "mx":
            _, qs, base = op
            rec[base:base + len(qs)] = fz[qs]
        elif kind == "condx":
            _, rec_abs, t = op
            fx[t] ^= rec[rec_abs]
        elif kind == "condz":
            _, rec_abs, t = op
            fz[t] ^= rec[rec_abs]
        elif kind == "det":
            _, idxs, d = op
            det[d] = np.bitwise_xor.reduce(rec[idxs], axis=0)
        elif kind == "obs":
            _, idxs, o = op
            obs[o] ^= np.bitwise_xor.reduce(rec[idxs], axis=0)
        # "pauli" (deterministic reference shifts) carry no fault columns

    det_bits = unpack_bits(det, n_faults)   # (D, F)
    obs_bits = unpack_bits(obs, n_faults)   # (K, F)
    sig = np.concatenate([det_bits, obs_bits], axis=0).T  # (F, D+K)
    sig_bytes = np.packbits(sig, axis=1).tobytes()
    stride = (sig.shape[1] + 7) // 8

    merged: dict[bytes, int] = {}
    out_dets, out_obs, out_p = [], [], []
    d_count = circuit.detector_count
    for fi in range(n_faults):
        key = sig_bytes[fi * stride:(fi + 1) * stride]
        j = merged.get(key)
        if j is None:
            ds = tuple(int(x) for x in np.nonzero(det_bits[:, fi])[0])
            os_ = tuple(int(x) for x in np.nonzero(obs_bits[:, fi])[0])
            if not ds and not os_:
                continue
            merged[key] = len(out_p)
            out_dets.append(ds)
            out_obs.append(os_)
            out_p.append(float(priors[fi]))
        else:
            p, qp = out_p[j], float(priors[fi])
            out_p[j] = p + qp - 2 * p * qp
    return DetectorErrorModel(
        d_count,
        circuit.observable_count,
        tuple(out_dets),
        tuple(out_obs),
        np.minimum(np.array(out_p), 0.5),
        metadata={
            "detector_basis": circuit.metadata.get("detector_basis"),
            "code": circuit.metadata.get("code"),
            "mode": circuit.metadata.get("mode"),
            "rounds": circuit.metadata.get("rounds"),
            "basis": circuit.metadata.get("basis"),
        },
    )


# ---------------------------------------------------------------------------
# DEM sampler

def _dem_arrays(dem: DetectorErrorModel):
    """CSR-style flat arrays cached on the DEM for the numba kernel."""
    arrs = dem.metadata.get("_arrays")
    if arrs is None:
        dptr = np.zeros(dem.fault_count + 1, dtype=np.int64)
        optr = np.zeros(dem.fault_count + 1, dtype=np.int64)
        for f in range(dem.fault_count):
            dptr[f + 1] = dptr[f] + len(dem.dets[f])
            optr[f + 1] = optr[f] + len(dem.obs[f])
        dflat = np.array([d for ds in dem.dets for d in ds], dtype=np.int64)
        oflat = np.array([o for os_ in dem.obs for o in os_], dtype=np.int64)
        arrs = (dptr, dflat, optr, oflat, dem.priors.astype(np.float64))
        dem.metadata["_arrays"] = arrs
    return arrs


def dem_sample(
    dem: DetectorErrorModel,
    shots: int,
    seed: int,
    batch_shots: int = BATCH_SHOTS,
    first_batch: int = 0,
) -> FrameSample:
    """Fire each fault independently with its prior; XOR signatures.

    Same batching/keying scheme as ``frame_sample``; a geometric-jump
    counter-based generator gives each (batch, fault) pair its own stream.
    """
    from ._rngkernels import scatter_faults  # deferred: numba compile cost

    if shots < 1:
        raise ValueError("shots must be >= 1")
    dptr, dflat, optr, oflat, priors = _dem_arrays(dem)
    parts = []
    done, batch = 0, first_batch
    while done < shots:
        take = min(batch_shots, shots - done)
        w = (take + 63) // 64
        det = np.zeros((dem.detector_count, w), dtype=np.uint64)
        obs = np.zeros((dem.observable_count, w), dtype=np.uint64)
        scatter_faults(det, obs, dptr, dflat, optr, oflat, priors,
                       take, np.uint64(seed), np.uint64(batch))
        parts.append(FrameSample(take, det, obs))
        done += take
        batch += 1
    return FrameSample.concatenate(parts)
