"""Noisy Clifford circuits, network bridge gadgets, and circuit builders.

Circuits are flat instruction lists in the de-facto stabilizer-circuit text
vocabulary (R/RX, H, CX, CZ, M/MX, X_ERROR, Z_ERROR, DEPOLARIZE1/2,
E/ELSE_CORRELATED_ERROR, record-controlled CX/CZ, DETECTOR,
OBSERVABLE_INCLUDE, TICK).  Builders produce syndrome-extraction memory
experiments in four flavors: monolithic surface, GHZ-networked surface,
monolithic BB, and bipartitioned BB with teleported-CNOT bridges.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field, replace

import numpy as np

from .codes import CssCode, build_surface_code, monomial_perm, surface_layout
from .partition import Partition


class CircuitError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Instruction and circuit types

GATE_1Q = frozenset({"R", "RX", "H", "X", "Y", "Z"})
GATE_2Q = frozenset({"CX", "CZ"})
MEASUREMENTS = frozenset({"M", "MX"})
NOISE_1Q = frozenset({"X_ERROR", "Z_ERROR", "DEPOLARIZE1"})
NOISE_2Q = frozenset({"DEPOLARIZE2"})
CORRELATED = frozenset({"E", "ELSE_CORRELATED_ERROR"})
ANNOTATIONS = frozenset({"DETECTOR", "OBSERVABLE_INCLUDE", "TICK"})
OPCODES = GATE_1Q | GATE_2Q | MEASUREMENTS | NOISE_1Q | NOISE_2Q | CORRELATED | ANNOTATIONS


@dataclass(frozen=True)
class Rec:
    """Backward reference into the measurement record (offset < 0)."""

    offset: int

    def __post_init__(self):
        if self.offset >= 0:
            raise CircuitError(f"record offset must be negative, got {self.offset}")

    def __str__(self):
        return f"rec[{self.offset}]"


@dataclass(frozen=True)
class PauliTarget:
    """Pauli-tagged qubit target for correlated-error instructions."""

    pauli: str  # "X", "Y", or "Z"
    qubit: int

    def __post_init__(self):
        if self.pauli not in ("X", "Y", "Z"):
            raise CircuitError(f"bad Pauli tag {self.pauli!r}")

    def __str__(self):
        return f"{self.pauli}{self.qubit}"


@dataclass(frozen=True)
class Instruction:
    name: str
    targets: tuple = ()
    args: tuple = ()

    def __str__(self):
        out = self.name
        if self.args:
            body = ", ".join(_format_arg(self.name, a) for a in self.args)
            out += f"({body})"
        if self.targets:
            out += " " + " ".join(str(t) for t in self.targets)
        return out


def _format_arg(name: str, a) -> str:
    if name == "OBSERVABLE_INCLUDE":
        return str(int(a))
    return repr(float(a))


@dataclass(frozen=True)
class Circuit:
    """Immutable instruction sequence with validated record references.

    ``metadata`` carries builder-side annotations (detector bases, ideal-prep
    instruction ranges, Bell-channel indices); public entries survive the text
    round trip via the header comment, and the dict is excluded from equality.
    """

    instructions: tuple[Instruction, ...]
    qubit_count: int = 0
    metadata: dict = field(default_factory=dict, compare=False)

    num_measurements: int = field(init=False, compare=False, default=0)
    detector_count: int = field(init=False, compare=False, default=0)
    observable_count: int = field(init=False, compare=False, default=0)

    def __post_init__(self):
        n_meas = n_det = 0
        max_obs = -1
        max_q = self.qubit_count - 1
        for ins in self.instructions:
            if ins.name not in OPCODES:
                raise CircuitError(f"unknown opcode {ins.name!r}")
            for a in ins.args:
                if ins.name != "OBSERVABLE_INCLUDE" and not 0 <= a <= 1:
                    raise CircuitError(f"probability {a} outside [0, 1] in {ins.name}")
            for t in ins.targets:
                if isinstance(t, Rec):
                    if n_meas + t.offset < 0:
                        raise CircuitError(
                            f"dangling record reference rec[{t.offset}] "
                            f"with only {n_meas} prior measurements"
                        )
                elif isinstance(t, PauliTarget):
                    max_q = max(max_q, t.qubit)
                else:
                    max_q = max(max_q, int(t))
            if ins.name in MEASUREMENTS:
                n_meas += len(ins.targets)
            elif ins.name == "DETECTOR":
                n_det += 1
            elif ins.name == "OBSERVABLE_INCLUDE":
                max_obs = max(max_obs, int(ins.args[0]))
            if ins.name in GATE_2Q and len(ins.targets) % 2:
                raise CircuitError(f"{ins.name} needs an even number of targets")
        object.__setattr__(self, "num_measurements", n_meas)
        object.__setattr__(self, "detector_count", n_det)
        object.__setattr__(self, "observable_count", max_obs + 1)
        object.__setattr__(self, "qubit_count", max_q + 1)

    def __len__(self):
        return len(self.instructions)

    def layers(self):
        """Instruction runs between TICKs (TICK itself excluded)."""
        out, cur = [], []
        for ins in self.instructions:
            if ins.name == "TICK":
                out.append(cur)
                cur = []
            else:
                cur.append(ins)
        out.append(cur)
        return out


# ---------------------------------------------------------------------------
# Noise model

@dataclass(frozen=True)
class NoiseModel:
    """Circuit-level depolarizing noise rates.

    ``p`` is the base rate; gate/measure/reset/idle rates default to it and may
    be overridden individually.  ``p_ghz`` is the total non-identity Pauli
    probability after GHZ preparation; ``p_bell`` the two-qubit depolarizing
    rate on each consumed Bell pair.
    """

    p: float = 0.0
    p_g: float | None = None
    p_m: float | None = None
    p_r: float | None = None
    p_idle: float | None = None
    p_ghz: float = 0.0
    p_bell: float = 0.0

    def __post_init__(self):
        for name in ("p_g", "p_m", "p_r", "p_idle"):
            if getattr(self, name) is None:
                object.__setattr__(self, name, self.p)
        for name in ("p", "p_g", "p_m", "p_r", "p_idle", "p_ghz", "p_bell"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise CircuitError(f"{name}={v} outside [0, 1]")

    @classmethod
    def zero(cls) -> "NoiseModel":
        return cls()

    def with_(self, **kw) -> "NoiseModel":
        return replace(self, **kw)


def bell_fidelity_to_p(f: float) -> float:
    """Depolarizing rate of a Werner Bell pair of fidelity ``f``:
    p_bell = (5/4)(1 - f), valid for f in [0.2, 1]."""
    if not 0.2 <= f <= 1.0:
        raise CircuitError(f"fidelity {f} maps to a rate outside [0, 1]")
    # round away the binary representation dust so 0.96 -> 0.05 exactly
    return round(1.25 * (1.0 - f), 15)


# ---------------------------------------------------------------------------
# Text round trip

def circuit_to_text(circuit: Circuit) -> str:
    """Plain-text form: one metadata header comment, one instruction per line."""
    lines = []
    meta = {k: v for k, v in circuit.metadata.items()
            if not k.startswith("_")}
    if meta:
        lines.append("# meta: " + json.dumps(meta, sort_keys=True))
    lines.extend(str(ins) for ins in circuit.instructions)
    return "\n".join(lines) + "\n"


_INS_RE = re.compile(r"^\s*([A-Z_0-9]+)\s*(?:\(([^)]*)\))?\s*(.*?)\s*$")
_REC_RE = re.compile(r"^rec\[(-\d+)\]$")
_PAULI_RE = re.compile(r"^([XYZ])(\d+)$")


def _parse_target(tok: str):
    m = _REC_RE.match(tok)
    if m:
        return Rec(int(m.group(1)))
    m = _PAULI_RE.match(tok)
    if m:
        return PauliTarget(m.group(1), int(m.group(2)))
    if tok.isdigit():
        return int(tok)
    raise CircuitError(f"bad target {tok!r}")


_TUPLED_META = ("detector_basis", "bell_indices", "ideal_blocks")


def circuit_from_text(text: str) -> Circuit:
    instructions = []
    metadata: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if stripped.startswith("# meta: "):
            try:
                metadata = json.loads(stripped[len("# meta: "):])
            except json.JSONDecodeError as e:
                raise CircuitError(f"line {lineno}: bad metadata header ({e})")
            for key in _TUPLED_META:
                if key in metadata and metadata[key] is not None:
                    metadata[key] = tuple(
                        tuple(v) if isinstance(v, list) else v
                        for v in metadata[key]
                    )
            continue
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _INS_RE.match(line)
        if not m:
            raise CircuitError(f"line {lineno}: unparseable instruction {raw!r}")
        name, args_s, targets_s = m.groups()
        if name not in OPCODES:
            raise CircuitError(f"line {lineno}: unknown opcode {name!r}")
        args = tuple(float(a) for a in args_s.split(",")) if args_s else ()
        try:
            targets = tuple(_parse_target(t) for t in targets_s.split()) if targets_s else ()
        except CircuitError as e:
            raise CircuitError(f"line {lineno}: {e}")
        instructions.append(Instruction(name, targets, args))
    return Circuit(tuple(instructions), metadata=metadata)


# ---------------------------------------------------------------------------
# Correlated GHZ noise channel

_PAULI_CHARS = ("X", "Y", "Z")


def ghz_noise_chain(qubits, p_ghz: float) -> list[Instruction]:
    """Uniform non-identity w-qubit Pauli with total probability ``p_ghz``.

    Encoded as an E / ELSE_CORRELATED_ERROR cascade; each instruction stores
    its *conditional* probability, so emitted text is stable under round trip.
    """
    w = len(qubits)
    if p_ghz <= 0:
        return []
    n_paulis = 4**w - 1
    p_each = p_ghz / n_paulis
    out = []
    for i in range(n_paulis):
        digits, x = [], i + 1
        for _ in range(w):
            digits.append(x & 3)
            x >>= 2
        targets = tuple(
            PauliTarget(_PAULI_CHARS[dg - 1], q)
            for dg, q in zip(digits, qubits)
            if dg
        )
        cond = p_each / (1.0 - i * p_each)
        name = "E" if i == 0 else "ELSE_CORRELATED_ERROR"
        out.append(Instruction(name, targets, (cond,)))
    return out


def chain_branch_probs(chain: list[Instruction]) -> np.ndarray:
    """Unconditional firing probability of each branch of an E/ELSE cascade."""
    probs, stay = [], 1.0
    for ins in chain:
        c = ins.args[0]
        probs.append(stay * c)
        stay *= 1.0 - c
    return np.asarray(probs)


# ---------------------------------------------------------------------------
# Bridge gadgets

def teleported_cnot_gadget(
    control: int,
    target: int,
    ancilla_a: int,
    ancilla_b: int,
    p_bell: float,
    local_noise: NoiseModel | None = None,
) -> list[Instruction]:
    """Remote CNOT via one consumed Bell pair plus feed-forward.

    Bell preparation is ideal (the network black box); its infidelity enters
    solely through the DEPOLARIZE2(p_bell) that follows.  Local gates and
    measurements carry the local noise model.  Net noiseless action is
    CNOT(control -> target).
    """
    qs = (control, target, ancilla_a, ancilla_b)
    if len(set(qs)) != 4:
        raise CircuitError(f"qubit collision in teleported CNOT: {qs}")
    nm = local_noise or NoiseModel.zero()
    a, b = ancilla_a, ancilla_b
    out = [
        Instruction("R", (a, b)),
        Instruction("H", (a,)),
        Instruction("CX", (a, b)),
        Instruction("DEPOLARIZE2", (a, b), (p_bell,)),
        Instruction("CX", (control, a)),
    ]
    if nm.p_g:
        out.append(Instruction("DEPOLARIZE2", (control, a), (nm.p_g,)))
    if nm.p_m:
        out.append(Instruction("X_ERROR", (a,), (nm.p_m,)))
    out.append(Instruction("M", (a,)))
    out.append(Instruction("CX", (b, target)))
    if nm.p_g:
        out.append(Instruction("DEPOLARIZE2", (b, target), (nm.p_g,)))
    if nm.p_m:
        out.append(Instruction("Z_ERROR", (b,), (nm.p_m,)))
    out.append(Instruction("MX", (b,)))
    out.append(Instruction("CX", (Rec(-2), target)))
    out.append(Instruction("CZ", (Rec(-1), control)))
    return out


def _ghz_prep(legs, pauli_type: str) -> list[Instruction]:
    """Ideal GHZ resource: plain for X-parity readout, Hadamard-rotated
    (stabilized by Z^w and X_i X_{i+1}) for Z-parity readout."""
    out = [Instruction("R", tuple(legs)), Instruction("H", (legs[0],))]
    for leg in legs[1:]:
        out.append(Instruction("CX", (legs[0], leg)))
    if pauli_type == "Z":
        out.append(Instruction("H", tuple(legs)))
    return out


def ghz_measure_gadget(
    data_qubits,
    pauli_type: str,
    ghz_qubits,
    p_ghz: float,
    local_noise: NoiseModel | None = None,
) -> tuple[list[Instruction], tuple[int, ...]]:
    """Measure a weight-w X- or Z-stabilizer via a w-qubit GHZ resource.

    Returns (instructions, record offsets) where the stabilizer outcome is the
    parity of the referenced measurements.  One CNOT couples each (data, leg)
    pair: leg->data for X stabilizers, data->leg for Z stabilizers; legs are
    then read out transversally (MX for X type, M for Z type).
    """
    data_qubits, ghz_qubits = list(data_qubits), list(ghz_qubits)
    if pauli_type not in ("X", "Z"):
        raise CircuitError(f"pauli_type must be X or Z, got {pauli_type!r}")
    if len(data_qubits) != len(ghz_qubits):
        raise CircuitError(
            f"{len(data_qubits)} data qubits vs {len(ghz_qubits)} GHZ qubits"
        )
    if set(data_qubits) & set(ghz_qubits):
        raise CircuitError("data and GHZ qubits overlap")
    w = len(ghz_qubits)
    nm = local_noise or NoiseModel.zero()
    out = _ghz_prep(ghz_qubits, pauli_type)
    out.extend(ghz_noise_chain(ghz_qubits, p_ghz))
    pairs = []
    for dq, leg in zip(data_qubits, ghz_qubits):
        pairs.extend((leg, dq) if pauli_type == "X" else (dq, leg))
    out.append(Instruction("CX", tuple(pairs)))
    if nm.p_g:
        out.append(Instruction("DEPOLARIZE2", tuple(pairs), (nm.p_g,)))
    flip = "Z_ERROR" if pauli_type == "X" else "X_ERROR"
    if nm.p_m:
        out.append(Instruction(flip, tuple(ghz_qubits), (nm.p_m,)))
    out.append(Instruction("MX" if pauli_type == "X" else "M", tuple(ghz_qubits)))
    return out, tuple(range(-w, 0))


# ---------------------------------------------------------------------------
# Builder plumbing

class _Builder:
    def __init__(self):
        self.ins: list[Instruction] = []
        self.n_meas = 0
        self.detector_basis: list[str] = []
        self.bell_indices: list[int] = []
        self.ideal_blocks: list[tuple[int, int]] = []
        self._ideal_from: int | None = None
        self._bell_pending = False

    def emit(self, name, targets=(), args=()):
        self.ins.append(Instruction(name, tuple(targets), tuple(args)))
        if name in MEASUREMENTS:
            self.n_meas += len(targets)

    def extend(self, instructions):
        for ins in instructions:
            if ins.name == "DEPOLARIZE2" and self._bell_pending:
                # first DEPOLARIZE2 of a gadget block is the Bell channel
                self.bell_indices.append(len(self.ins))
                self._bell_pending = False
            self.ins.append(ins)
            if ins.name in MEASUREMENTS:
                self.n_meas += len(ins.targets)

    def measure(self, name: str, qubits, flip_p: float) -> list[int]:
        """Emit a (noisy) transversal measurement; return absolute record
        indices in target order."""
        qubits = list(qubits)
        if not qubits:
            return []
        if flip_p:
            flip = "X_ERROR" if name == "M" else "Z_ERROR"
            self.emit(flip, qubits, (flip_p,))
        base = self.n_meas
        self.emit(name, qubits)
        return list(range(base, base + len(qubits)))

    def reset(self, name: str, qubits, flip_p: float):
        qubits = list(qubits)
        if not qubits:
            return
        self.emit(name, qubits)
        if flip_p:
            flip = "X_ERROR" if name == "R" else "Z_ERROR"
            self.emit(flip, qubits, (flip_p,))

    def detector(self, abs_recs, basis: str):
        self.emit("DETECTOR", tuple(Rec(r - self.n_meas) for r in sorted(abs_recs)))
        self.detector_basis.append(basis)

    def observable(self, index: int, abs_recs):
        self.emit(
            "OBSERVABLE_INCLUDE",
            tuple(Rec(r - self.n_meas) for r in sorted(abs_recs)),
            (float(index),),
        )

    def idle_tick(self, idle_qubits, p_idle: float):
        idle_qubits = sorted(idle_qubits)
        if p_idle and idle_qubits:
            self.emit("DEPOLARIZE1", idle_qubits, (p_idle,))
        self.emit("TICK")

    def ideal_begin(self):
        self._ideal_from = len(self.ins)

    def ideal_end(self):
        self.ideal_blocks.append((self._ideal_from, len(self.ins)))
        self._ideal_from = None

    def finish(self, qubit_count: int, **metadata) -> Circuit:
        metadata.setdefault("detector_basis", tuple(self.detector_basis))
        metadata.setdefault("bell_indices", tuple(self.bell_indices))
        metadata.setdefault("ideal_blocks", tuple(self.ideal_blocks))
        return Circuit(tuple(self.ins), qubit_count, metadata)


def _emit_pairs(b: _Builder, pairs, p_g: float):
    """One CX layer over disjoint pairs, with its depolarizing noise."""
    if not pairs:
        return
    flat = [q for pair in pairs for q in pair]
    b.emit("CX", flat)
    if p_g:
        b.emit("DEPOLARIZE2", flat, (p_g,))


# ---------------------------------------------------------------------------
# Surface-code builder

_DIRECTIONS = ((-1, 0), (0, -1), (0, 1), (1, 0))  # N, W, E, S


def _surface_geometry(d: int):
    lay = surface_layout(d)
    size = lay["size"]

    def gid(pos):
        return pos[0] * size + pos[1]

    data_gid = [gid(p) for p in lay["data"]]
    gid_to_data = {g: q for q, g in enumerate(data_gid)}
    checks = {}  # basis -> list of (ancilla gid, neighbor data gids by direction)
    for basis, key in (("X", "xchecks"), ("Z", "zchecks")):
        entries = []
        for pos in lay[key]:
            nbrs = []
            for di, dj in _DIRECTIONS:
                p = (pos[0] + di, pos[1] + dj)
                nbrs.append(gid(p) if p in lay["data_index"] else None)
            entries.append((gid(pos), nbrs))
        checks[basis] = entries
    return size, data_gid, gid_to_data, checks


def _projection_round(b: _Builder, checks, other: str, data_reset=None, bb_pairs=None,
                      extra_reset=None):
    """Ideal (noiseless) initialization: reset the data register and measure
    the non-memory-basis checks once to project into the code space."""
    b.ideal_begin()
    if data_reset is not None:
        b.emit(*data_reset)
    ancs = [anc for anc, _ in checks]
    b.emit("RX" if other == "X" else "R", ancs)
    if bb_pairs is not None:
        for pairs in bb_pairs:
            if pairs:
                b.emit("CX", [q for pr in pairs for q in pr])
    else:
        for dirn in range(4):
            pairs = []
            for anc, nbrs in checks:
                if nbrs[dirn] is not None:
                    pairs.append((anc, nbrs[dirn]) if other == "X" else (nbrs[dirn], anc))
            if pairs:
                b.emit("CX", [q for pr in pairs for q in pr])
    recs = b.measure("MX" if other == "X" else "M", ancs, 0.0)
    if extra_reset is not None:
        b.emit(*extra_reset)
    b.ideal_end()
    b.emit("TICK")
    return {i: [r] for i, r in enumerate(recs)}


def _round_detectors(b: _Builder, rnd, prev, cur, basis_of, memory_basis):
    for key in sorted(cur, key=lambda k: (basis_of[k] != "X", k)):
        chk_basis = basis_of[key]
        if chk_basis == memory_basis and rnd == 1:
            b.detector(cur[key], chk_basis)  # anchored to the ideal projection
        else:
            b.detector(prev[key] + cur[key], chk_basis)


def build_surface_circuit(
    d: int,
    rounds: int,
    noise: NoiseModel,
    networked: bool = False,
    basis: str = "Z",
) -> Circuit:
    """Planar surface-code memory experiment.

    ``rounds`` noisy syndrome cycles follow an ideal projection round; X and Z
    stabilizers interact on even and odd ticks respectively (N, W, E, S
    neighbor order), which keeps every tick collision-free.  When
    ``networked`` is set, every stabilizer is read out through a GHZ gadget
    whose legs replace the local ancilla.
    """
    if basis not in ("X", "Z"):
        raise CircuitError(f"basis must be X or Z, got {basis!r}")
    if rounds < 1:
        raise CircuitError("rounds must be >= 1")
    # Surface-code noise: faulty gates, measurements, and resets only.  Idle
    # depolarization is a property of the BB-code model, not this one; with
    # ~10 steps per cycle it would otherwise dominate the budget and push the
    # threshold far below the established circuit-level value.
    noise = noise.with_(p_idle=0.0)
    code = build_surface_code(d)
    size, data_gid, gid_to_data, checks = _surface_geometry(d)
    other = "X" if basis == "Z" else "Z"
    basis_of = {}
    check_list = []  # (key, basis, anc, nbrs)
    for chk_basis in ("X", "Z"):
        for i, (anc, nbrs) in enumerate(checks[chk_basis]):
            key = (chk_basis, i)
            basis_of[key] = chk_basis
            check_list.append((key, chk_basis, anc, nbrs))

    qubit_count = size * size
    legs = {}
    if networked:
        for key, _, _, nbrs in check_list:
            w = sum(n is not None for n in nbrs)
            legs[key] = list(range(qubit_count, qubit_count + w))
            qubit_count += w
        leg_of_dir = {
            key: {
                dirn: legs[key][sum(n is not None for n in nbrs[:dirn])]
                for dirn, n in enumerate(nbrs)
                if n is not None
            }
            for key, _, _, nbrs in check_list
        }
    active = set(data_gid)
    for key, _, anc, _ in check_list:
        if networked:
            active.update(legs[key])
        else:
            active.add(anc)

    b = _Builder()
    prev = {
        (other, i): r
        for i, r in _projection_round(
            b, checks[other], other,
            data_reset=("R" if basis == "Z" else "RX", data_gid),
        ).items()
    }

    for rnd in range(1, rounds + 1):
        touched = set()
        # --- prep tick
        if networked:
            for key, chk_basis, _, _ in check_list:
                b.ideal_begin()
                for ins in _ghz_prep(legs[key], chk_basis):
                    b.emit(ins.name, ins.targets, ins.args)
                b.ideal_end()
                for ins in ghz_noise_chain(legs[key], noise.p_ghz):
                    b.emit(ins.name, ins.targets, ins.args)
                touched.update(legs[key])
        else:
            x_ancs = [anc for anc, _ in checks["X"]]
            z_ancs = [anc for anc, _ in checks["Z"]]
            b.reset("RX", x_ancs, noise.p_r)
            b.reset("R", z_ancs, noise.p_r)
            touched.update(x_ancs + z_ancs)
        b.idle_tick(active - touched, noise.p_idle)

        # --- eight interaction ticks: X on even, Z on odd
        for tick in range(8):
            chk_basis = "X" if tick % 2 == 0 else "Z"
            dirn = tick // 2
            pairs, touched = [], set()
            for i, (anc, nbrs) in enumerate(checks[chk_basis]):
                dq = nbrs[dirn]
                if dq is None:
                    continue
                src = leg_of_dir[(chk_basis, i)][dirn] if networked else anc
                pairs.append((src, dq) if chk_basis == "X" else (dq, src))
            _emit_pairs(b, pairs, noise.p_g)
            touched.update(q for pr in pairs for q in pr)
            b.idle_tick(active - touched, noise.p_idle)

        # --- measure tick
        cur, touched = {}, set()
        for chk_basis in ("X", "Z"):
            if networked:
                all_legs = [q for i in range(len(checks[chk_basis]))
                            for q in legs[(chk_basis, i)]]
                recs = b.measure("MX" if chk_basis == "X" else "M",
                                 all_legs, noise.p_m)
                pos = 0
                for i in range(len(checks[chk_basis])):
                    w = len(legs[(chk_basis, i)])
                    cur[(chk_basis, i)] = recs[pos:pos + w]
                    pos += w
                touched.update(all_legs)
            else:
                ancs = [anc for anc, _ in checks[chk_basis]]
                recs = b.measure("MX" if chk_basis == "X" else "M", ancs, noise.p_m)
                for i, r in enumerate(recs):
                    cur[(chk_basis, i)] = [r]
                touched.update(ancs)
        _round_detectors(b, rnd, prev, cur, basis_of, basis)
        b.idle_tick(active - touched, noise.p_idle)
        prev = cur

    # --- transversal data readout
    data_recs = b.measure("M" if basis == "Z" else "MX", data_gid, noise.p_m)
    rec_of_data = {g: r for g, r in zip(data_gid, data_recs)}
    for i, (anc, nbrs) in enumerate(checks[basis]):
        support = [rec_of_data[g] for g in nbrs if g is not None]
        b.detector(prev[(basis, i)] + support, basis)
    x_op, z_op = code.logicals[0]
    op = z_op if basis == "Z" else x_op
    b.observable(0, [rec_of_data[data_gid[q]] for q in op])

    return b.finish(
        qubit_count,
        code=f"surface_d{d}",
        mode="networked" if networked else "monolithic",
        d=d,
        rounds=rounds,
        basis=basis,
        distance=d,
    )


# ---------------------------------------------------------------------------
# BB-code builder

# Depth-8 interaction schedule: entry t gives the neighbor-term index gated at
# tick t (None = idle).  X-checks: 0..2 = A1..A3 (left data half), 3..5 =
# B1..B3 (right half).  Z-checks: 0..2 = B1^T..B3^T (left), 3..5 = A1^T..A3^T
# (right).  At every tick the X and Z sides touch opposite halves, so no data
# qubit sees two gates in one layer.
BB_SCHEDULE_X = (None, 1, 4, 3, 5, 0, 2, None)
BB_SCHEDULE_Z = (3, 5, 0, 1, 2, 4, None, None)


def _bb_neighbors(code: CssCode):
    """neighbors[basis][check][term] = data qubit index, per schedule order."""
    spec = code.metadata.get("spec")
    if spec is None:
        raise CircuitError("BB circuit needs a code built from a BBSpec")
    lm = spec.ell * spec.m
    a_perm = [monomial_perm(spec, t) for t in spec.a_terms]
    b_perm = [monomial_perm(spec, t) for t in spec.b_terms]
    a_inv = [np.argsort(p) for p in a_perm]
    b_inv = [np.argsort(p) for p in b_perm]
    x_nbrs = [
        [int(a_perm[j][r]) for j in range(3)] + [lm + int(b_perm[j][r]) for j in range(3)]
        for r in range(lm)
    ]
    z_nbrs = [
        [int(b_inv[j][r]) for j in range(3)] + [lm + int(a_inv[j][r]) for j in range(3)]
        for r in range(lm)
    ]
    return {"X": x_nbrs, "Z": z_nbrs}


def _bb_partition_nodes(code: CssCode, partition: Partition):
    if (
        partition.n_data != code.n
        or partition.n_xchecks != code.hx.rows
        or partition.n_zchecks != code.hz.rows
    ):
        raise CircuitError(
            "partition vertex set mismatch: partition covers "
            f"({partition.n_data}, {partition.n_xchecks}, {partition.n_zchecks}) "
            f"vertices, code has ({code.n}, {code.hx.rows}, {code.hz.rows})"
        )
    a = partition.assignment
    return (
        a[: code.n],
        a[code.n: code.n + code.hx.rows],
        a[code.n + code.hx.rows:],
    )


def build_bb_circuit(
    code: CssCode,
    rounds: int,
    noise: NoiseModel,
    partition: Partition | None = None,
    basis: str = "Z",
) -> Circuit:
    """BB-code memory experiment with the depth-8 syndrome-extraction cycle.

    With a partition, every check-data interaction whose endpoints live on
    different nodes runs through a teleported CNOT consuming one Bell pair;
    everything else is unchanged, so the Bell channel count per round equals
    the partition's cut size exactly.
    """
    if basis not in ("X", "Z"):
        raise CircuitError(f"basis must be X or Z, got {basis!r}")
    if rounds < 1:
        raise CircuitError("rounds must be >= 1")
    nbrs = _bb_neighbors(code)
    n, rx, rz = code.n, code.hx.rows, code.hz.rows
    x_anc = [n + i for i in range(rx)]
    z_anc = [n + rx + i for i in range(rz)]
    other = "X" if basis == "Z" else "Z"

    cut = {}  # (basis, check, term) -> (bell_a, bell_b)
    if partition is not None:
        node_d, node_x, node_z = _bb_partition_nodes(code, partition)
        base = n + rx + rz
        for chk_basis, node_c in (("X", node_x), ("Z", node_z)):
            for i in range(rx if chk_basis == "X" else rz):
                for j, dq in enumerate(nbrs[chk_basis][i]):
                    if node_c[i] != node_d[dq]:
                        cut[(chk_basis, i, j)] = (base, base + 1)
                        base += 2
        qubit_count = base
    else:
        qubit_count = n + rx + rz
    active = set(range(n)) | set(x_anc) | set(z_anc)

    b = _Builder()
    other_checks = [
        (x_anc[i] if other == "X" else z_anc[i], None)
        for i in range(rx if other == "X" else rz)
    ]
    sched = BB_SCHEDULE_X if other == "X" else BB_SCHEDULE_Z
    proj_pairs = []
    for t in range(8):
        j = sched[t]
        if j is None:
            continue
        pairs = []
        for i, (anc, _) in enumerate(other_checks):
            dq = nbrs[other][i][j]
            pairs.append((anc, dq) if other == "X" else (dq, anc))
        proj_pairs.append(pairs)
    prev = {
        (other, i): r
        for i, r in _projection_round(
            b, other_checks, other,
            data_reset=("R" if basis == "Z" else "RX", list(range(n))),
            bb_pairs=proj_pairs,
            extra_reset=("R", z_anc),  # Z ancillas enter round 1 fresh
        ).items()
    }
    basis_of = {("X", i): "X" for i in range(rx)}
    basis_of.update({("Z", i): "Z" for i in range(rz)})

    # Eight ticks per round: ancilla reset and readout occupy the slots the
    # interaction schedule leaves empty (X resets at tick 0 and is read out at
    # tick 7; Z is read out at tick 6 and re-reset at tick 7 for the next
    # round), so a round has no dead layer.
    for rnd in range(1, rounds + 1):
        cur = {}
        for t in range(8):
            touched = set()
            local_pairs = []
            gadgets = []
            for chk_basis, sched_j, ancs in (
                ("X", BB_SCHEDULE_X[t], x_anc),
                ("Z", BB_SCHEDULE_Z[t], z_anc),
            ):
                if sched_j is None:
                    continue
                for i, anc in enumerate(ancs):
                    dq = nbrs[chk_basis][i][sched_j]
                    ctrl, tgt = (anc, dq) if chk_basis == "X" else (dq, anc)
                    pair_key = (chk_basis, i, sched_j)
                    if pair_key in cut:
                        gadgets.append((ctrl, tgt, cut[pair_key]))
                    else:
                        local_pairs.append((ctrl, tgt))
                    touched.update((anc, dq))
            if t == 0:
                b.reset("RX", x_anc, noise.p_r)
                touched.update(x_anc)
            elif t == 6:
                recs = b.measure("M", z_anc, noise.p_m)
                cur.update({("Z", i): [r] for i, r in enumerate(recs)})
                touched.update(z_anc)
            elif t == 7:
                recs = b.measure("MX", x_anc, noise.p_m)
                cur.update({("X", i): [r] for i, r in enumerate(recs)})
                touched.update(x_anc)
                if rnd < rounds:
                    b.reset("R", z_anc, noise.p_r)
                    touched.update(z_anc)
            _emit_pairs(b, local_pairs, noise.p_g)
            for ctrl, tgt, (ba, bb_) in gadgets:
                b._bell_pending = True
                block = teleported_cnot_gadget(ctrl, tgt, ba, bb_, noise.p_bell, noise)
                start = len(b.ins)
                b.extend(block)
                b.ideal_blocks.append((start, start + 3))  # R/H/CX Bell prep
            if t == 7:
                _round_detectors(b, rnd, prev, cur, basis_of, basis)
            b.idle_tick(active - touched, noise.p_idle)
        prev = cur

    # --- transversal data readout
    data_recs = b.measure("M" if basis == "Z" else "MX", list(range(n)), noise.p_m)
    h = code.hz if basis == "Z" else code.hx
    for i in range(h.rows):
        b.detector(prev[(basis, i)] + [data_recs[q] for q in h.row_support(i)], basis)
    for li, (x_op, z_op) in enumerate(code.logicals):
        op = z_op if basis == "Z" else x_op
        b.observable(li, [data_recs[q] for q in sorted(op)])

    return b.finish(
        qubit_count,
        code=code.name,
        mode="partitioned" if partition is not None else "monolithic",
        rounds=rounds,
        basis=basis,
        distance=code.d,
        e_cut=len(cut),
    )
