"""Reference stabilizer-tableau simulator (test oracle, not a workhorse).

Aaronson-Gottesman tableau over numpy bool arrays: n destabilizer rows, n
stabilizer rows, phase column.  Used by the test suite to validate gadget
identities and small built circuits against an implementation that shares no
code with the Pauli-frame sampler.  Scales to a few dozen qubits.
"""

from __future__ import annotations

import numpy as np

from .circuit import Circuit, Instruction, PauliTarget, Rec, chain_branch_probs


class Tableau:
    """State tableau for |0...0> on n qubits."""

    def __init__(self, n: int):
        self.n = n
        self.x = np.zeros((2 * n, n), dtype=bool)
        self.z = np.zeros((2 * n, n), dtype=bool)
        self.r = np.zeros(2 * n, dtype=bool)
        self.x[np.arange(n), np.arange(n)] = True          # destabilizers X_i
        self.z[np.arange(n, 2 * n), np.arange(n)] = True   # stabilizers Z_i

    def copy(self) -> "Tableau":
        t = Tableau.__new__(Tableau)
        t.n = self.n
        t.x, t.z, t.r = self.x.copy(), self.z.copy(), self.r.copy()
        return t

    # -- gates ------------------------------------------------------------

    def h(self, q: int):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.x[:, q], self.z[:, q] = self.z[:, q].copy(), self.x[:, q].copy()

    def s(self, q: int):
        self.r ^= self.x[:, q] & self.z[:, q]
        self.z[:, q] ^= self.x[:, q]

    def cx(self, c: int, t: int):
        self.r ^= self.x[:, c] & self.z[:, t] & (self.x[:, t] ^ self.z[:, c] ^ True)
        self.x[:, t] ^= self.x[:, c]
        self.z[:, c] ^= self.z[:, t]

    def cz(self, a: int, b: int):
        self.h(b)
        self.cx(a, b)
        self.h(b)

    def pauli_x(self, q: int):
        self.r ^= self.z[:, q]

    def pauli_z(self, q: int):
        self.r ^= self.x[:, q]

    def pauli_y(self, q: int):
        self.r ^= self.x[:, q] ^ self.z[:, q]

    # -- row algebra (CHP-style) ------------------------------------------

    def _g_sum(self, h: int, i: int) -> int:
        """Phase exponent contribution of multiplying row i into row h."""
        x1, z1 = self.x[i], self.z[i]
        x2, z2 = self.x[h], self.z[h]
        # g((x1,z1),(x2,z2)) summed over qubits, mod 4 bookkeeping
        g = np.zeros(self.n, dtype=np.int64)
        m = x1 & z1
        g[m] = (z2.astype(np.int64) - x2.astype(np.int64))[m]
        m = x1 & ~z1
        g[m] = (z2.astype(np.int64) * (2 * x2.astype(np.int64) - 1))[m]
        m = ~x1 & z1
        g[m] = (x2.astype(np.int64) * (1 - 2 * z2.astype(np.int64)))[m]
        return int(g.sum())

    def rowsum(self, h: int, i: int):
        tot = 2 * int(self.r[h]) + 2 * int(self.r[i]) + self._g_sum(h, i)
        self.r[h] = (tot % 4) // 2
        self.x[h] ^= self.x[i]
        self.z[h] ^= self.z[i]

    # -- measurement ------------------------------------------------------

    def measure(self, q: int, rng: np.random.Generator, forced: int | None = None) -> int:
        n = self.n
        stab_x = np.nonzero(self.x[n:, q])[0]
        if stab_x.size:  # random outcome
            p = int(stab_x[0]) + n
            for i in np.nonzero(self.x[:, q])[0]:
                if i != p:
                    self.rowsum(int(i), p)
            self.x[p - n], self.z[p - n], self.r[p - n] = (
                self.x[p].copy(), self.z[p].copy(), self.r[p],
            )
            out = int(rng.integers(2)) if forced is None else forced
            self.x[p] = False
            self.z[p] = False
            self.z[p, q] = True
            self.r[p] = bool(out)
            return out
        # deterministic: accumulate destabilizer phases in a scratch row
        sx = np.zeros(self.n, dtype=bool)
        sz = np.zeros(self.n, dtype=bool)
        sr = 0
        for i in np.nonzero(self.x[:n, q])[0]:
            j = int(i) + n
            tot = 2 * sr + 2 * int(self.r[j]) + self._g_scratch(sx, sz, j)
            sr = (tot % 4) // 2
            sx ^= self.x[j]
            sz ^= self.z[j]
        return int(sr)

    def _g_scratch(self, sx, sz, j) -> int:
        x2, z2 = self.x[j], self.z[j]
        g = np.zeros(self.n, dtype=np.int64)
        m = sx & sz
        g[m] = (z2.astype(np.int64) - x2.astype(np.int64))[m]
        m = sx & ~sz
        g[m] = (z2.astype(np.int64) * (2 * x2.astype(np.int64) - 1))[m]
        m = ~sx & sz
        g[m] = (x2.astype(np.int64) * (1 - 2 * z2.astype(np.int64)))[m]
        return int(g.sum())

    def measure_x(self, q: int, rng: np.random.Generator) -> int:
        self.h(q)
        out = self.measure(q, rng)
        self.h(q)
        return out

    def reset(self, q: int, rng: np.random.Generator):
        if self.measure(q, rng):
            self.pauli_x(q)

    def reset_x(self, q: int, rng: np.random.Generator):
        self.h(q)
        self.reset(q, rng)
        self.h(q)

    # -- inspection -------------------------------------------------------

    def expectation(self, pauli: dict[int, str]) -> int:
        """<P> for a Pauli product; +1/-1 if stabilized, 0 if random."""
        px = np.zeros(self.n, dtype=bool)
        pz = np.zeros(self.n, dtype=bool)
        for q, p in pauli.items():
            if p in ("X", "Y"):
                px[q] = True
            if p in ("Z", "Y"):
                pz[q] = True
        n = self.n
        anti = (self.x[n:] & pz[None, :]) ^ (self.z[n:] & px[None, :])
        if np.any(anti.sum(axis=1) % 2):
            return 0
        # P (up to sign) is a product of stabilizers selected by destabilizer
        # anticommutation; accumulate the sign with scratch-row products.
        sel = ((self.x[:n] & pz[None, :]) ^ (self.z[:n] & px[None, :])).sum(axis=1) % 2
        sx = np.zeros(self.n, dtype=bool)
        sz = np.zeros(self.n, dtype=bool)
        sr = 0
        for i in np.nonzero(sel)[0]:
            j = int(i) + n
            tot = 2 * sr + 2 * int(self.r[j]) + self._g_scratch(sx, sz, j)
            sr = (tot % 4) // 2
            sx ^= self.x[j]
            sz ^= self.z[j]
        if not (np.array_equal(sx, px) and np.array_equal(sz, pz)):
            raise AssertionError("stabilizer reconstruction failed")
        return -1 if sr else 1

    def canonical_stabilizers(self) -> tuple:
        """Phase-aware RREF of the stabilizer group; equal states give equal
        canonical forms."""
        t = self.copy()
        n = t.n
        rows = list(range(n, 2 * n))
        pivot_row = 0
        cols = [("x", q) for q in range(n)] + [("z", q) for q in range(n)]
        for kind, q in cols:
            arr = t.x if kind == "x" else t.z
            cand = [r for r in rows[pivot_row:] if arr[r, q]]
            if not cand:
                continue
            p = cand[0]
            at = rows[pivot_row]
            if p != at:
                # swap full rows
                for m in (t.x, t.z):
                    m[[p, at]] = m[[at, p]]
                t.r[[p, at]] = t.r[[at, p]]
            for r in rows:
                if r != at and (t.x if kind == "x" else t.z)[r, q]:
                    t.rowsum(r, at)
            pivot_row += 1
        sig = []
        for r in rows:
            sig.append((t.x[r].tobytes(), t.z[r].tobytes(), bool(t.r[r])))
        return tuple(sorted(sig))


class TableauSimulator:
    """Executes Circuit instruction streams on a Tableau, including noise
    channels and record-conditioned Paulis.  One shot per run() call."""

    def __init__(self, n: int, rng: np.random.Generator | None = None):
        self.state = Tableau(n)
        self.rng = rng or np.random.default_rng(0)
        self.record: list[int] = []

    def _rec_bit(self, rec: Rec) -> int:
        idx = len(self.record) + rec.offset
        if idx < 0:
            raise ValueError(f"dangling record reference {rec}")
        return self.record[idx]

    def run(self, circuit: Circuit | list[Instruction]):
        """Returns (detector_events, observable_flips) for one shot."""
        ins_list = circuit.instructions if isinstance(circuit, Circuit) else circuit
        detectors: list[int] = []
        observables: dict[int, int] = {}
        chain_fired = False
        for ins in ins_list:
            name, tg = ins.name, ins.targets
            st, rng = self.state, self.rng
            if name == "TICK":
                continue
            if name == "H":
                for q in tg:
                    st.h(q)
            elif name == "R":
                for q in tg:
                    st.reset(q, rng)
            elif name == "RX":
                for q in tg:
                    st.reset_x(q, rng)
            elif name in ("CX", "CZ"):
                apply2 = st.cx if name == "CX" else st.cz
                applyp = st.pauli_x if name == "CX" else st.pauli_z
                for c, t in zip(tg[::2], tg[1::2]):
                    if isinstance(c, Rec):
                        if self._rec_bit(c):
                            applyp(t)
                    else:
                        apply2(c, t)
            elif name == "M":
                for q in tg:
                    self.record.append(st.measure(q, rng))
            elif name == "MX":
                for q in tg:
                    self.record.append(st.measure_x(q, rng))
            elif name == "X":
                for q in tg:
                    st.pauli_x(q)
            elif name == "Y":
                for q in tg:
                    st.pauli_y(q)
            elif name == "Z":
                for q in tg:
                    st.pauli_z(q)
            elif name == "X_ERROR":
                for q in tg:
                    if rng.random() < ins.args[0]:
                        st.pauli_x(q)
            elif name == "Z_ERROR":
                for q in tg:
                    if rng.random() < ins.args[0]:
                        st.pauli_z(q)
            elif name == "DEPOLARIZE1":
                for q in tg:
                    u = rng.random()
                    if u < ins.args[0]:
                        [st.pauli_x, st.pauli_y, st.pauli_z][int(3 * u / ins.args[0])](q)
            elif name == "DEPOLARIZE2":
                for a, bq in zip(tg[::2], tg[1::2]):
                    u = rng.random()
                    if u < ins.args[0]:
                        comp = int(15 * u / ins.args[0]) + 1
                        for q, pp in ((a, comp >> 2), (bq, comp & 3)):
                            if pp == 1:
                                st.pauli_x(q)
                            elif pp == 2:
                                st.pauli_y(q)
                            elif pp == 3:
                                st.pauli_z(q)
            elif name == "E":
                chain_fired = False
                if rng.random() < ins.args[0]:
                    chain_fired = True
                    self._apply_pauli_targets(tg)
            elif name == "ELSE_CORRELATED_ERROR":
                if not chain_fired and rng.random() < ins.args[0]:
                    chain_fired = True
                    self._apply_pauli_targets(tg)
            elif name == "DETECTOR":
                detectors.append(
                    int(sum(self._rec_bit(r) for r in tg) % 2)
                )
            elif name == "OBSERVABLE_INCLUDE":
                i = int(ins.args[0])
                observables[i] = (
                    observables.get(i, 0)
                    + sum(self._rec_bit(r) for r in tg)
                ) % 2
            else:
                raise ValueError(f"tableau simulator: unhandled {name}")
        n_obs = max(observables, default=-1) + 1
        return detectors, [observables.get(i, 0) for i in range(n_obs)]

    def _apply_pauli_targets(self, targets):
        for t in targets:
            assert isinstance(t, PauliTarget)
            {"X": self.state.pauli_x,
             "Y": self.state.pauli_y,
             "Z": self.state.pauli_z}[t.pauli](t.qubit)


def random_stabilizer_state(n: int, rng: np.random.Generator, moves: int = 60) -> Tableau:
    """Random stabilizer state via a random Clifford walk from |0...0>."""
    t = Tableau(n)
    for _ in range(moves):
        kind = rng.integers(3)
        if kind == 0:
            t.h(int(rng.integers(n)))
        elif kind == 1:
            t.s(int(rng.integers(n)))
        elif n >= 2:
            a, b = rng.choice(n, size=2, replace=False)
            t.cx(int(a), int(b))
    return t


def sample_chain_index(chain, rng: np.random.Generator) -> int | None:
    """Which branch of an E/ELSE cascade fires (None if none) — used by tests
    to cross-check the frame sampler's chain handling."""
    probs = chain_branch_probs(chain)
    u = rng.random()
    acc = 0.0
    for i, p in enumerate(probs):
        acc += p
        if u < acc:
            return i
    return None
