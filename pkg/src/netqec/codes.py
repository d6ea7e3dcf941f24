"""CSS code construction: planar surface codes and bivariate bicycle codes.

The bivariate bicycle (BB) family is generated by two cyclic shifts
``x = S_ell (x) I_m`` and ``y = I_ell (x) S_m``.  A code instance sums three
monomials in x, y into each of two blocks A and B, giving the parity checks

    H_X = [A | B]          H_Z = [B^T | A^T]

which commute automatically because all monomials in x and y commute.
Surface codes are laid out on the (2d-1) x (2d-1) interleaved grid with data
qubits on same-parity sites, X-checks at (even, odd) and Z-checks at
(odd, even).
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field

import numpy as np

from . import gf2


class InvalidCodeError(ValueError):
    """Raised when construction inputs fail validation."""


# ---------------------------------------------------------------------------
# BinaryMatrix


class BinaryMatrix:
    """Sparse matrix over GF(2), stored as sorted per-row column supports."""

    __slots__ = ("rows", "cols", "_row_support")

    def __init__(self, rows: int, cols: int, entries=()):
        if rows < 0 or cols < 0:
            raise InvalidCodeError("negative matrix dimensions")
        self.rows = rows
        self.cols = cols
        support: list[set[int]] = [set() for _ in range(rows)]
        for r, c in entries:
            if not (0 <= r < rows and 0 <= c < cols):
                raise InvalidCodeError(f"entry ({r}, {c}) out of bounds for {rows}x{cols}")
            if c in support[r]:
                raise InvalidCodeError(f"duplicate entry ({r}, {c})")
            support[r].add(c)
        self._row_support = tuple(tuple(sorted(s)) for s in support)

    @classmethod
    def from_dense(cls, dense) -> "BinaryMatrix":
        a = gf2.as_gf2(dense)
        rr, cc = np.nonzero(a)
        return cls(a.shape[0], a.shape[1], zip(rr.tolist(), cc.tolist()))

    def dense(self) -> np.ndarray:
        out = np.zeros((self.rows, self.cols), dtype=np.uint8)
        for r, cols in enumerate(self._row_support):
            out[r, list(cols)] = 1
        return out

    def entries(self):
        for r, cols in enumerate(self._row_support):
            for c in cols:
                yield (r, c)

    def row_support(self, r: int) -> tuple[int, ...]:
        return self._row_support[r]

    @property
    def nnz(self) -> int:
        return sum(len(s) for s in self._row_support)

    def row_weights(self) -> list[int]:
        return [len(s) for s in self._row_support]

    def col_weights(self) -> list[int]:
        w = [0] * self.cols
        for cols in self._row_support:
            for c in cols:
                w[c] += 1
        return w

    def transpose(self) -> "BinaryMatrix":
        return BinaryMatrix(self.cols, self.rows, ((c, r) for r, c in self.entries()))

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, BinaryMatrix)
            and self.rows == other.rows
            and self.cols == other.cols
            and self._row_support == other._row_support
        )

    def __hash__(self):
        return hash((self.rows, self.cols, self._row_support))

    def __repr__(self) -> str:
        return f"BinaryMatrix({self.rows}x{self.cols}, nnz={self.nnz})"

    def to_coordinate_text(self) -> str:
        """Sparse coordinate export: header ``H <rows> <cols>``, then one
        ``row col`` pair per line."""
        lines = [f"H {self.rows} {self.cols}"]
        lines.extend(f"{r} {c}" for r, c in self.entries())
        return "\n".join(lines) + "\n"

    @classmethod
    def from_coordinate_text(cls, text: str) -> "BinaryMatrix":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or not lines[0].startswith("H "):
            raise InvalidCodeError("missing 'H <rows> <cols>' header")
        _, r, c = lines[0].split()
        entries = []
        for ln in lines[1:]:
            a, b = ln.split()
            entries.append((int(a), int(b)))
        return cls(int(r), int(c), entries)


# ---------------------------------------------------------------------------
# BB code specification


_MONOMIAL_RE = re.compile(r"^(?:1|([xy])(?:\^(\d+))?)$")


def parse_monomial(text: str) -> tuple[int, int]:
    """Parse ``x^E``, ``y^E``, bare ``x``/``y``, or ``1`` into (x_exp, y_exp)."""
    m = _MONOMIAL_RE.match(text.strip())
    if not m:
        raise InvalidCodeError(f"bad monomial {text!r} (grammar: x^E | y^E | 1)")
    if m.group(1) is None:
        return (0, 0)
    exp = int(m.group(2)) if m.group(2) is not None else 1
    return (exp, 0) if m.group(1) == "x" else (0, exp)


def format_monomial(term: tuple[int, int]) -> str:
    xe, ye = term
    if xe and ye:
        raise InvalidCodeError("mixed monomials x^a y^b are not part of the file grammar")
    if xe == 0 and ye == 0:
        return "1"
    var, e = ("x", xe) if xe else ("y", ye)
    return var if e == 1 else f"{var}^{e}"


@dataclass(frozen=True)
class BBSpec:
    """Defining data of a bivariate bicycle code."""

    ell: int
    m: int
    a_terms: tuple[tuple[int, int], ...]
    b_terms: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if self.ell < 1 or self.m < 1:
            raise InvalidCodeError("ell and m must be positive")
        if not self.a_terms or not self.b_terms:
            raise InvalidCodeError("a_terms and b_terms must be nonempty")
        reduced = tuple((xe % self.ell, ye % self.m) for xe, ye in self.a_terms)
        object.__setattr__(self, "a_terms", reduced)
        reduced = tuple((xe % self.ell, ye % self.m) for xe, ye in self.b_terms)
        object.__setattr__(self, "b_terms", reduced)

    @property
    def n(self) -> int:
        return 2 * self.ell * self.m

    @classmethod
    def from_dict(cls, obj: dict) -> "BBSpec":
        try:
            ell, m = int(obj["ell"]), int(obj["m"])
            a = tuple(parse_monomial(t) for t in obj["a"])
            b = tuple(parse_monomial(t) for t in obj["b"])
        except KeyError as exc:
            raise InvalidCodeError(f"preset missing field {exc}") from exc
        return cls(ell, m, a, b)

    def to_dict(self) -> dict:
        return {
            "ell": self.ell,
            "m": self.m,
            "a": [format_monomial(t) for t in self.a_terms],
            "b": [format_monomial(t) for t in self.b_terms],
        }

    @classmethod
    def from_file(cls, path) -> "BBSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


# ---------------------------------------------------------------------------
# CssCode


@dataclass(frozen=True)
class CssCode:
    """A CSS code: check matrices, logical pairs, and parameters [[n, k, d]].

    ``d`` is metadata (never computed here).  ``logicals`` holds k pairs of
    (X-operator support, Z-operator support) with the standard symplectic
    pairing: pair i's operators anticommute with each other and commute with
    everything else.
    """

    n: int
    k: int
    hx: BinaryMatrix
    hz: BinaryMatrix
    logicals: tuple[tuple[frozenset, frozenset], ...]
    d: int | None = None
    name: str = ""
    metadata: dict = field(default_factory=dict, compare=False)

    def validate(self) -> None:
        hx, hz = self.hx.dense(), self.hz.dense()
        if hx.shape[1] != self.n or hz.shape[1] != self.n:
            raise InvalidCodeError("check matrix width != n")
        if np.any((hx @ hz.T) & 1):
            raise InvalidCodeError("H_X . H_Z^T != 0")
        k = self.n - gf2.rank(hx) - gf2.rank(hz)
        if k != self.k:
            raise InvalidCodeError(f"rank gives k={k}, stored k={self.k}")
        if len(self.logicals) != self.k:
            raise InvalidCodeError("logical pair count != k")
        for i, (x_op, z_op) in enumerate(self.logicals):
            xv = _support_vec(x_op, self.n)
            zv = _support_vec(z_op, self.n)
            if np.any((hz @ xv) & 1) or np.any((hx @ zv) & 1):
                raise InvalidCodeError(f"logical pair {i} anticommutes with a stabilizer")
            for j, (x2, z2) in enumerate(self.logicals):
                want = 1 if i == j else 0
                if int(xv @ _support_vec(z2, self.n)) & 1 != want:
                    raise InvalidCodeError(f"symplectic pairing broken at ({i},{j})")
                _ = x2


def _support_vec(support, n: int) -> np.ndarray:
    v = np.zeros(n, dtype=np.uint8)
    v[list(support)] = 1
    return v


# ---------------------------------------------------------------------------
# Surface code


def surface_layout(d: int) -> dict:
    """Site layout on the (2d-1)x(2d-1) grid.

    Returns data/check coordinates in index order plus coordinate->index maps.
    """
    size = 2 * d - 1
    data, xchecks, zchecks = [], [], []
    for i in range(size):
        for j in range(size):
            if i % 2 == j % 2:
                data.append((i, j))
            elif i % 2 == 0:
                xchecks.append((i, j))
            else:
                zchecks.append((i, j))
    return {
        "size": size,
        "data": data,
        "xchecks": xchecks,
        "zchecks": zchecks,
        "data_index": {pos: q for q, pos in enumerate(data)},
    }


def _check_support(pos, layout):
    i, j = pos
    idx = layout["data_index"]
    return tuple(
        idx[p]
        for p in ((i - 1, j), (i, j - 1), (i, j + 1), (i + 1, j))
        if p in idx
    )


def build_surface_code(d: int) -> CssCode:
    """Planar (unrotated) surface code of odd distance d.

    n = 2d^2 - 2d + 1 data qubits, k = 1, checks of weight <= 4.  d = 1 is the
    degenerate single qubit with no checks.
    """
    if d < 1 or d % 2 == 0:
        raise InvalidCodeError(f"surface distance must be odd and >= 1, got {d}")
    layout = surface_layout(d)
    n = len(layout["data"])
    hx_entries = []
    for r, pos in enumerate(layout["xchecks"]):
        hx_entries.extend((r, q) for q in _check_support(pos, layout))
    hz_entries = []
    for r, pos in enumerate(layout["zchecks"]):
        hz_entries.extend((r, q) for q in _check_support(pos, layout))
    hx = BinaryMatrix(len(layout["xchecks"]), n, hx_entries)
    hz = BinaryMatrix(len(layout["zchecks"]), n, hz_entries)
    idx = layout["data_index"]
    logical_z = frozenset(idx[(0, j)] for j in range(0, 2 * d - 1, 2))
    logical_x = frozenset(idx[(i, 0)] for i in range(0, 2 * d - 1, 2))
    code = CssCode(
        n=n,
        k=1,
        hx=hx,
        hz=hz,
        logicals=((logical_x, logical_z),),
        d=d,
        name=f"surface_d{d}",
        metadata={"layout": layout},
    )
    code.validate()
    return code


# ---------------------------------------------------------------------------
# BB code


def monomial_perm(spec: BBSpec, term: tuple[int, int]) -> np.ndarray:
    """Permutation of the ell*m group indices effected by x^a y^b.

    Index (i, j) maps to i*m + j; the monomial sends it to
    ((i+a) mod ell, (j+b) mod m).
    """
    xe, ye = term
    i = np.arange(spec.ell * spec.m) // spec.m
    j = np.arange(spec.ell * spec.m) % spec.m
    return ((i + xe) % spec.ell) * spec.m + (j + ye) % spec.m


def _block(spec: BBSpec, terms) -> np.ndarray:
    size = spec.ell * spec.m
    out = np.zeros((size, size), dtype=np.uint8)
    for term in terms:
        out[np.arange(size), monomial_perm(spec, term)] ^= 1
    return out


def build_bb_code(spec: BBSpec, name: str = "", d: int | None = None) -> CssCode:
    """Bivariate bicycle code with H_X = [A|B], H_Z = [B^T|A^T], n = 2*ell*m."""
    a = _block(spec, spec.a_terms)
    b = _block(spec, spec.b_terms)
    hx_dense = np.concatenate([a, b], axis=1)
    hz_dense = np.concatenate([b.T, a.T], axis=1)
    n = 2 * spec.ell * spec.m
    k = n - gf2.rank(hx_dense) - gf2.rank(hz_dense)
    hx = BinaryMatrix.from_dense(hx_dense)
    hz = BinaryMatrix.from_dense(hz_dense)
    logicals = compute_logicals(hx, hz)
    code = CssCode(
        n=n,
        k=k,
        hx=hx,
        hz=hz,
        logicals=logicals,
        d=d,
        name=name or f"bb_l{spec.ell}_m{spec.m}",
        metadata={"spec": spec},
    )
    code.validate()
    return code


# ---------------------------------------------------------------------------
# Logical operators


def compute_logicals(
    hx: BinaryMatrix, hz: BinaryMatrix, reduce_weight: bool = True
) -> tuple[tuple[frozenset, frozenset], ...]:
    """Extract k symplectically paired logical operator pairs.

    X candidates live in null(H_Z) modulo rowspace(H_X) (and symmetrically for
    Z).  Pairs are then orthogonalized with a Gram-Schmidt sweep on the
    symplectic product, lowest-index-first, so the result is deterministic.
    With ``reduce_weight`` a greedy stabilizer-addition pass shrinks each
    representative (no minimality guarantee).
    """
    hx_d, hz_d = hx.dense(), hz.dense()
    if np.any((hx_d @ hz_d.T) & 1):
        raise InvalidCodeError("check matrices do not commute")
    n = hx_d.shape[1]
    x_cands = gf2.coset_basis(hx_d, gf2.nullspace(hz_d))
    z_cands = gf2.coset_basis(hz_d, gf2.nullspace(hx_d))
    if x_cands.shape[0] != z_cands.shape[0]:
        raise InvalidCodeError("X/Z logical candidate counts differ")
    xs = [row.copy() for row in x_cands]
    zs = [row.copy() for row in z_cands]
    pairs: list[tuple[np.ndarray, np.ndarray]] = []
    while xs:
        x = xs.pop(0)
        partner = None
        for idx, z in enumerate(zs):
            if int(x @ z) & 1:
                partner = idx
                break
        if partner is None:
            raise InvalidCodeError("unpaired logical candidate (inconsistent input)")
        z = zs.pop(partner)
        for other in xs:
            if int(other @ z) & 1:
                other ^= x
        for other in zs:
            if int(other @ x) & 1:
                other ^= z
        pairs.append((x, z))
    if reduce_weight:
        pairs = [
            (_greedy_reduce(x, hx_d), _greedy_reduce(z, hz_d)) for x, z in pairs
        ]
    return tuple(
        (frozenset(np.nonzero(x)[0].tolist()), frozenset(np.nonzero(z)[0].tolist()))
        for x, z in pairs
    )


def _greedy_reduce(op: np.ndarray, stabs: np.ndarray) -> np.ndarray:
    """Greedily add stabilizer rows while the support strictly shrinks."""
    best = op.copy()
    improved = True
    while improved:
        improved = False
        w = int(best.sum())
        for row in stabs:
            cand = best ^ row
            if int(cand.sum()) < w:
                best = cand
                w = int(cand.sum())
                improved = True
    return best


# ---------------------------------------------------------------------------
# GF(2) convenience wrappers at the BinaryMatrix level


def gf2_rank(m: BinaryMatrix | np.ndarray) -> int:
    dense = m.dense() if isinstance(m, BinaryMatrix) else m
    return gf2.rank(dense)


def gf2_solve(m: BinaryMatrix | np.ndarray, rhs) -> np.ndarray | None:
    """Any GF(2) solution of ``m x = rhs``, or None when inconsistent."""
    dense = m.dense() if isinstance(m, BinaryMatrix) else m
    return gf2.solve(dense, rhs)


# ---------------------------------------------------------------------------
# Presets

# The paper-scale instances.  Polynomials follow the cited construction; the
# code distance is carried as metadata only.  alpha is the fit exponent used
# by the harness for each preset.

PRESETS: dict[str, dict] = {
    "bb72": {
        "spec": BBSpec(6, 6, (parse_monomial("x^3"), parse_monomial("y"), parse_monomial("y^2")),
                       (parse_monomial("y^3"), parse_monomial("x"), parse_monomial("x^2"))),
        "n": 72, "k": 12, "d": 6, "alpha": 3, "label": "[[72,12,6]]",
    },
    "bb90": {
        "spec": BBSpec(15, 3, (parse_monomial("x^9"), parse_monomial("y"), parse_monomial("y^2")),
                       (parse_monomial("1"), parse_monomial("x^2"), parse_monomial("x^7"))),
        "n": 90, "k": 8, "d": 10, "alpha": 4, "label": "[[90,8,10]]",
    },
    "bb144": {
        "spec": BBSpec(12, 6, (parse_monomial("x^3"), parse_monomial("y"), parse_monomial("y^2")),
                       (parse_monomial("y^3"), parse_monomial("x"), parse_monomial("x^2"))),
        "n": 144, "k": 12, "d": 12, "alpha": 5, "label": "[[144,12,12]]",
    },
}


def load_preset(name: str) -> CssCode:
    """Build a named BB preset, validating its [[n, k, d]] against the rank
    oracle at load time."""
    if name not in PRESETS:
        raise InvalidCodeError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    info = PRESETS[name]
    code = build_bb_code(info["spec"], name=name, d=info["d"])
    if code.n != info["n"] or code.k != info["k"]:
        raise InvalidCodeError(
            f"preset {name} built [[{code.n},{code.k}]], expected "
            f"[[{info['n']},{info['k']}]]"
        )
    code.metadata["alpha"] = info["alpha"]
    code.metadata["label"] = info["label"]
    return code
