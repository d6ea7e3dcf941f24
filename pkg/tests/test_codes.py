import numpy as np
import pytest

from netqec import gf2
from netqec.codes import (
    BBSpec,
    BinaryMatrix,
    InvalidCodeError,
    PRESETS,
    build_bb_code,
    build_surface_code,
    format_monomial,
    load_preset,
    parse_monomial,
)


class TestBinaryMatrix:
    def test_round_trip_dense(self):
        m = BinaryMatrix(3, 4, [(0, 1), (2, 3), (1, 0)])
        d = m.dense()
        assert d.shape == (3, 4)
        assert BinaryMatrix.from_dense(d).dense().tolist() == d.tolist()

    def test_row_support_sorted(self):
        m = BinaryMatrix(2, 5, [(0, 4), (0, 1), (1, 2)])
        assert m.row_support(0) == (1, 4)
        assert m.row_support(1) == (2,)

    def test_nnz_and_duplicate_rejection(self):
        assert BinaryMatrix(2, 2, [(0, 0), (1, 1)]).nnz == 2
        with pytest.raises(InvalidCodeError, match="duplicate"):
            BinaryMatrix(2, 2, [(0, 0), (0, 0)])

    def test_coordinate_text(self):
        m = BinaryMatrix(2, 3, [(1, 2), (0, 0)])
        text = m.to_coordinate_text()
        assert "0 0" in text and "1 2" in text


def test_monomial_parsing():
    assert parse_monomial("x^3") == (3, 0)
    assert parse_monomial("y^2") == (0, 2)
    assert parse_monomial("x") == (1, 0)
    assert parse_monomial("1") == (0, 0)
    assert format_monomial((0, 2)) == "y^2"
    assert format_monomial((1, 0)) == "x"
    with pytest.raises(InvalidCodeError):
        parse_monomial("z^5")


@pytest.mark.parametrize("d", [3, 5, 7])
def test_surface_code_parameters(d):
    code = build_surface_code(d)
    assert code.n == 2 * d * d - 2 * d + 1
    assert code.k == 1
    assert code.d == d
    code.validate()


def test_surface_code_check_counts():
    code = build_surface_code(3)
    # a distance-3 planar patch has 6 checks of each type
    assert code.hx.rows == 6
    assert code.hz.rows == 6


@pytest.mark.parametrize("name,n,k,d", [
    ("bb72", 72, 12, 6),
    ("bb90", 90, 8, 10),
    ("bb144", 144, 12, 12),
])
def test_preset_parameters(name, n, k, d):
    code = load_preset(name)
    assert (code.n, code.k, code.d) == (n, k, d)
    code.validate()


def test_preset_rank_consistency():
    """k comes out of the GF(2) ranks, not a lookup."""
    code = load_preset("bb72")
    assert code.k == code.n - gf2.rank(code.hx.dense()) - gf2.rank(code.hz.dense())


def test_unknown_preset():
    with pytest.raises(InvalidCodeError, match="unknown preset"):
        load_preset("bb9000")
    assert set(PRESETS) == {"bb72", "bb90", "bb144"}


def test_bb_tanner_edge_count():
    # every check touches six data qubits: three from A, three from B
    code = load_preset("bb72")
    assert code.hx.nnz == 6 * code.hx.rows
    assert code.hz.nnz == 6 * code.hz.rows
    assert code.hx.nnz + code.hz.nnz == 432


def test_bb_checks_commute():
    code = load_preset("bb90")
    hx, hz = code.hx.dense(), code.hz.dense()
    assert not np.any((hx @ hz.T) & 1)


def test_bb_custom_spec():
    spec = BBSpec(ell=6, m=6,
                  a_terms=((3, 0), (0, 1), (0, 2)),
                  b_terms=((0, 3), (1, 0), (2, 0)))
    code = build_bb_code(spec, name="bb72-custom", d=6)
    assert code.n == 72
    assert code.k == 12


def test_bb_spec_dict_round_trip():
    spec = BBSpec.from_dict(
        {"ell": 6, "m": 6, "a": ["x^3", "y", "y^2"], "b": ["y^3", "x", "x^2"]})
    assert spec.a_terms == ((3, 0), (0, 1), (0, 2))
    assert BBSpec.from_dict(spec.to_dict()) == spec


def test_bb_rejects_bad_terms():
    with pytest.raises(InvalidCodeError):
        BBSpec(ell=0, m=6, a_terms=((1, 0),), b_terms=((0, 1),))


class TestGf2:
    def test_rank_identity(self):
        assert gf2.rank(np.eye(5, dtype=np.uint8)) == 5

    def test_solve_consistent(self):
        rng = np.random.default_rng(3)
        a = rng.integers(0, 2, size=(8, 12), dtype=np.uint8)
        x = rng.integers(0, 2, size=12, dtype=np.uint8)
        rhs = (a @ x) & 1
        sol = gf2.solve(a, rhs)
        assert sol is not None
        assert np.array_equal((a @ sol) & 1, rhs)

    def test_solve_inconsistent_returns_none(self):
        a = np.array([[1, 0], [1, 0]], dtype=np.uint8)
        assert gf2.solve(a, np.array([1, 0], dtype=np.uint8)) is None

    def test_nullspace_annihilates(self):
        rng = np.random.default_rng(4)
        a = rng.integers(0, 2, size=(6, 10), dtype=np.uint8)
        ns = gf2.nullspace(a)
        assert ns.shape[0] == 10 - gf2.rank(a)
        assert not np.any((a @ ns.T) & 1)
