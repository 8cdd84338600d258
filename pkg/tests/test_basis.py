import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rotorctl.basis import (
    BasisOrdering,
    ElementaryMatrix,
    LevelIndex,
    build_operators,
    cos_theta_matrix,
    operators_from_dict,
    operators_to_dict,
    p_coeff,
    q_coeff,
    traceless_drift,
    two_shell_block,
)

from .conftest import sphere_matrix


def test_level_index_rejects_bad_m():
    with pytest.raises(ValueError):
        LevelIndex(1, 2)
    with pytest.raises(ValueError):
        LevelIndex(-1, 0)


@given(st.integers(0, 7))
def test_ordering_is_shell_major_bijection(ell_max):
    o = BasisOrdering(ell_max)
    assert o.dim == (ell_max + 1) ** 2
    for k in range(o.dim):
        assert o.index_of(o.level_of(k)) == k
    labels = [(lv.ell, lv.m) for lv in o.levels]
    assert labels == sorted(labels)


def test_p_coefficients():
    assert p_coeff(0, 0) == pytest.approx(-1 / math.sqrt(3), abs=1e-10)
    assert p_coeff(1, 1) == pytest.approx(-math.sqrt(3 / 15), abs=1e-10)
    assert p_coeff(1, -1) == p_coeff(1, 1)
    with pytest.raises(ValueError):
        p_coeff(1, 2)


def test_q_coefficients():
    assert q_coeff(0, 0) == pytest.approx(math.sqrt(2 / 12), abs=1e-10)
    assert q_coeff(1, 1) == pytest.approx(math.sqrt(2 / 60), abs=1e-10)
    assert q_coeff(1, -1) == pytest.approx(math.sqrt(12 / 60), abs=1e-10)


def test_ell_max_one_layout(ops1):
    assert ops1.dim == 4
    np.testing.assert_array_equal(np.diag(ops1.drift), [0, -2j, -2j, -2j])
    nz = np.argwhere(ops1.B3 != 0)
    assert sorted(map(tuple, nz)) == [(0, 2), (2, 0)]
    assert ops1.B3[0, 2] == pytest.approx(1j * p_coeff(0, 0))


def test_build_rejects_single_shell():
    with pytest.raises(ValueError):
        build_operators(0)


def test_no_shell_zero_to_two_coupling(ops2):
    for B in ops2.couplings:
        assert not np.any(B[0:1, 4:9])


@pytest.mark.parametrize("ell_max", range(1, 7))
def test_structural_invariants(ell_max):
    ops = build_operators(ell_max)
    levels = ops.ordering.levels
    lam = ops.eigenvalues
    for ell in range(ell_max + 1):
        assert np.sum(lam == -ell * (ell + 1)) == 2 * ell + 1
    for B in ops.couplings:
        assert np.array_equal(B.conj().T, -B)
    for j, k in zip(*np.nonzero(ops.B1 != 0)):
        assert abs(levels[j].ell - levels[k].ell) == 1
        assert abs(levels[j].m - levels[k].m) == 1
    for j, k in zip(*np.nonzero(ops.B2 != 0)):
        assert abs(levels[j].m - levels[k].m) == 1
    for j, k in zip(*np.nonzero(ops.B3 != 0)):
        assert levels[j].m == levels[k].m
    # degenerate pairs are never coupled
    deg = (lam[:, None] == lam[None, :]) & ~np.eye(ops.dim, dtype=bool)
    for B in ops.couplings:
        assert not np.any(B[deg])


def test_operator_arrays_are_read_only(ops1):
    with pytest.raises(ValueError):
        ops1.B1[0, 0] = 1


def test_traceless_drift_values():
    np.testing.assert_allclose(np.diag(traceless_drift(two_shell_block(0))), [1.5j, -0.5j, -0.5j, -0.5j])
    d1 = np.diag(traceless_drift(two_shell_block(1)))
    np.testing.assert_allclose(d1, [2.5j] * 3 + [-1.5j] * 5)
    assert traceless_drift(build_operators(2), 1).shape == (1, 1)
    assert traceless_drift(build_operators(2), 1)[0, 0] == 0
    with pytest.raises(ValueError):
        traceless_drift(build_operators(1), 5)


def test_elementary_matrices():
    o = BasisOrdering(1)
    for kind in "EFD":
        X = ElementaryMatrix(kind, LevelIndex(0, 0), LevelIndex(1, 0), 4).to_array(o)
        assert np.allclose(X.conj().T, -X)
        assert abs(np.trace(X)) < 1e-15


def test_quadrature_matches_couplings(ops3):
    # -i x, +i y and -i z on the sphere, Condon-Shortley harmonics
    x = sphere_matrix(ops3, lambda t, p: np.sin(t) * np.cos(p))
    y = sphere_matrix(ops3, lambda t, p: np.sin(t) * np.sin(p))
    z = sphere_matrix(ops3, lambda t, p: np.cos(t))
    assert np.max(np.abs(-1j * x - ops3.B1)) < 1e-12
    assert np.max(np.abs(1j * y - ops3.B2)) < 1e-12
    assert np.max(np.abs(-1j * z - ops3.B3)) < 1e-12
    assert np.max(np.abs(cos_theta_matrix(ops3) - z)) < 1e-12
    assert z[0, 2].real == pytest.approx(1 / math.sqrt(3), abs=1e-12)


def test_json_round_trip(ops2):
    d = operators_to_dict(ops2)
    assert d["dim"] == 9
    rows = [(r, c) for r, c, *_ in d["B3"]]
    assert rows == sorted(rows) and min(min(rc) for rc in rows) >= 1
    back = operators_from_dict(d)
    for a, b in zip(ops2.couplings, back.couplings):
        assert np.array_equal(a, b)
