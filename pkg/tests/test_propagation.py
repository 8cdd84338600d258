import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from rotorctl.basis import build_operators, p_coeff
from rotorctl.propagation import (
    PiecewiseControl,
    ReparametrizedControl,
    StateVector,
    expm_skew,
    from_interaction_frame,
    interaction_generator,
    leakage,
    propagate,
    propagator_matrix,
    reparametrize,
    sample_trajectory,
    to_interaction_frame,
    unitarity_defect,
)


def ctrl(pieces, bound=np.inf):
    return PiecewiseControl(np.array(pieces, dtype=float).reshape(-1, 4), bound)


def test_state_validation(ops1):
    with pytest.raises(ValueError):
        StateVector(ops1.ordering, np.ones(4))
    with pytest.raises(ValueError):
        StateVector(ops1.ordering, np.ones(3) / np.sqrt(3))


def test_control_validation():
    with pytest.raises(ValueError):
        ctrl([[0.0, 0, 0, 0]])
    with pytest.raises(ValueError):
        ctrl([[1.0, 0.6, 0, 0]], bound=0.5)
    with pytest.raises(ValueError):
        ctrl([[1.0, np.nan, 0, 0]])
    c = ctrl([[1.0, 0.1, 0.2, 0.3]], bound=(0.1, 0.2, 0.3))
    assert PiecewiseControl.from_dict(c.to_dict()).bound == (0.1, 0.2, 0.3)


def test_free_evolution_examples(ops1):
    y10 = StateVector.basis_state(ops1.ordering, 1, 0)
    out = propagate(ops1, y10, ctrl([[math.pi, 0, 0, 0]]))
    assert np.allclose(out.amplitudes, y10.amplitudes, atol=1e-12)
    y00 = StateVector.basis_state(ops1.ordering, 0, 0)
    out = propagate(ops1, y00, ctrl([[2.7, 0, 0, 0]]))
    assert abs(np.vdot(y00.amplitudes, out.amplitudes)) == pytest.approx(1.0, abs=1e-14)
    U = propagator_matrix(ops1, ctrl([[1.0, 0, 0, 0]]))
    assert np.allclose(U, np.diag(np.exp(-1j * np.array([0, 2, 2, 2]))))


def test_small_time_population(ops1):
    delta = 0.3
    y00 = StateVector.basis_state(ops1.ordering, 0, 0)
    for T in (1e-2, 5e-3):
        out = propagate(ops1, y00, ctrl([[T, 0, 0, delta]]))
        pop = abs(out.amplitudes[2]) ** 2
        assert pop == pytest.approx(p_coeff(0, 0) ** 2 * delta**2 * T**2, rel=5 * T)


def test_empty_and_concatenation(ops2):
    assert np.allclose(propagator_matrix(ops2, PiecewiseControl()), np.eye(9))
    rng = np.random.default_rng(3)
    c1 = ctrl(np.column_stack([rng.uniform(0.1, 1, 5), rng.uniform(-1, 1, (5, 3))]))
    c2 = ctrl(np.column_stack([rng.uniform(0.1, 1, 4), rng.uniform(-1, 1, (4, 3))]))
    U = propagator_matrix(ops2, c1.concat(c2))
    assert np.max(np.abs(U - propagator_matrix(ops2, c2) @ propagator_matrix(ops2, c1))) < 1e-10


@given(st.integers(0, 2**32 - 1), st.integers(1, 30))
def test_norm_and_unitarity(seed, pieces):
    ops = build_operators(2)
    rng = np.random.default_rng(seed)
    c = ctrl(np.column_stack([rng.uniform(0.01, 2, pieces), rng.uniform(-2, 2, (pieces, 3))]))
    psi = rng.normal(size=9) + 1j * rng.normal(size=9)
    psi0 = StateVector(ops.ordering, psi / np.linalg.norm(psi))
    assert abs(propagate(ops, psi0, c).norm - 1) < 1e-10
    assert unitarity_defect(propagator_matrix(ops, c)) < 1e-9


def test_expm_reconstruction():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    G = X - X.conj().T
    from scipy.linalg import expm

    assert np.max(np.abs(expm_skew(G) - expm(G))) < 1e-11


def test_reparametrize_examples():
    rep = ReparametrizedControl([[1.0, 1.0, 0.2, 0.5, 1.0]], 1.0)
    lab = reparametrize(rep)
    np.testing.assert_allclose(lab.pieces, [[1.0, 0.2, 0.5, 1.0]])
    lab = reparametrize(ReparametrizedControl([[1.0, 2.0, 1.0, 0.0, 0.0]], 0.5))
    np.testing.assert_allclose(lab.pieces, [[2.0, 0.5, 0.0, 0.0]])
    with pytest.raises(ValueError):
        ReparametrizedControl([[1.0, 1.0, 1.0, 0.0, 0.0]], 0.5)


@given(st.floats(0.01, 2.0), st.lists(st.tuples(st.floats(0.01, 3), st.floats(0, 5), st.floats(0, 1), st.floats(0, 1), st.floats(0, 1)), min_size=1, max_size=8))
def test_reparametrize_respects_bound(delta, rows):
    pieces = [(d, 1 / delta + extra, a, b, c) for d, extra, a, b, c in rows]
    lab = reparametrize(ReparametrizedControl(pieces, delta))
    assert lab.sup_amplitude <= delta * (1 + 1e-12)


def test_reparametrized_trajectory_matches(ops1):
    """Lab propagation equals integrating z A + v.B over the reparametrised time."""
    rep = ReparametrizedControl([[0.4, 2.0, 1.0, 0.0, 0.5], [0.3, 4.0, 0.0, 1.0, 0.0]], 0.5)
    lab = reparametrize(rep)
    psi0 = StateVector.basis_state(ops1.ordering, 0, 0)
    y = np.array(psi0.amplitudes)
    for s, z, *v in rep.pieces:
        y = expm_skew(z * ops1.drift + ops1.control_operator(v), s) @ y
    assert np.allclose(propagate(ops1, psi0, lab).amplitudes, y, atol=1e-12)


def test_interaction_generator(ops1):
    v = (0.3, 0.5, 0.9)
    assert np.array_equal(interaction_generator(ops1, 0.0, v), ops1.control_operator(v))
    assert np.max(np.abs(interaction_generator(ops1, 2 * np.pi, v) - ops1.control_operator(v))) < 1e-12
    for w in (0.3, 1.7):
        assert np.linalg.norm(interaction_generator(ops1, w, v), 2) == pytest.approx(np.linalg.norm(ops1.control_operator(v), 2))


def test_frame_consistency_along_trajectory(ops2):
    c = ctrl([[0.7, 0.0, 0.0, 0.0], [0.5, 0.2, 0.1, 0.0], [1.1, 0.0, 0.0, 0.3]])
    psi0 = StateVector.basis_state(ops2.ordering, 0, 0)
    times = np.linspace(0, c.total_time, 17)
    states = sample_trajectory(ops2, psi0, c, times)
    for t, psi in zip(times, states):
        y = to_interaction_frame(ops2, psi, t)
        assert np.max(np.abs(from_interaction_frame(ops2, y, t) - psi)) < 1e-8
    assert np.allclose(states[-1], propagate(ops2, psi0, c).amplitudes)


def test_leakage_examples():
    small, large = build_operators(1), build_operators(3)
    y00 = StateVector.basis_state(small.ordering, 0, 0)
    assert leakage(small, large, y00, ctrl([[3.0, 0, 0, 0]])) == 0.0
    l1 = leakage(small, large, y00, ctrl([[2.0, 0, 0, 0.1]]))
    l2 = leakage(small, large, y00, ctrl([[2.0, 0, 0, 0.05]]))
    assert l1 / l2 >= 3.5
    with pytest.raises(ValueError):
        leakage(large, small, y00, ctrl([[1.0, 0, 0, 0]]))


def test_leakage_shrinks_with_larger_space():
    small = build_operators(1)
    y00 = StateVector.basis_state(small.ordering, 0, 0)
    c = ctrl([[1.5, 0.2, 0.1, 0.3]])
    vals = [leakage(small, build_operators(L), y00, c) for L in (2, 3, 4, 5)]
    # more shells can only add escape channels, and the increments shrink
    diffs = np.diff(vals)
    assert np.all(np.abs(diffs[1:]) <= np.abs(diffs[:-1]) + 1e-10)
