import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.stats import unitary_group

from rotorctl.basis import build_operators
from rotorctl.propagation import StateVector, expm_skew, propagate
from rotorctl.synthesis import (
    PathSegment,
    PlanningError,
    ControlPlan,
    averages,
    drift_period,
    gap_generator,
    nu_bounds,
    nu_constant,
    nu_value,
    path_propagator,
    phase_insensitive_distance,
    phase_sequence,
    plan_state_transfer,
    plan_unitary,
    rotation_tree,
    spectral_gaps,
    steer_state,
    tracking_control,
)
from rotorctl.synthesis.planning import compatible_generators


# -- gaps ---------------------------------------------------------------------


def test_spectral_gap_examples(ops1, ops2):
    assert spectral_gaps(ops1).gaps == (2.0,)
    assert spectral_gaps(ops2).gaps == (2.0, 4.0, 6.0)
    assert spectral_gaps(ops2, 1).gaps == ()
    assert 4.0 in spectral_gaps(ops2) and 3.0 not in spectral_gaps(ops2)
    pairs = spectral_gaps(ops1).pair_table[2.0]
    assert pairs == ((0, 1), (0, 2), (0, 3))


def test_gap_generator_examples(ops1, ops2):
    G = gap_generator(ops1, 2.0, (0, 0, 1))
    assert np.array_equal(G.matrix, np.asarray(ops1.B3))
    G = gap_generator(ops2, 4.0, (1, 1, 1))
    nz = np.argwhere(G.matrix != 0)
    lam = np.asarray(ops2.eigenvalues)
    assert len(nz) and all(abs(abs(lam[j] - lam[k]) - 4.0) < 1e-12 for j, k in nz)
    with pytest.raises(ValueError):
        gap_generator(ops2, 3.0, (0, 0, 1))
    with pytest.raises(ValueError):
        gap_generator(ops2, 2.0, (0, 0, 2))


def test_gap_generator_phase_keeps_skew(ops2):
    G = gap_generator(ops2, 2.0, (0.2, 0.5, 1.0), xi=np.exp(0.7j))
    X = G.effective
    assert np.max(np.abs(X + X.conj().T)) < 1e-15
    assert np.allclose(G.with_phase(1.0).effective, G.matrix)


# -- phase averaging ----------------------------------------------------------


def test_nu_partial_products():
    assert nu_constant(2) == pytest.approx(0.7071067812, abs=1e-10)
    assert nu_constant(3) == pytest.approx(0.6123724357, abs=1e-10)
    assert all(nu_constant(k + 1) < nu_constant(k) for k in range(2, 30))
    with pytest.raises(ValueError):
        nu_constant(1)


def test_nu_bracket_tightens():
    lo1, hi1 = nu_bounds(100)
    lo2, hi2 = nu_bounds(10000)
    assert lo1 <= lo2 <= nu_value() <= hi2 <= hi1
    assert hi2 - lo2 < 1e-3
    assert nu_value() == pytest.approx(0.4298, abs=1e-3)


def test_single_frequency_is_aligned():
    seq = phase_sequence(2.0, (), 1j, 16, R=1.0)
    assert seq.mode == "aligned"
    assert np.allclose(averages(seq.times, [2.0]), 1j)


def test_phase_sequence_properties():
    seq = phase_sequence(2.0, (4.0, 6.0), 1.0, 256, R=1.0)
    assert np.all(np.diff(seq.times) > 1.0)
    assert seq.deviation <= 8 / 256
    neg = phase_sequence(2.0, (4.0, 6.0), -1.0, 256, R=1.0)
    assert neg.achieved[0] == pytest.approx(-nu_value(), abs=0.05)


@settings(max_examples=15)
@given(st.floats(0, 2 * math.pi), st.sampled_from([64, 128, 256]), st.floats(0.5, 3.0), st.floats(0, 50))
def test_phase_sequence_hits_targets(phi, h, R, tau0):
    seq = phase_sequence(2.0, (4.0, 6.0, 10.0), np.exp(1j * phi), h, R=R, tau0=tau0)
    assert seq.times[0] >= tau0
    assert seq.min_separation > R
    got = averages(seq.times, [2.0, 4.0, 6.0, 10.0])
    assert np.max(np.abs(got - seq.target)) <= 8 / h


def test_phase_sequence_rejections():
    with pytest.raises(ValueError):
        phase_sequence(2.0, (2.0,), 1.0, 64, R=1.0)
    with pytest.raises(ValueError):
        phase_sequence(2.0, (4.0,), 2.0, 64, R=1.0)
    with pytest.raises(ValueError):
        phase_sequence(2.0, (4.0,), 1.0, 64, R=0.0)


def test_incommensurate_frequencies():
    seq = phase_sequence(1.0, (math.sqrt(2),), 1.0, 256, R=0.5)
    assert seq.deviation <= 8 / 256


# -- tracking -----------------------------------------------------------------


def test_drift_period(ops2):
    assert drift_period(ops2.eigenvalues) == pytest.approx(math.pi)
    assert drift_period([0.0, 1.0, math.sqrt(2)]) is None


def test_drift_only_path_is_exact(ops1):
    res = tracking_control(ops1, [PathSegment(1.3)], h=16, delta=0.5)
    assert res.error <= 1e-10
    assert res.lab.sup_amplitude == 0.0


def _rotation_path(ops):
    return [PathSegment(0.8, gap_generator(ops, 2.0, (0, 0, 1)))]


def test_tracking_converges_and_respects_bound(ops1):
    r64 = tracking_control(ops1, _rotation_path(ops1), h=64, delta=0.5)
    r256 = tracking_control(ops1, _rotation_path(ops1), h=256, delta=0.5)
    assert r256.error <= 0.7 * r64.error
    for r in (r64, r256):
        assert r.lab.sup_amplitude <= 0.5 + 1e-15
    # staircase of cumulative lab time is non-decreasing
    for steps in r256.staircase:
        assert np.all(np.diff(steps) >= 0)


def test_path_propagator_matches_exponentials(ops1):
    G = gap_generator(ops1, 2.0, (0, 0, 1), xi=1j)
    path = [PathSegment(0.3, G), PathSegment(0.5)]
    expect = np.diag(np.exp(1j * np.asarray(ops1.eigenvalues) * 0.5)) @ expm_skew(G.effective, 0.3)
    assert np.allclose(path_propagator(ops1, path), expect)


def test_tracking_rejects_bad_arguments(ops1):
    with pytest.raises(ValueError):
        tracking_control(ops1, _rotation_path(ops1), h=64, delta=0.0)
    with pytest.raises(ValueError):
        PathSegment(0.0)


# -- planning -----------------------------------------------------------------


def test_phase_insensitive_distance():
    a = np.array([1, 0], dtype=complex)
    assert phase_insensitive_distance(a, 1j * a) == pytest.approx(0.0, abs=1e-15)
    assert phase_insensitive_distance(a, np.array([0, 1.0])) == pytest.approx(math.sqrt(2))
    U = unitary_group.rvs(3, random_state=1)
    assert phase_insensitive_distance(U, np.exp(0.4j) * U) < 1e-7


def test_identity_plan_is_empty(ops1):
    plan = plan_unitary(ops1, np.eye(4), 4)
    assert plan.segments == [] and plan.method == "identity"


def test_single_generator_recovered(ops1):
    G = gap_generator(ops1, 2.0, (0.3, 0.0, 1.0), xi=np.exp(0.4j))
    U = expm_skew(G.block(4), 0.7)
    plan = plan_unitary(ops1, U, 4)
    assert plan.predicted_error <= 1e-8
    assert phase_insensitive_distance(plan.product(ops1), U) <= 1e-8


def test_rotation_tree_star(ops2):
    tree = rotation_tree(ops2, 4)
    assert tree is not None and tree.n == 4
    assert sorted(w for w in (e.weight for e in tree.edges)) == pytest.approx([1 / math.sqrt(3)] * 3)
    assert rotation_tree(build_operators(3), 9) is None


@pytest.mark.parametrize("seed", range(5))
def test_haar_targets_factorise(ops2, seed):
    U = unitary_group.rvs(4, random_state=seed)
    plan = plan_unitary(ops2, U, 4)
    assert len(plan.segments) <= 200
    # re-multiply independently of the planner
    W = np.eye(ops2.dim, dtype=complex)
    for seg in plan.segments:
        if seg.kind == "drift":
            W = np.diag(np.exp(1j * np.asarray(ops2.eigenvalues) * seg.angle)) @ W
        else:
            G = gap_generator(ops2, seg.sigma, seg.v, xi=seg.xi)
            W = expm_skew(G.effective, seg.angle) @ W
    assert phase_insensitive_distance(W[:4, :4], U) <= 1e-3
    assert np.max(np.abs(W[:4, 4:])) <= 1e-10


def test_plan_json_round_trip(ops2):
    plan = plan_unitary(ops2, unitary_group.rvs(4, random_state=7), 4)
    back = ControlPlan.from_dict(plan.to_dict())
    assert np.allclose(back.product(ops2), plan.product(ops2))
    assert set(plan.to_dict()) == {"n", "target", "segments", "residual", "method"}


def test_nine_level_targets_need_brackets():
    ops = build_operators(3)
    with pytest.raises(PlanningError):
        plan_unitary(ops, unitary_group.rvs(9, random_state=0), 9)


def test_compatible_generators_block_diagonal(ops3):
    for sigma, v, X in compatible_generators(ops3, 4):
        assert X.shape == (4, 4)
        full = gap_generator(ops3, sigma, v).matrix
        assert not np.any(full[:4, 4:])


def test_non_unitary_target_rejected(ops1):
    with pytest.raises(ValueError):
        plan_unitary(ops1, 2 * np.eye(4), 4)


def test_state_transfer_plan(ops2):
    a = StateVector.basis_state(ops2.ordering, 0, 0)
    b = StateVector.basis_state(ops2.ordering, 1, 1)
    plan = plan_state_transfer(ops2, a, b, 4)
    assert plan.predicted_error <= 1e-10
    out = plan.product(ops2) @ a.amplitudes[:4]
    assert abs(abs(np.vdot(out, b.amplitudes[:4])) - 1) <= 1e-10


# -- steering -----------------------------------------------------------------


def test_identical_states_need_no_control(ops3):
    y = StateVector.basis_state(ops3.ordering, 1, 0)
    control, err = steer_state(ops3, y, y, 0.1, 0.5)
    assert control.pieces.shape[0] == 0 and err == 0.0


def test_steering_validates_with_leakage(ops3):
    a = StateVector.basis_state(ops3.ordering, 0, 0)
    b = StateVector.basis_state(ops3.ordering, 1, -1)
    res = steer_state(ops3, a, b, 0.1, 0.5)
    assert res.achieved_error <= 0.1
    assert res.sup_amplitude <= 0.5
    assert res.validation_ell_max == 5
    # independent re-simulation of the emitted schedule on the larger truncation
    big = build_operators(5)
    out = propagate(big, a.embed(big.ordering), res.control)
    assert phase_insensitive_distance(out.amplitudes, b.embed(big.ordering).amplitudes) == pytest.approx(res.achieved_error, abs=1e-9)


def test_steering_rejects_bad_eps(ops3):
    y = StateVector.basis_state(ops3.ordering, 0, 0)
    with pytest.raises(ValueError):
        steer_state(ops3, y, y, 0.0, 0.5)
