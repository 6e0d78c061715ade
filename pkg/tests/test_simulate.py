import numpy as np
import pytest

from etcpn.errors import DimensionError, NumericDivergenceError
from etcpn.net import Marking, ModeLti, HybridModel, step_hybrid
from etcpn.simulate import (
    CASE_HORIZONS,
    FaultKind,
    FaultSpec,
    InputSignal,
    Trajectory,
    case_schedule,
    simulate,
)

from .helpers import make_benchmark_model


@pytest.fixture
def model():
    return make_benchmark_model()


def test_fault_free_run_equals_net_fold(model):
    traj = simulate(model, horizon=60, noise_std=0.0, seed=1)
    marking = model.net().initial_marking.copy()
    u_seq = traj.u
    for k in range(60):
        marking = step_hybrid(marking, model, u_seq[k])
        assert marking.mode() == traj.mode[k]
        if k + 1 < 60:
            assert np.array_equal(marking.continuous[1:], traj.x[k + 1])


def test_zero_everything_stays_zero(model):
    traj = simulate(
        model,
        input_signal=InputSignal(kind="constant", amplitude=0.0),
        horizon=30,
        noise_std=0.0,
        seed=0,
    )
    assert np.allclose(traj.x, 0) and np.allclose(traj.y, 0)


def test_case1_blocking_freezes_mode_trace(model):
    faults = case_schedule(1)
    traj = simulate(model, faults=faults, horizon=45, noise_std=0.0, seed=42)
    assert np.all(traj.mode[13:18] == 1)
    assert np.all(traj.mode[30:35] == 2)
    assert not traj.sigma[13:18].any()
    assert not traj.sigma[30:35].any()
    assert np.array_equal(np.flatnonzero(traj.fault_active), np.r_[13:18, 30:35])


def test_blocking_without_mode_freezes_current(model):
    spec = FaultSpec(FaultKind.MODE_BLOCKING, 5, 40)
    traj = simulate(model, faults=[spec], horizon=45, noise_std=0.0, seed=42)
    held = traj.mode[5]
    assert np.all(traj.mode[5:41] == held)


def test_sensor_fault_shifts_output_only(model):
    base = simulate(model, horizon=20, noise_std=0.0, seed=3)
    spec = FaultSpec(FaultKind.SENSOR_ADDITIVE, 4, 8, magnitude=0.7)
    faulty = simulate(model, faults=[spec], horizon=20, noise_std=0.0, seed=3)
    assert np.array_equal(base.x, faulty.x)
    assert np.allclose(faulty.y[4:9] - base.y[4:9], 0.7)
    assert np.array_equal(base.y[:4], faulty.y[:4])


def test_state_fault_perturbs_dynamics(model):
    base = simulate(model, horizon=20, noise_std=0.0, seed=3)
    spec = FaultSpec(FaultKind.STATE_ADDITIVE, 4, 6, magnitude=0.5)
    faulty = simulate(model, faults=[spec], horizon=20, noise_std=0.0, seed=3)
    assert np.array_equal(base.x[:5], faulty.x[:5])
    # Fx = [1; 0]: the fault enters x1 one step later
    assert not np.array_equal(base.x[5], faulty.x[5])


def test_out_of_horizon_fault_changes_nothing(model):
    spec = FaultSpec(FaultKind.SENSOR_ADDITIVE, 100, 120, magnitude=2.0)
    a = simulate(model, horizon=40, seed=9)
    b = simulate(model, faults=[spec], horizon=40, seed=9)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert np.array_equal(a.mode, b.mode)


def test_determinism_bit_identical(model):
    a = simulate(model, faults=case_schedule(3), horizon=50, noise_std=0.02, seed=77)
    b = simulate(model, faults=case_schedule(3), horizon=50, noise_std=0.02, seed=77)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.y, b.y)
    assert np.array_equal(a.sigma, b.sigma)


def test_divergence_names_the_step():
    mode = ModeLti([[2.0]], [[0.0]], [[1.0]], [[0.0]], [[0.0]])
    model = HybridModel([mode], [], initial_state=[1e200], initial_mode=1)
    with pytest.raises(NumericDivergenceError) as err:
        simulate(model, horizon=2000, noise_std=0.0, seed=0)
    assert err.value.step < 2000


def test_case_schedules_match_study_windows():
    c1 = case_schedule(1)
    assert [(s.kind, s.start, s.end, s.mode) for s in c1] == [
        (FaultKind.MODE_BLOCKING, 13, 17, 1),
        (FaultKind.MODE_BLOCKING, 30, 34, 2),
    ]
    c2 = case_schedule(2)
    assert all(s.kind is FaultKind.SENSOR_ADDITIVE for s in c2)
    assert [(s.start, s.end) for s in c2] == [(5, 10), (25, 30)]
    c3 = case_schedule(3)
    kinds = [s.kind for s in c3]
    assert kinds.count(FaultKind.SENSOR_ADDITIVE) == 2
    assert kinds.count(FaultKind.MODE_BLOCKING) == 2
    # the last two specs overlap: the simultaneous sensor + blocking window
    assert (c3[2].start, c3[2].end) == (37, 41)
    assert (c3[3].start, c3[3].end) == (37, 41) and c3[3].mode == 2
    with pytest.raises(DimensionError):
        case_schedule(4)
    assert CASE_HORIZONS == {1: 45, 2: 45, 3: 50}


class TestInputSignal:
    def test_step_with_duration_is_pulse(self):
        u = InputSignal(kind="step", amplitude=2.0, start=3, duration=2).sequence(8)
        assert np.array_equal(u[:, 0], [0, 0, 0, 2, 2, 0, 0, 0])

    def test_sine_matches_formula(self):
        sig = InputSignal(kind="sine", amplitude=0.5, period=10.0, phase=0.1)
        u = sig.sequence(25)
        k = np.arange(25)
        assert np.allclose(u[:, 0], 0.5 * np.sin(2 * np.pi * k / 10.0 + 0.1))

    def test_prbs_deterministic_given_seed(self):
        a = InputSignal(kind="prbs", amplitude=1.0, period=3, seed=5).sequence(40)
        b = InputSignal(kind="prbs", amplitude=1.0, period=3, seed=5).sequence(40)
        assert np.array_equal(a, b)
        assert set(np.unique(a)) <= {-1.0, 1.0}

    def test_unknown_kind_rejected(self):
        with pytest.raises(DimensionError):
            InputSignal(kind="sawtooth").sequence(5)
