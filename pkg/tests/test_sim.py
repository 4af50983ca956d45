import math

import numpy as np
import pytest

from lure_verify import FeedforwardNet, LtiSystem, LureSystem, fixture_path, load_lure_system
from lure_verify import verify_stability
from lure_verify.errors import DimensionError, DivergenceError, DomainError, EstimationError
from lure_verify.nn import SectorBound
from lure_verify.sim import (
    SimConfig,
    Trajectory,
    batch_simulate,
    check_envelope,
    csv_header,
    estimate_decay_rate,
    initial_conditions,
    integrate,
    monitor_positivity,
    monitor_sector,
    read_csv,
    worker_count,
    write_csv,
)


def decaying_scalar():
    # B = 0, so the controller is irrelevant and x(t) = x0 exp(-t)
    return LureSystem(LtiSystem([[-1.0]], [[0.0]], [[1.0]]),
                      FeedforwardNet([[[3.0]], [[-2.0]]], "tanh"))


def rk4_error(sys_, x0, step, horizon, reference):
    traj = integrate(sys_, x0, SimConfig(step=step, horizon=horizon))
    return np.abs(traj.states[-1] - reference).sum()


class TestConfig:
    @pytest.mark.parametrize("kwargs", [
        {"step": 0.0}, {"horizon": -1.0}, {"step": 2.0, "horizon": 1.0},
        {"positivity_tol": -1e-9}, {"ic_max": -1.0},
    ])
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SimConfig(**kwargs)

    def test_steps(self):
        assert SimConfig().n_steps == 10_000
        assert SimConfig(step=0.1, horizon=1.0).n_steps == 10
        assert SimConfig(step=0.3, horizon=1.0).n_steps == 4


class TestIntegrate:
    def test_equilibrium_is_exact(self, demo_system):
        traj = integrate(demo_system, [0.0, 0.0], SimConfig(horizon=1.0))
        assert np.max(np.abs(traj.states)) == 0.0
        assert np.max(np.abs(traj.inputs)) == 0.0

    def test_closed_form_exponential(self):
        traj = integrate(decaying_scalar(), [2.0], SimConfig(step=1e-3, horizon=10.0))
        exact = 2.0 * np.exp(-traj.times)
        assert np.max(np.abs(traj.states[:, 0] - exact)) < 1e-8

    def test_shapes_and_times(self, demo_system):
        traj = integrate(demo_system, [1.0, 1.0], SimConfig(step=0.01, horizon=1.0))
        assert len(traj) == 101
        assert traj.times[0] == 0.0 and np.all(np.diff(traj.times) > 0)
        assert traj.states.shape == (101, 2)
        assert traj.inputs.shape == (101, 1)
        assert traj.outputs.shape == (101, 2)
        np.testing.assert_allclose(traj.outputs, traj.states @ demo_system.plant.C.T)
        np.testing.assert_allclose(traj.inputs, demo_system.controller(traj.outputs.T).T)

    def test_envelope_and_positivity(self, demo_system):
        cert = verify_stability(demo_system)
        traj = integrate(demo_system, [1.0, 1.0])
        assert check_envelope(traj, cert).violations == 0
        assert monitor_positivity(traj).violations == 0
        assert traj.states.min() >= -1e-8

    def test_rk4_order(self, demo_system):
        x0 = [3.0, 1.0]
        ref = integrate(demo_system, x0, SimConfig(step=1e-3, horizon=1.0)).states[-1]
        e1 = rk4_error(demo_system, x0, 0.1, 1.0, ref)
        e2 = rk4_error(demo_system, x0, 0.05, 1.0, ref)
        assert 8 <= e1 / e2 <= 32

    def test_divergence(self):
        s = load_lure_system(fixture_path("divergent_scalar"))
        with pytest.raises(DivergenceError) as info:
            integrate(s, [1.0], SimConfig(step=1e-2, horizon=20.0))
        partial = info.value.trajectory
        assert partial.diverged
        assert partial.norms[-1] > 1e12 and np.all(np.isfinite(partial.states))
        assert partial.times[-1] < 20.0

    @pytest.mark.parametrize("x0, err", [([1.0], DimensionError), ([-1.0, 0.0], DomainError),
                                         ([np.nan, 0.0], DomainError)])
    def test_bad_initial_state(self, demo_system, x0, err):
        with pytest.raises(err):
            integrate(demo_system, x0)


class TestBatch:
    def test_demo_batch_converges(self, demo_system):
        cert = verify_stability(demo_system)
        trajs = batch_simulate(demo_system, 50)
        assert len(trajs) == 50
        for tr in trajs:
            assert not tr.diverged
            assert tr.norms[-1] < 1e-3
            assert monitor_sector(tr, demo_system.bound).violations == 0
            assert monitor_positivity(tr).violations == 0
            assert check_envelope(tr, cert).violations == 0

    def test_initial_conditions(self):
        x = initial_conditions(3, 1000, SimConfig(seed=4))
        assert x.shape == (1000, 3)
        assert x.min() >= 0.0 and x.max() <= 5.0
        np.testing.assert_array_equal(x, initial_conditions(3, 1000, SimConfig(seed=4)))

    def test_deterministic(self, demo_system):
        cfg = SimConfig(step=0.01, horizon=2.0, seed=11)
        a = batch_simulate(demo_system, 1, cfg)[0]
        b = batch_simulate(demo_system, 1, cfg)[0]
        np.testing.assert_array_equal(a.states, b.states)

    def test_batch_equals_single_runs(self, demo_system):
        cfg = SimConfig(step=0.01, horizon=2.0, seed=5)
        batch = batch_simulate(demo_system, 4, cfg)
        for tr in batch:
            single = integrate(demo_system, tr.x0, cfg)
            np.testing.assert_allclose(tr.states, single.states, rtol=1e-14, atol=1e-300)

    def test_threads_do_not_change_results(self, demo_system, monkeypatch):
        cfg = SimConfig(step=0.01, horizon=2.0, seed=5)
        serial = batch_simulate(demo_system, 7, cfg)
        monkeypatch.setenv("LURE_VERIFY_THREADS", "3")
        assert worker_count() == 3
        threaded = batch_simulate(demo_system, 7, cfg)
        for a, b in zip(serial, threaded):
            np.testing.assert_allclose(a.states, b.states, rtol=1e-14, atol=1e-300)

    def test_worker_count_parsing(self, monkeypatch):
        monkeypatch.setenv("LURE_VERIFY_THREADS", "many")
        assert worker_count() == 1
        monkeypatch.setenv("LURE_VERIFY_THREADS", "0")
        assert worker_count() == 1

    def test_divergent_batch_is_not_fatal(self):
        s = load_lure_system(fixture_path("divergent_scalar"))
        assert max(np.linalg.eigvals(verify_stability(s).M_upper).real) > 0
        trajs = batch_simulate(s, 3, SimConfig(step=1e-2, horizon=20.0))
        assert len(trajs) == 3
        assert sum(tr.diverged for tr in trajs) >= 1

    def test_mixed_batch(self):
        # x0 = 0 stays put while the others blow up
        s = load_lure_system(fixture_path("divergent_scalar"))
        trajs = batch_simulate(s, 2, SimConfig(step=1e-2, horizon=20.0), x0s=[[0.0], [1.0]])
        assert not trajs[0].diverged and len(trajs[0]) == 2001
        assert trajs[1].diverged and len(trajs[1]) < 2001

    def test_count(self, demo_system):
        with pytest.raises(ValueError):
            batch_simulate(demo_system, 0)


class TestMonitors:
    def test_constructed_sector_violation(self):
        t = np.array([0.0, 1.0])
        y = np.array([[1.0], [2.0]])
        traj = Trajectory(t, y.copy(), np.array([[0.5], [3.0]]), y)
        rep = monitor_sector(traj, SectorBound([[-1.0]], [[1.0]]))
        assert rep.violations == 1 and rep.checked == 2
        assert rep.worst_margin == pytest.approx(-1.0)

    def test_negative_outputs_skipped(self):
        t = np.array([0.0, 1.0])
        traj = Trajectory(t, np.zeros((2, 1)), np.array([[5.0], [0.0]]),
                          np.array([[-1.0], [0.0]]))
        rep = monitor_sector(traj, SectorBound([[-1.0]], [[1.0]]))
        assert (rep.checked, rep.skipped, rep.violations) == (1, 1, 0)

    def test_zero_trajectory(self, demo_system):
        traj = integrate(demo_system, [0.0, 0.0], SimConfig(step=0.1, horizon=1.0))
        rep = monitor_sector(traj, demo_system.bound)
        assert rep.violations == 0 and rep.worst_margin == 0.0

    def test_positivity_report(self):
        t = np.arange(3.0)
        x = np.array([[1.0, 0.0], [-1e-9, 0.5], [-1e-6, 0.0]])
        traj = Trajectory(t, x, np.zeros((3, 1)), x)
        rep = monitor_positivity(traj, 1e-8)
        assert rep.violations == 1 and rep.min_state == -1e-6


class TestDecayRate:
    def test_closed_form(self):
        traj = integrate(decaying_scalar(), [2.0])
        assert estimate_decay_rate(traj) == pytest.approx(1.0, abs=1e-3)

    def test_certificate_is_lower_bound(self, demo_system):
        cert = verify_stability(demo_system)
        for tr in batch_simulate(demo_system, 10, SimConfig(seed=2)):
            assert estimate_decay_rate(tr) >= cert.decay.epsilon - 1e-3

    def test_zero_trajectory(self, demo_system):
        traj = integrate(demo_system, [0.0, 0.0], SimConfig(step=0.1, horizon=1.0))
        with pytest.raises(EstimationError):
            estimate_decay_rate(traj)

    def test_growing_trajectory(self):
        s = load_lure_system(fixture_path("unstable_scalar"))
        traj = integrate(s, [1.0], SimConfig(step=0.01, horizon=1.0))
        with pytest.raises(EstimationError):
            estimate_decay_rate(traj)


class TestCsv:
    def test_header(self):
        assert csv_header(2, 1, 3) == ["t", "x1", "x2", "u1", "y1", "y2", "y3"]

    def test_round_trip_exact(self, demo_system, tmp_path):
        traj = integrate(demo_system, [math.pi, 1 / 3], SimConfig(step=0.1, horizon=1.0))
        path = tmp_path / "traj.csv"
        write_csv(traj, path)
        assert path.read_text().splitlines()[0] == "t,x1,x2,u1,y1,y2"
        back = read_csv(path)
        for name in ("times", "states", "inputs", "outputs"):
            np.testing.assert_array_equal(getattr(back, name), getattr(traj, name))
