
import numpy as np
import pytest

from qsdlab.model_measure import mean_hitting_time
from qsdlab.path_simulator import (ALIVE, ESCAPED, KILLED, DistanceEstimate, PathEnsembleStats, SimConfig,
                                   SimulationError, conditional_law_distance, exp_moment_probe, extrapolate_eps,
                                   fit_decay_rate, interval_hitting_mc, kaplan_meier, occupation_distance,
                                   run_ensemble, tv_distance, weighted_log_slope, wilson_halfwidth,
                                   write_bins_csv, write_hits_csv, write_survival_csv)

LAMBDA0 = 2.0916914  # independent Nystrom reference, see test_spectral_solver
EDGES = np.array([-np.inf, -1.0, 0.0, 1.0, np.inf])


@pytest.fixture(scope="module")
def small_run(poly):
    cfg = SimConfig(eps=1e-2, horizon=3.0, n_paths=20_000, seed=123, checkpoints=(0.5, 1.0),
                    occupation_time=1.0)
    return run_ensemble(poly, cfg, occupation_edges=EDGES)


@pytest.mark.parametrize("kw", [dict(x0=0.0), dict(eps=0.0), dict(eps=2.0), dict(dt=31.0), dict(n_paths=0),
                                dict(kappa=1.5), dict(checkpoints=(40.0,)), dict(occupation_time=0.0),
                                dict(R_target=-1.0)])
def test_config_rejections(kw):
    with pytest.raises(ValueError):
        SimConfig(**kw)


def test_outcomes_are_consistent(small_run):
    s = small_run
    assert s.n_paths == 20_000
    assert set(np.unique(s.flag)) <= {ALIVE, KILLED, ESCAPED}
    assert np.all(s.t_event[s.flag == ALIVE] == s.config.horizon)
    assert np.all((s.t_event[s.flag == KILLED] > 0) & (s.t_event[s.flag == KILLED] <= s.config.horizon))
    assert s.killed + s.escaped + np.sum(s.flag == ALIVE) == s.n_paths
    # positions are recorded exactly for paths alive at the checkpoint
    alive_half = np.sum(s.t_event > 0.5)
    assert s.survivors(0).size == alive_half
    assert np.all(np.abs(s.survivors(0)) > s.config.eps)


def test_survival_rate_close_to_ground_state(small_run):
    lam, se = fit_decay_rate(small_run, (0.5, 2.5))
    assert se < 0.05
    # eps = 1e-2 kills early; the bias is positive and of order eps^(alpha-1)
    assert LAMBDA0 < lam < 1.2 * LAMBDA0
    assert small_run.survival[0] == 1.0
    assert np.all(np.diff(small_run.survival) <= 0)


def test_insufficient_tail(small_run):
    with pytest.raises(SimulationError) as info:
        fit_decay_rate(small_run, (2.97, 3.0))
    assert info.value.code == "INSUFFICIENT_TAIL"


def test_occupation_sums_to_one(small_run):
    occ = small_run.occupation_survivors()
    assert occ.shape[1] == EDGES.size - 1
    assert np.allclose(occ.sum(axis=1), 1.0, atol=1e-9)
    est = occupation_distance(small_run, [0.25] * 4, resamples=50)
    assert 0.0 <= est.tv <= 1.0 and est.samples == occ.shape[0]


def test_conditional_histogram_and_distance(small_run):
    h = small_run.conditional_hist(small_run.checkpoint_index(1.0), EDGES)
    assert h.sum() == pytest.approx(1.0)
    # the law is symmetric
    assert abs(h[0] + h[1] - 0.5) < 0.05
    est = conditional_law_distance(small_run, 1.0, EDGES, h, resamples=50)
    assert est.tv == pytest.approx(0.0, abs=1e-12) and est.ci_halfwidth > 0
    with pytest.raises(SimulationError, match="TOO_FEW_SURVIVORS"):
        conditional_law_distance(small_run, 1.0, EDGES, h, min_survivors=10 ** 6)
    with pytest.raises(KeyError):
        small_run.checkpoint_index(0.75)


def test_bitwise_identical_across_threads_and_replayable(poly):
    cfg = SimConfig(eps=1e-2, horizon=1.0, n_paths=5000, seed=99, checkpoints=(0.5,), occupation_time=0.5)
    runs = [run_ensemble(poly, cfg, occupation_edges=EDGES, threads=k) for k in (1, 3)]
    for name in ("t_event", "flag", "positions", "occupation", "substeps"):
        a, b = getattr(runs[0], name), getattr(runs[1], name)
        assert np.array_equal(a, b, equal_nan=True), name
    head = run_ensemble(poly, SimConfig(eps=1e-2, horizon=1.0, n_paths=10, seed=99, checkpoints=(0.5,)))
    assert np.array_equal(head.t_event, runs[0].t_event[:10])
    other = run_ensemble(poly, SimConfig(eps=1e-2, horizon=1.0, n_paths=10, seed=100, checkpoints=(0.5,)))
    assert not np.array_equal(other.t_event, head.t_event)


def test_interval_hitting_against_quadrature(poly):
    est = interval_hitting_mc(poly, 1.0, 2.0, SimConfig(horizon=30.0, n_paths=20_000, seed=5))
    ref = mean_hitting_time(poly, 1.0, 2.0)
    assert est.horizon_exceeded == 0.0
    assert abs(est.mean - ref) < 4 * est.std_error + 0.01 * ref
    inside = interval_hitting_mc(poly, 1.0, 0.5, SimConfig())
    assert inside.mean == 0.0


def test_kaplan_meier_by_hand():
    t = np.array([1.0, 2.0, 2.0, 3.0, 5.0])
    flag = np.array([KILLED, ESCAPED, KILLED, KILLED, ALIVE])
    got = kaplan_meier(t, flag, [0.0, 1.0, 2.0, 4.0, 5.0])
    # risk sets 5, 4 (kill before the tied escape), 2
    want = [1.0, 4 / 5, 4 / 5 * 3 / 4, 4 / 5 * 3 / 4 * 1 / 2, 4 / 5 * 3 / 4 * 1 / 2]
    assert np.allclose(got, want)


def test_wilson_textbook_value():
    # 50 successes out of 100: interval (0.4038, 0.5962)
    assert float(wilson_halfwidth(0.5, 100)) == pytest.approx(0.0962, abs=1e-4)


def test_weighted_slope_exact_on_exponential():
    t = np.linspace(1, 3, 20)
    lam, se = weighted_log_slope(t, np.exp(-1.7 * t), 10 ** 6)
    assert lam == pytest.approx(1.7, rel=1e-12) and se > 0


def test_extrapolation_exact_on_linear_data():
    eps = np.array([1e-2, 10 ** -2.5, 1e-3])
    rates = 2.0 + 3.0 * eps ** 0.5
    assert extrapolate_eps(eps, rates, 1.5) == pytest.approx(2.0, rel=1e-12)


def test_tv_and_pass_rule():
    assert tv_distance([0.5, 0.5], [1.0, 0.0]) == 0.5
    assert DistanceEstimate(0.06, 0.02, 100).passes(0.05)
    assert not DistanceEstimate(0.08, 0.02, 100).passes(0.05)


def _synthetic(t, flag):
    cfg = SimConfig(horizon=float(t.max()) + 1.0, n_paths=t.size)
    empty = np.zeros(0)
    return PathEnsembleStats(cfg, t, flag, np.zeros((t.size, 0)), None, None, np.zeros(t.size, dtype=np.int64),
                             empty, empty, empty)


def test_exp_moment_probe_on_exponential_times():
    rng = np.random.default_rng(0)
    t = rng.exponential(1 / 2.0, 200_000)
    s = _synthetic(t, np.full(t.size, KILLED, dtype=np.int8))
    # for T ~ Exp(2): E exp(T/2) = 2/(2 - 1/2), and lam >= 2 has no finite moment
    probe = exp_moment_probe(s, 0.5)
    assert probe.mean == pytest.approx(2.0 / 1.5, abs=5 * probe.std_error)
    assert not probe.divergent
    heavy = exp_moment_probe(s, 2.2)
    assert heavy.divergent
    with pytest.raises(SimulationError, match="NO_HITS"):
        exp_moment_probe(_synthetic(t[:3], np.full(3, ALIVE, dtype=np.int8)), 1.0)


def test_writers(tmp_path, small_run):
    write_survival_csv(tmp_path / "s.csv", small_run)
    write_bins_csv(tmp_path / "b.csv", EDGES, [0.25] * 4)
    write_hits_csv(tmp_path / "h.csv", small_run)
    assert (tmp_path / "s.csv").read_text().splitlines()[0] == "t,fraction,ci"
    b = (tmp_path / "b.csv").read_text().splitlines()
    assert b[0] == "bin_lo,bin_hi,mass" and b[1].startswith("-inf,-1,")
    h = (tmp_path / "h.csv").read_text().splitlines()
    assert h[0] == "path_id,t_hit,flag" and len(h) == small_run.n_paths + 1


def test_larger_kill_radius_kills_no_later(poly):
    # sub-steps depend on |y| only while a path is alive, so runs at eps and 2 eps share
    # every random number and killing is pathwise monotone in eps
    base = dict(horizon=2.0, n_paths=3000, seed=77, checkpoints=(0.5, 1.0, 2.0))
    small = run_ensemble(poly, SimConfig(eps=5e-3, **base))
    big = run_ensemble(poly, SimConfig(eps=1e-2, **base))
    assert np.all(big.t_event <= small.t_event)
    for t in base["checkpoints"]:
        i = int(round(t / small.config.survival_step))
        assert small.survival[i] >= big.survival[i]
