import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tro.baselines import (
    CONSTANT,
    EPOCH_DOUBLING,
    FINAL,
    SGD,
    SUFFIX,
    UNIFORM,
    BaselineConfig,
    checkpoint_grid,
    run_baseline,
    samples_to_target,
    sgd_trajectory,
)
from tro.exceptions import InvalidConfigError, InvalidInputError
from tro.losses import SQUARED, LossModel
from tro.synthdata import make_instance, population_risk, sample
from tro.targetrisk import StreamOracle


@given(st.integers(1, 10**7), st.floats(1.01, 3.0))
def test_checkpoint_grid(budget, ratio):
    g = checkpoint_grid(budget, ratio)
    assert g[0] == 0 and g[-1] == budget
    assert np.all(np.diff(g) > 0)
    inner = g[1:-1].astype(float)
    # geometric spacing: no gap wider than one ratio step
    assert np.all(inner[1:] < (inner[:-1] + 1) * ratio)


def test_checkpoint_grid_small():
    assert checkpoint_grid(10).tolist() == [0, 1, 2, 3, 4, 5, 6, 7, 8, 10]


@pytest.mark.parametrize(
    "kwargs",
    [dict(kind="adam"), dict(kind=SGD, step_rule="halving"), dict(kind=EPOCH_DOUBLING, step_rule="inverse-t"),
     dict(kind=EPOCH_DOUBLING, averaging=FINAL), dict(averaging="median"), dict(total_budget=0),
     dict(step_c=0.0), dict(first_epoch=0), dict(grid_ratio=1.0)],
)
def test_config_validation(kwargs):
    with pytest.raises(InvalidConfigError):
        BaselineConfig(**kwargs)


def test_config_defaults():
    assert BaselineConfig().averaging == SUFFIX and BaselineConfig().step_rule == "inverse-t"
    e = BaselineConfig(kind=EPOCH_DOUBLING)
    assert e.averaging == UNIFORM and e.step_rule == "halving"


def test_noiseless_start_at_optimum_stays():
    inst = make_instance(3, 2.0, 0.0, seed=6)
    res = run_baseline(BaselineConfig(kind=SGD, total_budget=5000, averaging=FINAL), inst, w0=inst.w_star)
    np.testing.assert_array_equal(res.w_final, inst.w_star)
    assert res.final_risk == 0.0
    # averages of identical iterates only pick up rounding
    for cfg in (BaselineConfig(kind=SGD, total_budget=5000), BaselineConfig(kind=EPOCH_DOUBLING, total_budget=5000)):
        res = run_baseline(cfg, inst, w0=inst.w_star)
        np.testing.assert_allclose(res.w_final, inst.w_star, rtol=1e-12)


def _hand_sgd(X, y, w0, R, step):
    w, out = w0, []
    for t, (x, label) in enumerate(zip(X[:, 0], y)):
        w = min(R, max(-R, w - step(t + 1) * (w * x - label) * x))
        out.append(w)
    return out


@pytest.mark.parametrize("averaging", [FINAL, UNIFORM, SUFFIX])
def test_three_step_hand_simulation(averaging):
    inst = make_instance(1, 1.0, 0.4, radius_R=1.0, seed=3)
    cfg = BaselineConfig(kind=SGD, total_budget=3, averaging=averaging, step_c=2.0, radius_R=0.6)
    res = run_baseline(cfg, inst, w0=[0.1])
    X, y = sample(inst, 3)
    w = _hand_sgd(X, y, 0.1, 0.6, lambda t: 2.0 / (inst.alpha * t))
    expected = {FINAL: w[2], UNIFORM: (w[0] + w[1] + w[2]) / 3, SUFFIX: (w[1] + w[2]) / 2}[averaging]
    assert res.w_final[0] == pytest.approx(expected, rel=1e-14)
    # checkpoints at 0, 1, 2, 3 samples
    assert [c.samples for c in res.checkpoints] == [0, 1, 2, 3]


def test_constant_step_hand_simulation():
    inst = make_instance(1, 1.0, 0.4, radius_R=1.0, seed=3)
    traj = sgd_trajectory(StreamOracle(inst), inst.loss, [0.1], 3, 0.8, 0.6)
    X, y = sample(inst, 3)
    w = _hand_sgd(X, y, 0.1, 0.6, lambda t: 0.8)
    np.testing.assert_allclose(traj[:, 0], [0.1, w[0], w[1]], rtol=1e-14)
    res = run_baseline(BaselineConfig(kind=SGD, step_rule=CONSTANT, step_c=0.8, total_budget=3, averaging=FINAL,
                                      radius_R=0.6), inst, w0=[0.1])
    assert res.w_final[0] == pytest.approx(w[2], rel=1e-14)


def test_epoch_doubling_hand_simulation():
    inst = make_instance(1, 1.0, 0.4, radius_R=1.0, seed=3)
    cfg = BaselineConfig(kind=EPOCH_DOUBLING, total_budget=3, first_epoch=1, step_c=0.5, radius_R=1.0)
    res = run_baseline(cfg, inst, w0=[0.0])
    X, y = sample(inst, 3)
    eta = 0.5 / inst.alpha
    (w1,) = _hand_sgd(X[:1], y[:1], 0.0, 1.0, lambda t: eta)
    w2, w3 = _hand_sgd(X[1:], y[1:], w1, 1.0, lambda t: eta / 2)
    assert res.centers[1][0] == pytest.approx(w1, rel=1e-14)
    assert res.w_final[0] == pytest.approx((w2 + w3) / 2, rel=1e-14)
    assert [s.samples_seen for s in res.stages] == [0, 1, 3]


def test_risk_gap_decays_like_one_over_n():
    inst = make_instance(5, 1.0, 0.3, radius_R=1.0, seed=0)
    cfg = BaselineConfig(kind=SGD, total_budget=1_000_000)
    gaps = []
    for stream in range(20):
        res = run_baseline(cfg, inst, stream=stream)
        gaps.append([(c.samples, c.risk - inst.eps_opt) for c in res.checkpoints if c.samples >= 1000])
    n = np.array([s for s, _ in gaps[0]], float)
    mean_gap = np.mean([[g for _, g in run] for run in gaps], axis=0)
    slope = np.polyfit(np.log(n), np.log(mean_gap), 1)[0]
    assert -1.3 < slope < -0.7


def test_samples_to_target_properties():
    inst = make_instance(5, 1.0, 1.0, radius_R=1.0, seed=0)
    cfg = BaselineConfig(kind=SGD, total_budget=200_000)
    start_gap = population_risk(inst, np.zeros(5)) - inst.eps_opt
    assert samples_to_target(cfg, inst, eps_target=start_gap) == 0
    targets = [3e-2, 1e-2, 3e-3, 1e-3, 3e-4]
    counts = [samples_to_target(cfg, inst, eps_target=e, stream=4) for e in targets]
    assert all(a <= b for a, b in zip(counts, counts[1:]))
    assert samples_to_target(cfg, inst, eps_target=1e-9, max_budget=1000) is None
    with pytest.raises(InvalidInputError):
        samples_to_target(cfg, inst, eps_target=0.0)


def test_samples_ratio_for_tenfold_target():
    # noise-dominated regime: excess risk ~ sigma^2 d / (2 n)
    inst = make_instance(5, 1.0, 1.0, radius_R=1.0, seed=0)
    cfg = BaselineConfig(kind=SGD, total_budget=200_000)
    ratios = []
    for stream in range(10):
        res = run_baseline(cfg, inst, stream=stream)
        ratios.append(res.samples_to_target(1e-4) / res.samples_to_target(1e-3))
    assert 10 / 3 <= np.median(ratios) <= 30


@pytest.mark.parametrize("kind", [SGD, EPOCH_DOUBLING])
def test_iterates_stay_in_hypothesis_ball(kind):
    inst = make_instance(3, 2.0, 0.5, radius_R=1.0, seed=2)
    res = run_baseline(BaselineConfig(kind=kind, total_budget=20_000, radius_R=0.5, step_c=4.0), inst)
    assert all(np.linalg.norm(c) <= 0.5 + 1e-12 for c in res.centers)
    traj = sgd_trajectory(StreamOracle(inst), inst.loss, np.zeros(3), 2000, 5.0, 0.5)
    assert np.max(np.linalg.norm(traj, axis=1)) <= 0.5 + 1e-12


def test_deterministic_per_stream():
    inst = make_instance(3, 2.0, 0.5, seed=2)
    cfg = BaselineConfig(kind=EPOCH_DOUBLING, total_budget=10_000)
    a, b = run_baseline(cfg, inst, stream=3), run_baseline(cfg, inst, stream=3)
    assert a.stages == b.stages and a.checkpoints == b.checkpoints


def test_input_checks():
    inst = make_instance(3, 2.0, 0.5, radius_R=1.0, seed=2)
    with pytest.raises(InvalidConfigError):
        run_baseline(BaselineConfig(radius_R=1e-4), inst)
    with pytest.raises(InvalidInputError):
        run_baseline(BaselineConfig(), inst, w0=[2.0, 0.0, 0.0])
    assert LossModel(SQUARED) == inst.loss
