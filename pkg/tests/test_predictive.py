import math

import numpy as np
import pytest

from streamwaic.datasets import HierDataset, SvDataset, generate_hier
from streamwaic.exceptions import DomainError
from streamwaic.model import pointwise_log_density, simulate_latent
from streamwaic.models import build_model
from streamwaic.oracle import batch_log_mean_exp
from streamwaic.partition import build_partition, group_by
from streamwaic.predictive import (
    CONDITIONAL,
    MARGINAL,
    PredictiveConfig,
    PredictiveEvaluator,
    conditional_h,
    lse_snapshots,
    marginal_h,
)

THETA_H = {"mu": 2.0, "tau": 0.5, "sigma": 1.0}


@pytest.fixture(scope="module")
def hier():
    data = generate_hier(THETA_H, 4, 5, np.random.default_rng(0))
    return data, build_model("H", data)


def test_checkpoints_are_floored_quarters():
    assert PredictiveConfig(MARGINAL, 1000).checkpoints == (250, 500, 750, 1000)
    assert PredictiveConfig(MARGINAL, 10).checkpoints == (2, 5, 7, 10)
    assert PredictiveConfig(MARGINAL, 3).checkpoints == (1, 1, 2, 3)
    assert PredictiveConfig(CONDITIONAL, 500).K == 1
    assert PredictiveConfig(CONDITIONAL).fractions == (1.0,)


@pytest.mark.parametrize("kw", [{"mode": "both"}, {"mode": MARGINAL, "K": 0}, {"mode": MARGINAL, "K": 2.5}])
def test_bad_config_rejected(kw):
    with pytest.raises(DomainError):
        PredictiveConfig(**kw)


def test_conditional_single_point_model_s():
    model = build_model("S", HierDataset(([0.0],)))
    h = conditional_h(model, build_partition(model.data_labels), {"mu": 0.0, "sigma": 1.0})
    np.testing.assert_allclose(h, [-0.9189385332046727], rtol=0, atol=1e-15)


def test_group_h_is_sum_of_singletons(hier):
    data, model = hier
    sample = dict(THETA_H, b=np.array([1.8, 2.1, 2.4, 1.9]))
    singles = conditional_h(model, build_partition(model.data_labels), sample)
    grouped = conditional_h(model, group_by(model.data_labels, lambda s: s.split(",")[0]), sample)
    np.testing.assert_allclose(grouped, singles.reshape(4, 5).sum(axis=1), rtol=1e-15)
    whole = conditional_h(model, build_partition(model.data_labels, [model.data_labels]), sample)
    assert whole[0] == pytest.approx(singles.sum(), rel=1e-14)


@pytest.mark.parametrize("name", ["S", "I"])
def test_latent_free_marginal_equals_conditional(name):
    if name == "S":
        data = generate_hier(THETA_H, 3, 4, np.random.default_rng(1))
        sample = {"mu": 1.5, "sigma": 0.8}
    else:
        data = SvDataset(np.random.default_rng(1).normal(size=20))
        sample = {"sigma": 1.2}
    model = build_model(name, data)
    part = build_partition(model.data_labels)
    cond = conditional_h(model, part, sample)
    rng = np.random.default_rng(0)
    marg = marginal_h(model, part, sample, PredictiveConfig(MARGINAL, 50), rng)
    assert marg.shape == (4, part.n_elements)
    assert all(row.tobytes() == cond.tobytes() for row in marg)
    # nothing was drawn
    assert rng.bit_generator.state == np.random.default_rng(0).bit_generator.state


def test_k_equals_one_uses_one_latent_draw(hier):
    data, model = hier
    part = build_partition(model.data_labels)
    marg = marginal_h(model, part, THETA_H, PredictiveConfig(MARGINAL, 1), np.random.default_rng(5))
    draw = simulate_latent(model, THETA_H, np.random.default_rng(5), size=1)
    cond = conditional_h(model, part, {**THETA_H, "b": draw["b"][0]})
    for row in marg:
        np.testing.assert_allclose(row, cond, rtol=1e-14)


def test_snapshots_are_prefixes_of_one_draw_stream(hier):
    data, model = hier
    part = build_partition(model.data_labels)
    K = 40
    marg = marginal_h(model, part, THETA_H, PredictiveConfig(MARGINAL, K), np.random.default_rng(3))
    draws = simulate_latent(model, THETA_H, np.random.default_rng(3), size=K)
    terms = pointwise_log_density(model, {**THETA_H, **draws})
    for row, k in zip(marg, (10, 20, 30, 40)):
        want = np.array([batch_log_mean_exp(terms[:k, m]) for m in range(part.n_elements)])
        np.testing.assert_allclose(row, want, rtol=1e-12)


def test_marginal_is_deterministic_for_a_seed(hier):
    data, model = hier
    part = build_partition(model.data_labels)
    cfg = PredictiveConfig(MARGINAL, 64)
    a = marginal_h(model, part, THETA_H, cfg, np.random.default_rng(12))
    b = marginal_h(model, part, THETA_H, cfg, np.random.default_rng(12))
    assert a.tobytes() == b.tobytes()


def test_draw_count_is_k_per_sample_regardless_of_m():
    for J in (2, 10):
        data = generate_hier(THETA_H, J, 3, np.random.default_rng(0))
        model = build_model("H", data)
        ev = PredictiveEvaluator(model, [(build_partition(model.data_labels), PredictiveConfig(MARGINAL, 30)),
                                         (group_by(model.data_labels, lambda s: s.split(",")[0]),
                                          PredictiveConfig(MARGINAL, 20))])
        for _ in range(3):
            ev(THETA_H, np.random.default_rng(1))
        assert ev.n_latent_draws == 3 * 30


def test_strict_and_blocked_snapshots_agree():
    rng = np.random.default_rng(4)
    terms = rng.uniform(-800, 5, size=(103, 6))
    cps = PredictiveConfig(MARGINAL, 103).checkpoints
    strict = lse_snapshots(terms, cps, block_size=1)
    blocked = lse_snapshots(terms, cps, block_size=16)
    whole = lse_snapshots(terms, cps)
    np.testing.assert_allclose(blocked, strict, rtol=1e-12)
    np.testing.assert_allclose(whole, strict, rtol=1e-12)


@pytest.mark.parametrize("block_size", [None, 3, 7])
def test_chunked_evaluator_matches_direct_snapshots(hier, block_size):
    data, model = hier
    grouped = group_by(model.data_labels, lambda s: s.split(",")[0])
    ungrouped = build_partition(model.data_labels)
    configs = [(ungrouped, PredictiveConfig(MARGINAL, 30)), (grouped, PredictiveConfig(MARGINAL, 3))]
    got = PredictiveEvaluator(model, configs, block_size=block_size)(THETA_H, np.random.default_rng(5))
    draws = simulate_latent(model, THETA_H, np.random.default_rng(5), size=30)
    pointwise = pointwise_log_density(model, {**THETA_H, **draws})
    for (part, cfg), h in zip(configs, got):
        terms = part.reducer(model.data_labels)(pointwise[:cfg.K])
        np.testing.assert_allclose(h, lse_snapshots(terms, cfg.checkpoints, block_size=1), rtol=1e-12)
    assert got[1].shape == (4, 4) and np.array_equal(got[1][0], got[1][1])


def test_zero_density_everywhere_warns_and_gives_minus_inf():
    terms = np.full((8, 2), -np.inf)
    terms[:, 1] = 0.0
    out = lse_snapshots(terms, (2, 4, 6, 8))
    assert np.all(out[:, 0] == -np.inf) and np.all(out[:, 1] == 0.0)


def test_closed_form_marginal_for_one_point():
    # marginal of y under b ~ N(mu, tau), y | b ~ N(b, sigma) is N(mu, sqrt(sigma^2 + tau^2))
    model = build_model("H", HierDataset(([2.7],)))
    part = build_partition(model.data_labels)
    K = 100_000
    got = marginal_h(model, part, THETA_H, PredictiveConfig(MARGINAL, K), np.random.default_rng(8))[-1, 0]
    sd = math.sqrt(1.0 + 0.25)
    want = -0.5 * math.log(2 * math.pi) - math.log(sd) - 0.5 * ((2.7 - 2.0) / sd) ** 2
    assert abs(got - want) < 0.01
