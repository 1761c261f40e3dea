import math

import numpy as np
import pytest

from streamwaic.datasets import (
    HierDataset,
    SvDataset,
    generate_hier,
    generate_sv,
    load_dataset,
    save_dataset,
    simulate_ar1,
)
from streamwaic.exceptions import MissingParameterError, ModelConfigurationError, NumericalError
from streamwaic.model import (
    DATA,
    PARAMETER,
    ModelGraph,
    Node,
    log_joint_density,
    node_log_density,
    normal_logpdf,
    pointwise_log_density,
    simulate_latent,
)
from streamwaic.models import build_model

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def hier_data(seed=0, J=20, n_j=100, tau=0.5):
    return generate_hier({"mu": 2.0, "tau": tau, "sigma": 1.0}, J, n_j, np.random.default_rng(seed))


def test_normal_at_mode():
    assert normal_logpdf(0.0, 0.0, 1.0) == pytest.approx(-0.9189385332046727, abs=1e-15)
    assert -HALF_LOG_2PI == pytest.approx(-0.9189385, abs=1e-7)


def test_sv_observation_kernel_at_zero():
    model = build_model("P", SvDataset(np.array([0.0, 0.0])))
    values = node_log_density(model, "y", {"h": np.zeros(2)})
    np.testing.assert_allclose(values, -HALF_LOG_2PI, rtol=0, atol=1e-15)


def test_model_s_single_point():
    model = build_model("S", HierDataset(([0.0],)))
    h = pointwise_log_density(model, {"mu": 0.0, "sigma": 1.0})
    assert h.tolist() == [pytest.approx(-0.9189385, abs=1e-7)]


def test_element_density_is_sum_over_members():
    data = hier_data(J=3, n_j=4)
    model = build_model("H", data)
    params = {"mu": 2.0, "tau": 0.5, "sigma": 1.3, "b": np.array([1.5, 2.0, 2.5])}
    group = data.labels[4:8]
    singles = 0.0
    for label in group:
        singles = singles + log_joint_density(model, [label], params)
    assert log_joint_density(model, group, params) == singles


def test_element_depends_only_on_own_group_effect():
    data = hier_data(J=3, n_j=4)
    model = build_model("H", data)
    base = {"mu": 2.0, "tau": 0.5, "sigma": 1.0, "b": np.array([1.5, 2.0, 2.5])}
    moved = dict(base, b=np.array([1.5, 9.0, -4.0]))
    label = data.labels[0]
    assert log_joint_density(model, [label], base) == log_joint_density(model, [label], moved)


def test_missing_parent_names_the_node():
    model = build_model("S", hier_data(J=2, n_j=2))
    with pytest.raises(MissingParameterError, match="sigma"):
        pointwise_log_density(model, {"mu": 0.0})


@pytest.mark.parametrize("sizes", [(3, 3, 3), (2, 4, 1)])
def test_batched_group_kernel_matches_gathered_means(sizes):
    rng = np.random.default_rng(3)
    data = HierDataset(tuple(rng.normal(size=n) for n in sizes))
    b = rng.normal(size=(5, len(sizes)))
    got = pointwise_log_density(build_model("H", data), {"mu": 0.0, "tau": 1.0, "sigma": 0.7, "b": b})
    want = normal_logpdf(data.values, b[:, data.group_index], 0.7)
    np.testing.assert_allclose(got, want, rtol=1e-14)


def test_nan_density_raises():
    model = build_model("S", hier_data(J=2, n_j=2))
    with pytest.raises(NumericalError):
        pointwise_log_density(model, {"mu": math.nan, "sigma": 1.0})


def test_graph_validates_parent_order():
    with pytest.raises(ModelConfigurationError):
        ModelGraph("bad", (Node("y", DATA, ("mu",), 1, value=np.zeros(1), labels=("y",)),
                           Node("mu", PARAMETER)))


def test_wrong_dataset_family_rejected():
    with pytest.raises(ModelConfigurationError):
        build_model("P", hier_data(J=2, n_j=2))
    with pytest.raises(ModelConfigurationError):
        build_model("H", SvDataset(np.zeros(5)))


def test_degenerate_group_sd_draws_the_mean():
    model = build_model("H", hier_data(J=4, n_j=3))
    draw = simulate_latent(model, {"mu": 2.0, "tau": 1e-300, "sigma": 1.0}, np.random.default_rng(0))
    np.testing.assert_allclose(draw["b"], 2.0, rtol=0, atol=1e-250)


def test_group_effect_draws_center_on_mu():
    model = build_model("H", hier_data(J=2, n_j=2))
    draws = simulate_latent(model, {"mu": 2.0, "tau": 0.5, "sigma": 1.0}, np.random.default_rng(1), size=100_000)
    assert abs(draws["b"][:, 0].mean() - 2.0) <= 3 * 0.5 / math.sqrt(100_000)


def test_independent_log_volatility_has_no_lag_one_correlation():
    data = SvDataset(np.zeros(200))
    model = build_model("P", data)
    reps = 200
    draws = simulate_latent(model, {"mu": -1.0, "sigma": 0.3, "phi": 0.0}, np.random.default_rng(2), size=reps)
    h = draws["h"] - draws["h"].mean(axis=1, keepdims=True)
    lag1 = (h[:, 1:] * h[:, :-1]).sum(axis=1) / (h * h).sum(axis=1)
    # demeaned lag-1 estimates carry a -1/T bias, hence the factor 2
    assert abs(lag1.mean()) <= 2 * 3 / math.sqrt(200) / math.sqrt(reps)


def test_latent_draws_reproduce_with_same_seed_and_leave_data_alone():
    data = hier_data(J=3, n_j=2)
    model = build_model("H", data)
    before = model["y"].value.copy()
    cond = {"mu": 1.0, "tau": 0.7, "sigma": 1.0}
    a = simulate_latent(model, cond, np.random.default_rng(9), size=5)
    b = simulate_latent(model, cond, np.random.default_rng(9), size=5)
    assert a["b"].tobytes() == b["b"].tobytes()
    assert set(a) == {"b"}
    np.testing.assert_array_equal(model["y"].value, before)


# -- datasets --------------------------------------------------------------

def test_hier_dataset_shape_and_grand_mean():
    J, n = 20, 100
    tol = 3 * math.sqrt(0.5 ** 2 / J + 1.0 / (J * n))
    means = [hier_data(seed).values.mean() for seed in range(20)]
    assert abs(np.mean(means) - 2.0) <= tol
    assert hier_data().n_j == (100,) * 20


def test_hier_dataset_with_tiny_tau_has_equal_group_means():
    data = generate_hier({"mu": 2.0, "tau": 1e-12, "sigma": 1e-12}, 5, 10, np.random.default_rng(0))
    group_means = np.array([g.mean() for g in data.y])
    np.testing.assert_allclose(group_means, 2.0, rtol=0, atol=1e-10)


def test_generators_are_deterministic():
    a, b = hier_data(4), hier_data(4)
    assert a.values.tobytes() == b.values.tobytes()
    params = {"phi": 0.95, "sigma": 0.25, "mu": -1.02}
    s1 = generate_sv(params, 200, np.random.default_rng(7))
    s2 = generate_sv(params, 200, np.random.default_rng(7))
    assert s1.y.tobytes() == s2.y.tobytes() and s1.T == 200


def test_sv_with_zero_persistence_has_iid_log_volatility():
    h = simulate_ar1(np.random.default_rng(3), (), 4000, -1.0, 0.5, 0.0)
    assert abs(h.mean() + 1.0) < 4 * 0.5 / math.sqrt(4000)
    assert abs(np.corrcoef(h[1:], h[:-1])[0, 1]) < 4 / math.sqrt(4000)


@pytest.mark.parametrize("kind", ["hier", "sv"])
def test_dataset_file_round_trip(tmp_path, kind):
    if kind == "hier":
        data = hier_data(J=3, n_j=5)
    else:
        data = generate_sv({"phi": 0.9, "sigma": 0.3, "mu": -1.0}, 30, np.random.default_rng(0))
    path = tmp_path / "data.txt"
    save_dataset(data, path)
    back = load_dataset(path)
    assert back.family == data.family
    np.testing.assert_array_equal(back.values, data.values)
    assert back.labels == data.labels
