import itertools
import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from udld import agents as ag

CFG = ag.LearningConfig()


def test_features_model1():
    assert ag.features_model1(3.0, 5, d0=3.0).tolist() == [1.0, 1.0, 1.0]
    assert ag.features_model1(1.5, 0, d0=3.0).tolist() == [1.0, 0.5, 0.0]
    assert ag.features_model1(0.6, 2, d0=3.0) == pytest.approx([1.0, 0.2, 0.4], abs=1e-15)


def test_features_model2():
    assert ag.features_model2(0, 5).tolist() == [1.0, 0.0, 1.0]
    assert ag.features_model2(10, 0, cap=10).tolist() == [1.0, 1.0, 0.0]
    assert ag.features_model2(4, 3, cap=10) == pytest.approx([1.0, 0.4, 0.6], abs=1e-15)
    assert ag.features_model2(25, 3, cap=10)[1] == 1.0


@pytest.mark.parametrize("call", [
    lambda: ag.features_model1(0.0, 1, 3.0),
    lambda: ag.features_model1(1.0, 6, 3.0),
    lambda: ag.features_model2(-1, 1),
    lambda: ag.features_model2(1, -1),
])
def test_feature_domain_errors(call):
    with pytest.raises(ValueError):
        call()


def test_q_value_examples():
    zero = ag.PolicyWeights.zeros(3)
    phi = np.array([1.0, 0.5, 1.0])
    assert ag.q_value(zero, phi, 0) == 0.0 and ag.q_value(zero, phi, 1) == 0.0
    w = ag.PolicyWeights(np.array([[1.0, 0.0], [2.0, 0.0], [-1.0, 0.0]]))
    assert ag.q_value(w, phi, 0) == 1.0
    w = ag.PolicyWeights(np.array([[0.3, -4.0], [7.0, 1.0], [9.0, 2.0]]))
    assert ag.q_value(w, np.array([1.0, 0.0, 0.0]), 0) == 0.3
    assert ag.q_value(w, np.array([1.0, 0.0, 0.0]), 1) == -4.0


def test_q_value_shape_mismatch():
    with pytest.raises(ValueError):
        ag.q_value(ag.PolicyWeights.zeros(3), np.ones(4), 0)


def test_q_value_matches_tabulated_q():
    rng = np.random.default_rng(5)
    w = ag.PolicyWeights(rng.normal(size=(3, 2)))
    grid = list(itertools.product([1.0], np.linspace(0, 1, 5), np.linspace(0, 1, 6)))
    table = {(s, a): sum(f * w.theta[k, a] for k, f in enumerate(s)) for s in grid for a in (0, 1)}
    for (s, a), q in table.items():
        assert ag.q_value(w, np.array(s), a) == pytest.approx(q, abs=1e-12)


def test_select_action_eps_one_is_greedy():
    rng = np.random.default_rng(0)
    w = ag.PolicyWeights(np.array([[0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]))
    phi = np.array([1.0, 0.3, 0.3])
    assert all(ag.select_action(w, phi, 1.0, rng) == 1 for _ in range(200))


def test_select_action_tie_breaks_to_zero():
    rng = np.random.default_rng(0)
    phi = np.array([1.0, 0.3, 0.3])
    assert all(ag.select_action(ag.PolicyWeights.zeros(3), phi, 1.0, rng) == 0 for _ in range(200))


def test_select_action_eps_zero_is_uniform():
    rng = np.random.default_rng(2024)
    w = ag.PolicyWeights(np.array([[0.0, 5.0], [0.0, 0.0], [0.0, 0.0]]))
    phi = np.array([1.0, 0.0, 0.0])
    n = 10_000
    ones = sum(ag.select_action(w, phi, 0.0, rng) for _ in range(n))
    chi2 = (ones - n / 2) ** 2 / (n / 2) + (n - ones - n / 2) ** 2 / (n / 2)
    assert chi2 < 10.83  # 1 dof, p = 0.001


def test_select_action_conventional_switch():
    rng = np.random.default_rng(0)
    w = ag.PolicyWeights(np.array([[0.0, 1.0], [0.0, 0.0], [0.0, 0.0]]))
    phi = np.array([1.0, 0.0, 0.0])
    assert all(ag.select_action(w, phi, 0.0, rng, greedy_prob_is_epsilon=False) == 1 for _ in range(200))


def test_reward_examples():
    g = 1e9
    assert ag.reward(1, False, 2 * g, 3 * g, 10 * g) == pytest.approx(0.5)
    assert ag.reward(1, True, 2 * g, 3 * g, 10 * g) == pytest.approx(-0.5)
    assert ag.reward(0, False, 2 * g, 3 * g, 10 * g) == pytest.approx(0.3)
    assert ag.reward(0, True, 2 * g, 3 * g, 10 * g) == pytest.approx(-0.3)


@given(st.floats(0, 1e11), st.floats(0, 1e11), st.floats(1e6, 1e11))
def test_reward_antisymmetry(r_ij, r_0, r_star):
    assert ag.reward(1, True, r_ij, r_0, r_star) == -ag.reward(1, False, r_ij, r_0, r_star)
    assert ag.reward(0, True, r_ij, r_0, r_star) == -ag.reward(0, False, r_ij, r_0, r_star)


def test_reward_rejects_bad_normaliser():
    with pytest.raises(ValueError):
        ag.reward(1, False, 1.0, 1.0, 0.0)


def test_td_step_zero_learning_rate():
    # LearningConfig keeps alpha in (0, 1]; the raw step accepts alpha = 0
    theta = np.arange(6, dtype=float).reshape(3, 2)
    before = theta.copy()
    phi = np.array([1.0, 0.2, 0.4])
    ag.td_step(theta, phi, 1, 3.0, phi, alpha=0.0, beta=0.7)
    np.testing.assert_array_equal(theta, before)


def test_td_update_hand_example():
    phi = np.array([1.0, 0.5, 0.5])
    next_phi = np.array([1.0, 0.0, 0.0])
    out = ag.td_update(ag.PolicyWeights.zeros(3), phi, 1, 1.0, next_phi, CFG)
    np.testing.assert_allclose(out.theta[:, 1], [0.01, 0.005, 0.005], rtol=1e-15)
    np.testing.assert_array_equal(out.theta[:, 0], [0.0, 0.0, 0.0])


def test_td_update_locality():
    rng = np.random.default_rng(8)
    w = ag.PolicyWeights(rng.normal(size=(3, 2)))
    untouched = w.theta[:, 0].copy()
    for _ in range(1000):
        phi = np.r_[1.0, rng.random(2)]
        w = ag.td_update(w, phi, 1, rng.normal(), np.r_[1.0, rng.random(2)], CFG)
    np.testing.assert_array_equal(w.theta[:, 0], untouched)


def test_td_fixed_point():
    theta = np.array([[0.7, 0.1], [0.0, 0.0], [0.0, 0.0]])
    phi = np.array([1.0, 0.0, 0.0])
    # Q(current, a=0) = 0.7 = r + 0.7 * max Q(next) = 0.21 + 0.7 * 0.7
    out = ag.td_update(ag.PolicyWeights(theta), phi, 0, 0.21, phi, CFG)
    np.testing.assert_allclose(out.theta, theta, atol=1e-15)


def test_td_non_finite_is_a_fault():
    with pytest.raises(ag.TrainingFault):
        ag.td_update(ag.PolicyWeights.zeros(3), np.ones(3), 0, float("inf"), np.ones(3), CFG)


def test_bandit_convergence():
    rng = np.random.default_rng(3)
    states = [np.array([1.0, 0.0, 1.0]), np.array([1.0, 1.0, 0.0])]
    correct = [1, 0]
    w = ag.PolicyWeights.zeros(3)
    for _ in range(10_000):
        s = int(rng.integers(2))
        a = int(rng.integers(2))
        r = 1.0 if a == correct[s] else -1.0
        w = ag.td_update(w, states[s], a, r, states[int(rng.integers(2))], CFG)
    for s, phi in enumerate(states):
        assert ag.greedy_action(w, phi) == correct[s]


def test_merge_policies():
    ws = [ag.PolicyWeights(np.full((3, 2), float(k))) for k in range(3)]
    assert ag.merge_policies([(4, ws[0], -1.0)]) is ws[0]
    assert ag.merge_policies([(0, ws[0], 2.0), (1, ws[1], 5.0), (2, ws[2], 1.0)]) is ws[1]
    assert ag.merge_policies([(7, ws[0], 1.0), (3, ws[1], 1.0), (5, ws[2], 1.0)]) is ws[1]
    with pytest.raises(ValueError):
        ag.merge_policies([])


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=12))
def test_merge_returns_an_input(rewards):
    ws = [ag.PolicyWeights(np.full((3, 2), float(i))) for i in range(len(rewards))]
    out = ag.merge_policies(list(zip(range(len(rewards)), ws, rewards)))
    assert any(out is w for w in ws)


def test_decay_epsilon():
    assert ag.decay_epsilon(0.5, 0, CFG) == 0.5
    assert ag.decay_epsilon(0.5, 49, CFG) == 0.5
    assert ag.decay_epsilon(0.5, 100, CFG) == pytest.approx(0.405, abs=1e-15)
    with pytest.raises(ValueError):
        ag.decay_epsilon(0.5, -1, CFG)


def test_policy_json_round_trip():
    w = ag.PolicyWeights(np.array([[0.1, -2.0], [3.5, 4.0], [1e-9, 0.0]]))
    text = w.to_json()
    assert json.loads(text)["shape"] == [3, 2]
    np.testing.assert_array_equal(ag.PolicyWeights.from_json(text).theta, w.theta)
    with pytest.raises(ValueError):
        ag.PolicyWeights.from_json('{"shape": [3, 2], "values": [1, 2]}')


def test_learning_config_validation():
    for kw in ({"learning_rate": 0}, {"discount": 1.0}, {"epsilon": 1.5}, {"reward_normalizer": 0}):
        with pytest.raises(ValueError):
            ag.LearningConfig(**kw)
