"""Linear Q-function agents: features, action selection, rewards and TD updates."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

N_ACTIONS = 2
QUEUE_MAX = 5


class TrainingFault(ArithmeticError):
    """A TD step produced a non-finite error."""


@dataclass(frozen=True)
class LearningConfig:
    learning_rate: float = 0.01
    discount: float = 0.7
    epsilon: float = 0.5
    epsilon_decay_factor: float = 0.9
    decay_period_episodes: int = 50
    reward_normalizer: float = 10e9  # R*, bit/s
    greedy_prob_is_epsilon: bool = True
    neighbor_cap: int = 10

    def __post_init__(self) -> None:
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must be in (0, 1]")
        if not 0 <= self.discount < 1:
            raise ValueError("discount must be in [0, 1)")
        if not 0 <= self.epsilon <= 1:
            raise ValueError("epsilon must be in [0, 1]")
        if not 0 < self.epsilon_decay_factor <= 1:
            raise ValueError("epsilon_decay_factor must be in (0, 1]")
        if self.decay_period_episodes < 1:
            raise ValueError("decay_period_episodes must be >= 1")
        if not self.reward_normalizer > 0:
            raise ValueError("reward_normalizer must be > 0")
        if self.neighbor_cap < 1:
            raise ValueError("neighbor_cap must be >= 1")


# ---------------------------------------------------------------- features

def features_model1(distance_to_j: float, remaining_queue: int, d0: float, queue_max: int = QUEUE_MAX) -> np.ndarray:
    """[1, distance/d0, queue/queue_max] for D2D model 1 (location aware)."""
    if distance_to_j <= 0:
        raise ValueError("distance must be > 0")
    if not 0 <= remaining_queue <= queue_max:
        raise ValueError(f"remaining_queue must be in [0, {queue_max}]")
    return np.array([1.0, distance_to_j / d0, remaining_queue / queue_max])


def features_model2(neighbor_count: int, remaining_queue: int, cap: int = 10, queue_max: int = QUEUE_MAX) -> np.ndarray:
    """[1, min(neighbours, cap)/cap, queue/queue_max] for D2D model 2."""
    if neighbor_count < 0:
        raise ValueError("neighbor_count must be >= 0")
    if not 0 <= remaining_queue <= queue_max:
        raise ValueError(f"remaining_queue must be in [0, {queue_max}]")
    return np.array([1.0, min(neighbor_count, cap) / cap, remaining_queue / queue_max])


# ---------------------------------------------------------------- policy

@dataclass
class PolicyWeights:
    """Weight matrix of shape (n_features, n_actions); column ``a`` scores action ``a``."""

    theta: np.ndarray

    def __post_init__(self) -> None:
        self.theta = np.array(self.theta, dtype=float)
        if self.theta.ndim != 2 or self.theta.shape[1] != N_ACTIONS:
            raise ValueError(f"theta must have shape (m+1, {N_ACTIONS}), got {self.theta.shape}")
        if not np.all(np.isfinite(self.theta)):
            raise ValueError("theta has non-finite entries")

    @classmethod
    def zeros(cls, n_features: int = 3) -> "PolicyWeights":
        return cls(np.zeros((n_features, N_ACTIONS)))

    def copy(self) -> "PolicyWeights":
        return PolicyWeights(self.theta.copy())

    def to_json(self) -> str:
        rows, cols = self.theta.shape
        return json.dumps({"shape": [rows, cols], "values": [float(v) for v in self.theta.ravel()]})

    @classmethod
    def from_json(cls, text: str) -> "PolicyWeights":
        obj = json.loads(text)
        rows, cols = obj["shape"]
        values = obj["values"]
        if len(values) != rows * cols:
            raise ValueError(f"expected {rows * cols} values, got {len(values)}")
        return cls(np.asarray(values, dtype=float).reshape(rows, cols))


def q_value(weights: PolicyWeights, features: np.ndarray, action: int) -> float:
    if features.shape != (weights.theta.shape[0],):
        raise ValueError(f"feature length {features.shape} does not match theta {weights.theta.shape}")
    return float(features @ weights.theta[:, action])


def greedy_action(weights: PolicyWeights, features: np.ndarray) -> int:
    q0 = q_value(weights, features, 0)
    q1 = q_value(weights, features, 1)
    return 1 if q1 > q0 else 0


def select_action(
    weights: PolicyWeights,
    features: np.ndarray,
    epsilon: float,
    rng: np.random.Generator,
    greedy_prob_is_epsilon: bool = True,
) -> int:
    """Mix greedy and uniform-random choices.

    With ``greedy_prob_is_epsilon`` the greedy branch has probability
    ``epsilon`` (as in the learning procedure this simulator follows);
    otherwise the conventional reading applies and ``epsilon`` is the
    exploration probability. One uniform draw decides the branch, a second
    picks the random action.
    """
    if not 0 <= epsilon <= 1:
        raise ValueError("epsilon must be in [0, 1]")
    p_greedy = epsilon if greedy_prob_is_epsilon else 1.0 - epsilon
    if rng.random() < p_greedy:
        return greedy_action(weights, features)
    return int(rng.integers(N_ACTIONS))


def reward(action: int, already_covered: bool, link_rate: float, system_rate: float, r_star: float) -> float:
    """Private + public reward of one relay decision, normalised by ``r_star``."""
    if r_star <= 0:
        raise ValueError("r_star must be > 0")
    if link_rate < 0 or system_rate < 0:
        raise ValueError("rates must be >= 0")
    if action == 1 and not already_covered:
        return (link_rate + system_rate) / r_star
    if action == 1:
        return (-link_rate - system_rate) / r_star
    if not already_covered:
        return system_rate / r_star
    return -system_rate / r_star


def td_update(
    weights: PolicyWeights,
    features: np.ndarray,
    action: int,
    reward_value: float,
    next_features: np.ndarray,
    config: LearningConfig,
) -> PolicyWeights:
    """Semi-gradient Q-learning step on the taken action's column only."""
    theta = weights.theta.copy()
    td_step(theta, features, action, reward_value, next_features, config.learning_rate, config.discount)
    return PolicyWeights(theta)


def td_step(
    theta: np.ndarray,
    features: np.ndarray,
    action: int,
    reward_value: float,
    next_features: np.ndarray,
    alpha: float,
    beta: float,
) -> float:
    """In-place form of :func:`td_update` on a raw weight matrix; returns the TD error."""
    q_next = float(np.max(next_features @ theta))
    td_error = reward_value + beta * q_next - float(features @ theta[:, action])
    if not math.isfinite(td_error):
        raise TrainingFault(f"non-finite TD error {td_error}")
    theta[:, action] += alpha * td_error * features
    return td_error


def merge_policies(agent_policies: Sequence[tuple[int, PolicyWeights, float]]) -> PolicyWeights:
    """Weights of the agent with the largest cumulative reward; ties go to the lowest id.

    ``agent_policies`` holds ``(agent_id, weights, cumulative_reward)`` triples.
    """
    if not agent_policies:
        raise ValueError("merge_policies needs at least one agent")
    best = min(agent_policies, key=lambda t: (-t[2], t[0]))
    return best[1]


def decay_epsilon(epsilon0: float, episode_index: int, config: LearningConfig) -> float:
    """Step schedule: multiply by the decay factor once per completed period."""
    if episode_index < 0:
        raise ValueError("episode_index must be >= 0")
    return epsilon0 * config.epsilon_decay_factor ** (episode_index // config.decay_period_episodes)
