"""Episode orchestration for the learning models and the two baselines."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import agents as ag
from . import linkbudget as lb
from .config import SimConfig
from .environment import Scene, TopologySnapshot, default_gamma0, neighbors_within
from .metrics import EpisodeMetrics


def partition_bandwidth(total_bandwidth: float, layer1_count: int) -> float:
    """Equal share of the band per Layer-1 device."""
    if layer1_count < 1:
        raise ValueError("no Layer-1 devices to share bandwidth")
    return total_bandwidth / layer1_count


@dataclass(frozen=True)
class Decision:
    """One audited relay decision; enough to recompute its reward."""

    agent: int
    target: int
    action: int
    covered_before: bool
    link_rate: float
    system_rate: float
    reward: float


@dataclass
class EpisodeState:
    snapshot: TopologySnapshot
    links: list[tuple[int, int]] = field(default_factory=list)
    coverage_flags: dict[int, bool] = field(default_factory=dict)
    agent_rewards: dict[int, float] = field(default_factory=dict)
    agent_bandwidth: float = 0.0
    link_rates: dict[tuple[int, int], float] = field(default_factory=dict)
    decisions: list[Decision] = field(default_factory=list)

    @property
    def coverage(self) -> float:
        snap = self.snapshot
        covered = sum(1 for v in self.coverage_flags.values() if v)
        return (len(snap.layer1_ids) + covered) / snap.n

    @property
    def total_reward(self) -> float:
        return float(sum(self.agent_rewards.values()))


@dataclass(frozen=True)
class RadioContext:
    """Derived link-budget constants shared by every episode of a run."""

    params: lb.LinkBudgetParams
    total_bandwidth: float
    d0: float
    gamma0: float
    queue_capacity: int = 5
    ap_leg_bottleneck: bool = False

    @classmethod
    def from_config(cls, config: SimConfig) -> "RadioContext":
        radio = config.radio
        params = radio.link_params()
        d0 = lb.max_range(params, radio.reference_bandwidth, radio.target_spectral_efficiency)
        if d0 is None:
            raise ValueError("relay range target unreachable with these radio parameters")
        gamma0 = radio.gamma0
        if gamma0 is None:
            gamma0 = default_gamma0(params, radio.reference_bandwidth, radio.target_spectral_efficiency)
        return cls(params, radio.total_bandwidth, d0, gamma0, config.scene.queue_capacity, radio.ap_leg_bottleneck)


def candidate_sets(snapshot: TopologySnapshot, d0: float) -> dict[int, list[int]]:
    """Layer-2 devices within ``d0`` of each agent with an unblocked relay path."""
    layer2 = sorted(snapshot.layer2_ids)
    out = {}
    for i in sorted(snapshot.layer1_ids):
        dist = snapshot.pairwise_distances[i]
        out[i] = [j for j in layer2 if dist[j] <= d0 and snapshot.los_matrix[i, j]]
    return out


def relay_rates(
    snapshot: TopologySnapshot, cands: dict[int, list[int]], ctx: RadioContext, bandwidth: float
) -> dict[tuple[int, int], float]:
    pairs = [(i, j) for i, js in cands.items() for j in js]
    if not pairs:
        return {}
    d = np.array([snapshot.pairwise_distances[i, j] for i, j in pairs])
    rates = lb.capacity_many(ctx.params, bandwidth, np.maximum(d, 1e-3))
    if ctx.ap_leg_bottleneck:
        ap_d = np.array([snapshot.ap_distances[i] for i, _ in pairs])
        rates = np.minimum(rates, lb.capacity_many(ctx.params, bandwidth, np.maximum(ap_d, 1e-3)))
    return {p: float(r) for p, r in zip(pairs, rates)}


ActionOverride = Callable[[int, int], Optional[int]]


def run_episode(
    snapshot: TopologySnapshot,
    policy: ag.PolicyWeights,
    model: str,
    ctx: RadioContext,
    learning: ag.LearningConfig,
    epsilon: float,
    rng: np.random.Generator,
    action_override: Optional[ActionOverride] = None,
) -> tuple[EpisodeState, ag.PolicyWeights]:
    """One pass of every agent over its candidates; returns the state and merged policy.

    Agents act in a shuffled order. Each starts from ``policy``, updates a local
    copy after every decision, and the best-rewarded local copy becomes the new
    shared policy. ``action_override(agent, target)`` may force an action
    (return ``None`` to let the agent choose).
    """
    if model not in ("model1", "model2"):
        raise ValueError(f"run_episode drives learning models, not {model!r}")
    state = EpisodeState(snapshot)
    agents = sorted(snapshot.layer1_ids)
    state.coverage_flags = {j: False for j in sorted(snapshot.layer2_ids)}
    if not agents:
        return state, policy

    bandwidth = partition_bandwidth(ctx.total_bandwidth, len(agents))
    state.agent_bandwidth = bandwidth
    cands = candidate_sets(snapshot, ctx.d0)
    rates = relay_rates(snapshot, cands, ctx, bandwidth)
    r_star = learning.reward_normalizer
    qmax = ctx.queue_capacity
    rate_sum = 0.0
    n_active = 0
    results = []

    def features(i: int, j: int, free: int) -> np.ndarray:
        if model == "model1":
            return ag.features_model1(max(snapshot.pairwise_distances[i, j], 1e-3), free, ctx.d0, qmax)
        return ag.features_model2(neighbors[i], free, learning.neighbor_cap, qmax)

    neighbors = {i: neighbors_within(i, snapshot, ctx.d0) for i in agents} if model == "model2" else {}

    for i in (int(a) for a in rng.permutation(agents)):
        local = policy.copy()
        free = qmax
        total = 0.0
        targets = cands[i]
        for k, j in enumerate(targets):
            phi = features(i, j, free)
            forced = action_override(i, j) if action_override else None
            if forced is None:
                a = ag.select_action(local, phi, epsilon, rng, learning.greedy_prob_is_epsilon)
            else:
                a = forced
            if a == 1 and free == 0:
                a = 0  # relay queue exhausted; no link can form
            covered = state.coverage_flags[j]
            r_ij = rates[(i, j)]
            if a == 1:
                state.links.append((i, j))
                state.link_rates[(i, j)] = r_ij
                rate_sum += r_ij
                n_active += 1
                free -= 1
            r_0 = rate_sum / n_active if n_active else 0.0
            r = ag.reward(a, covered, r_ij, r_0, r_star)
            state.decisions.append(Decision(i, j, a, covered, r_ij, r_0, r))
            if a == 1:
                state.coverage_flags[j] = True
            nxt = targets[k + 1] if k + 1 < len(targets) else j
            ag.td_step(local.theta, phi, a, r, features(i, nxt, free), learning.learning_rate, learning.discount)
            total += r
        state.agent_rewards[i] = total
        results.append((i, local, total))

    return state, ag.merge_policies(results)


# ---------------------------------------------------------------- baselines

def central_assignment(
    snapshot: TopologySnapshot,
    cands: dict[int, list[int]],
    rates: dict[tuple[int, int], float],
    queue_capacity: int,
) -> list[tuple[int, int]]:
    """Max-coverage b-matching, ties broken by total rate.

    Each agent is expanded into ``queue_capacity`` slots and a rectangular
    assignment maximises ``n_covered * big + sum(normalised rate)``; ``big``
    exceeds any attainable rate sum so coverage always dominates.
    """
    pairs = [(i, j) for i, js in cands.items() for j in js]
    if not pairs:
        return []
    targets = sorted({j for _, j in pairs})
    agents = sorted({i for i, _ in pairs})
    row = {j: r for r, j in enumerate(targets)}
    rmax = max(rates[p] for p in pairs) or 1.0
    big = float(len(targets) + 1)
    weight = np.zeros((len(targets), len(agents) * queue_capacity))
    for c, i in enumerate(agents):
        for j in cands[i]:
            w = big + rates[(i, j)] / rmax
            weight[row[j], c * queue_capacity:(c + 1) * queue_capacity] = w
    rows, cols = linear_sum_assignment(weight, maximize=True)
    links = [
        (agents[c // queue_capacity], targets[r])
        for r, c in zip(rows, cols)
        if weight[r, c] > 0
    ]
    return sorted(links)


def baseline_central(snapshot: TopologySnapshot, ctx: RadioContext) -> EpisodeState:
    state = EpisodeState(snapshot)
    state.coverage_flags = {j: False for j in sorted(snapshot.layer2_ids)}
    if not snapshot.layer1_ids:
        return state
    bandwidth = partition_bandwidth(ctx.total_bandwidth, len(snapshot.layer1_ids))
    state.agent_bandwidth = bandwidth
    cands = candidate_sets(snapshot, ctx.d0)
    rates = relay_rates(snapshot, cands, ctx, bandwidth)
    for i, j in central_assignment(snapshot, cands, rates, ctx.queue_capacity):
        state.links.append((i, j))
        state.link_rates[(i, j)] = rates[(i, j)]
        state.coverage_flags[j] = True
    return state


def baseline_no_d2d(snapshot: TopologySnapshot) -> EpisodeState:
    state = EpisodeState(snapshot)
    state.coverage_flags = {j: False for j in sorted(snapshot.layer2_ids)}
    return state


# ---------------------------------------------------------------- runs

class Simulation:
    """Seeded run of one model; iterate to get per-episode metrics.

    Scene placement and mobility draw from one child stream and agent
    behaviour from another, so all models see the same topology trajectory
    for a given seed.
    """

    def __init__(self, config: SimConfig):
        self.config = config
        self.ctx = RadioContext.from_config(config)
        scene_ss, learn_ss = np.random.SeedSequence(config.seed).spawn(2)
        sc = config.scene
        self.scene = Scene(
            sc.room(),
            sc.n_devices,
            sc.device_speed,
            np.random.default_rng(scene_ss),
            body_radius=sc.body_radius,
            queue_capacity=sc.queue_capacity,
        )
        self.rng = np.random.default_rng(learn_ss)
        self.policy = ag.PolicyWeights.zeros(3)
        self.last_state: Optional[EpisodeState] = None

    def step_episode(self, episode: int) -> EpisodeMetrics:
        cfg = self.config
        snap = self.scene.snapshot(self.ctx.params, self.ctx.gamma0)
        eps = 0.0
        if cfg.model in ("model1", "model2"):
            eps = ag.decay_epsilon(cfg.learning.epsilon, episode, cfg.learning)
            state, self.policy = run_episode(
                snap, self.policy, cfg.model, self.ctx, cfg.learning, eps, self.rng
            )
        elif cfg.model == "central":
            state = baseline_central(snap, self.ctx)
        else:
            state = baseline_no_d2d(snap)
        self.last_state = state
        self.scene.step(cfg.scene.dt)
        n1 = len(snap.layer1_ids)
        total = state.total_reward
        return EpisodeMetrics(
            episode=episode,
            coverage=state.coverage,
            total_reward=total,
            mean_reward_per_agent=total / n1 if n1 else 0.0,
            layer1_count=n1,
            layer2_count=len(snap.layer2_ids),
            link_count=len(state.links),
            epsilon=eps,
        )

    def __iter__(self) -> Iterator[EpisodeMetrics]:
        for ep in range(self.config.episodes):
            yield self.step_episode(ep)


def run_simulation(config: SimConfig) -> Iterator[EpisodeMetrics]:
    return iter(Simulation(config))
