"""Episodic tabular Q-learning on compiled MDPs, plus exact dynamic-programming oracles."""
from __future__ import annotations

import csv
import io
import json
from collections.abc import Mapping
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from cjarl.errors import LoopDetected, NoAdmissibleAction, Unreachable, UnknownVertex
from cjarl.path import AttackPath
from cjarl.terrain_mdp import Mdp


@dataclass(frozen=True)
class LearnerConfig:
    """Q-learning hyperparameters.

    ``None`` for ``epsilon_decay_episodes`` means 80% of ``max_episodes``;
    for ``max_steps_per_episode`` it means four times the number of states.
    Convergence is only tested once exploration has decayed to
    ``epsilon_end``.

    The step size for a (state, action) pair on its n-th visit is
    ``learning_rate / (1 + learning_rate * (n - 1)) ** learning_rate_decay``;
    a decay of 0 keeps it constant.
    """

    learning_rate: float = 0.1
    learning_rate_decay: float = 0.65
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    epsilon_decay_episodes: int | None = None
    max_episodes: int = 5000
    max_steps_per_episode: int | None = None
    convergence_window: int = 50
    convergence_tolerance: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.learning_rate <= 1.0:
            raise ValueError("learning_rate must lie in (0, 1]")
        if not 0.0 <= self.learning_rate_decay <= 1.0:
            raise ValueError("learning_rate_decay must lie in [0, 1]")
        if not (0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0):
            raise ValueError("need 0 <= epsilon_end <= epsilon_start <= 1")
        for name in ("epsilon_decay_episodes", "max_steps_per_episode"):
            value = getattr(self, name)
            if value is not None and value < 1:
                raise ValueError(f"{name} must be positive")
        if self.max_episodes < 1 or self.convergence_window < 1:
            raise ValueError("max_episodes and convergence_window must be positive")
        if self.convergence_tolerance < 0:
            raise ValueError("convergence_tolerance must be non-negative")

    @property
    def decay_episodes(self) -> int:
        if self.epsilon_decay_episodes is not None:
            return self.epsilon_decay_episodes
        return max(1, int(0.8 * self.max_episodes))

    def steps_for(self, mdp: Mdp) -> int:
        if self.max_steps_per_episode is not None:
            return self.max_steps_per_episode
        return 4 * len(mdp.states)

    @classmethod
    def from_dict(cls, data: Mapping) -> LearnerConfig:
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown learner config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> LearnerConfig:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class QTable:
    """Action values over the admissible (state, destination) pairs of one MDP."""

    q: dict[tuple[int, int], float]
    visit_counts: dict[tuple[int, int], int] = field(default_factory=dict)

    def best_action(self, mdp: Mdp, state: int) -> int:
        """Greedy destination from ``state``; ties go to the lowest vertex id."""
        actions = mdp.actions_from[state]
        if not actions:
            raise NoAdmissibleAction(state)
        best, best_q = actions[0], self.q[(state, actions[0])]
        for d in actions[1:]:
            v = self.q[(state, d)]
            if v > best_q:
                best, best_q = d, v
        return best

    def greedy_policy(self, mdp: Mdp) -> dict[int, int]:
        return {s: self.best_action(mdp, s) for s in mdp.states if mdp.actions_from[s]}


@dataclass
class TrainResult:
    qtable: QTable
    episode_returns: list[float]
    converged_at: int | None

    def returns_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["episode", "return"])
        for i, g in enumerate(self.episode_returns, start=1):
            writer.writerow([i, repr(float(g))])
        return buf.getvalue()


def derive_seed(seed: int, initial: int, goal: int) -> int:
    """Per-pair 32-bit seed, so concurrent runs share no generator state."""
    return int(np.random.SeedSequence([seed % 2**64, initial, goal]).generate_state(1)[0])


@njit(cache=True)
def _q_learning(indptr, dst, prob, rew, start, goal, gamma, alpha, eps_start, eps_end,
                decay, max_episodes, max_steps, window, tol, check_from, seed, lr_power):
    np.random.seed(seed)
    q = np.zeros(dst.shape[0])
    visits = np.zeros(dst.shape[0], dtype=np.int64)
    returns = np.zeros(max_episodes)
    converged = -1
    n = 0
    for ep in range(max_episodes):
        frac = ep / decay
        if frac > 1.0:
            frac = 1.0
        eps = eps_start + (eps_end - eps_start) * frac
        s = start
        g = 0.0
        disc = 1.0
        for _ in range(max_steps):
            lo = indptr[s]
            hi = indptr[s + 1]
            if lo == hi:
                return q, visits, returns[:n], converged, s
            if np.random.random() < eps:
                a = lo + np.random.randint(0, hi - lo)
            else:
                a = lo
                for b in range(lo + 1, hi):
                    if q[b] > q[a]:
                        a = b
            visits[a] += 1
            if np.random.random() < prob[a]:
                nxt = dst[a]
                r = rew[a]
            else:
                nxt = s
                r = 0.0
            if nxt == goal:
                target = r
            else:
                nlo = indptr[nxt]
                nhi = indptr[nxt + 1]
                if nlo == nhi:
                    return q, visits, returns[:n], converged, nxt
                m = q[nlo]
                for b in range(nlo + 1, nhi):
                    if q[b] > m:
                        m = q[b]
                target = r + gamma * m
            q[a] += alpha / (1.0 + alpha * (visits[a] - 1)) ** lr_power * (target - q[a])
            g += disc * r
            disc *= gamma
            s = nxt
            if s == goal:
                break
        returns[ep] = g
        n = ep + 1
        if n >= check_from and n >= 2 * window:
            prev = returns[n - 2 * window:n - window].mean()
            cur = returns[n - window:n].mean()
            if abs(cur - prev) <= tol * abs(prev):
                converged = n
                break
    return q, visits, returns[:n], converged, -1


def train(mdp: Mdp, initial: int, config: LearnerConfig | None = None) -> TrainResult:
    """Epsilon-greedy Q-learning from ``initial`` until episode returns settle.

    Training stops after episode ``e`` (1-based) once exploration has fully
    decayed, ``e >= 2 * window``, and the mean return of the last ``window``
    episodes differs from that of the ``window`` before it by at most
    ``convergence_tolerance`` times the earlier mean. Otherwise it runs to
    ``max_episodes``.
    """
    config = config or LearnerConfig()
    if initial not in mdp.index:
        raise Unreachable(initial, mdp.goal)
    pairs = list(mdp.pairs())
    if initial == mdp.goal:
        qtable = QTable({p: 0.0 for p in pairs}, {p: 0 for p in pairs})
        return TrainResult(qtable, [mdp.shaping_of(mdp.goal) + mdp.terminal_bonus], 1)

    indptr, dst, prob, rew = mdp.arrays
    idx = mdp.index
    q, visits, returns, converged, bad = _q_learning(
        indptr, dst, prob, rew,
        idx[initial], idx[mdp.goal], mdp.discount, config.learning_rate,
        config.epsilon_start, config.epsilon_end, float(config.decay_episodes),
        config.max_episodes, config.steps_for(mdp), config.convergence_window,
        config.convergence_tolerance, config.decay_episodes,
        derive_seed(config.seed, initial, mdp.goal), config.learning_rate_decay,
    )
    if bad >= 0:
        raise NoAdmissibleAction(mdp.states[bad])
    qtable = QTable(
        {p: float(v) for p, v in zip(pairs, q)},
        {p: int(c) for p, c in zip(pairs, visits)},
    )
    return TrainResult(qtable, [float(g) for g in returns], int(converged) if converged > 0 else None)


def extract_path(qtable: QTable, mdp: Mdp, initial: int) -> AttackPath:
    """Greedy plan from ``initial`` assuming every transition succeeds."""
    if initial not in mdp.index:
        raise UnknownVertex(initial)
    path = [initial]
    seen = {initial}
    reward = mdp.shaping_of(initial)
    state = initial
    while state != mdp.goal:
        nxt = qtable.best_action(mdp, state)
        if nxt in seen or len(path) > len(mdp.states):
            raise LoopDetected(path + [nxt])
        reward += mdp.transit_reward[(state, nxt)] + mdp.shaping_of(nxt)
        path.append(nxt)
        seen.add(nxt)
        state = nxt
    reward += mdp.terminal_bonus
    return AttackPath(initial, mdp.goal, tuple(path), reward)


# -- exact oracles ---------------------------------------------------------


def _backup(mdp: Mdp, s: int, d: int, values: Mapping[int, float]) -> float:
    p = mdp.success_prob[(s, d)]
    gamma = mdp.discount
    return p * (mdp.reward(s, d) + gamma * values[d]) + (1.0 - p) * gamma * values[s]


def value_iteration(mdp: Mdp, tolerance: float = 1e-8) -> dict[int, float]:
    """Optimal state values by synchronous Bellman backups.

    The goal is absorbing with value 0; its bonus is part of the reward of
    the transition that enters it.
    """
    if tolerance <= 0:
        raise ValueError("tolerance must be positive")
    values = {s: 0.0 for s in mdp.states}
    while True:
        new = {}
        delta = 0.0
        for s in mdp.states:
            acts = mdp.actions_from[s]
            if s == mdp.goal or not acts:
                new[s] = 0.0
                continue
            new[s] = max(_backup(mdp, s, d, values) for d in acts)
            delta = max(delta, abs(new[s] - values[s]))
        values = new
        if delta < tolerance:
            return values


def optimal_policy(mdp: Mdp, values: Mapping[int, float]) -> dict[int, int]:
    """Greedy policy with respect to ``values``; ties to the lowest destination id."""
    policy = {}
    for s in mdp.states:
        acts = mdp.actions_from[s]
        if s == mdp.goal or not acts:
            continue
        best, best_v = acts[0], _backup(mdp, s, acts[0], values)
        for d in acts[1:]:
            v = _backup(mdp, s, d, values)
            if v > best_v:
                best, best_v = d, v
        policy[s] = best
    return policy


def policy_value(mdp: Mdp, policy: Mapping[int, int]) -> dict[int, float]:
    """Expected discounted return of a deterministic policy, by a direct linear solve."""
    n = len(mdp.states)
    idx = mdp.index
    gamma = mdp.discount
    a = np.eye(n)
    b = np.zeros(n)
    for s, d in policy.items():
        if s == mdp.goal:
            continue
        i = idx[s]
        p = mdp.success_prob[(s, d)]
        a[i, i] -= gamma * (1.0 - p)
        if d != mdp.goal:
            a[i, idx[d]] -= gamma * p
        b[i] = p * mdp.reward(s, d)
    v = np.linalg.solve(a, b)
    return {s: float(v[idx[s]]) for s in mdp.states}
