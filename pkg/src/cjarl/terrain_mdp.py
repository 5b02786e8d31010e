"""Compile an attack graph into a goal-directed MDP with cyber-terrain penalties.

Dynamics: from state ``s`` the agent picks an out-edge ``s -> d``. With
probability ``success_prob[s, d]`` it moves to ``d`` and collects
``transit_reward[s, d] + shaping[d]`` (plus ``terminal_bonus`` when ``d`` is
the goal); otherwise it stays at ``s`` and collects nothing. The goal is
absorbing.
"""
from __future__ import annotations

import json
from collections import deque
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from cjarl.errors import Unreachable, UnknownVertex
from cjarl.graph_io import AttackGraph, Complexity, CvssAnnotation, Edge, Service

SUCCESS_PROBABILITY = {Complexity.LOW: 0.9, Complexity.MEDIUM: 0.6, Complexity.HIGH: 0.3}
TERMINAL_BONUS = 100.0
SHAPING_SCALE = 100.0


@dataclass(frozen=True)
class TerrainConfig:
    firewall_multipliers: Mapping[Service, float] = field(
        default_factory=lambda: {Service.FTP: 0.5, Service.SMTP: 0.5, Service.HTTP: 0.5, Service.SSH: 0.5}
    )
    discount: float = 0.9

    def __post_init__(self):
        mult = {Service(k): float(v) for k, v in self.firewall_multipliers.items()}
        for service, value in mult.items():
            if not 0.0 < value <= 1.0:
                raise ValueError(f"firewall multiplier for {service.value} must lie in (0, 1], got {value}")
        if not 0.0 < self.discount < 1.0:
            raise ValueError(f"discount must lie in (0, 1), got {self.discount}")
        object.__setattr__(self, "firewall_multipliers", mult)

    def multiplier(self, service: Service) -> float:
        return self.firewall_multipliers.get(Service(service), 1.0)

    @classmethod
    def from_dict(cls, data: Mapping) -> TerrainConfig:
        unknown = set(data) - {"firewall_multipliers", "discount"}
        if unknown:
            raise ValueError(f"unknown terrain config keys: {sorted(unknown)}")
        base = cls()
        mult = dict(base.firewall_multipliers)
        mult.update({Service(k): v for k, v in data.get("firewall_multipliers", {}).items()})
        return cls(mult, float(data.get("discount", base.discount)))

    @classmethod
    def load(cls, path: str | Path) -> TerrainConfig:
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def to_dict(self) -> dict:
        return {
            "firewall_multipliers": {s.value: m for s, m in sorted(self.firewall_multipliers.items(), key=lambda kv: kv[0].value)},
            "discount": self.discount,
        }


def complexity_to_probability(complexity: Complexity) -> float:
    return SUCCESS_PROBABILITY[Complexity(complexity)]


def transition_reward(target_annotation: CvssAnnotation) -> float:
    return target_annotation.base_score + target_annotation.exploitability_score / 10.0


def apply_firewall_penalty(prob: float, edge: Edge, config: TerrainConfig) -> float:
    if not edge.firewall:
        return prob
    return prob * config.multiplier(edge.service)


def dfs_reference_path(graph: AttackGraph, initial: int, goal: int) -> list[int]:
    """First path to ``goal`` found by DFS expanding successors in ascending id order."""
    for v in (initial, goal):
        if v not in graph.vertices:
            raise UnknownVertex(v)
    if initial == goal:
        return [initial]
    succ = graph.successors
    visited = {initial}
    stack = [(initial, iter(succ[initial]))]
    while stack:
        node, children = stack[-1]
        for child in children:
            if child in visited:
                continue
            visited.add(child)
            if child == goal:
                return [n for n, _ in stack] + [goal]
            stack.append((child, iter(succ[child])))
            break
        else:
            stack.pop()
    raise Unreachable(initial, goal)


def shaping_value(node: int, dfs_path: Sequence[int]) -> float:
    """Linear 0..100 shaping reward by position on the reference path; 0 off it."""
    try:
        k = list(dfs_path).index(node)
    except ValueError:
        return 0.0
    if len(dfs_path) == 1:
        return SHAPING_SCALE
    return SHAPING_SCALE * k / (len(dfs_path) - 1)


def _reachable(adj: Mapping[int, Sequence[int]], start: int) -> set[int]:
    seen = {start}
    queue = deque([start])
    while queue:
        for nxt in adj[queue.popleft()]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


@dataclass(frozen=True, eq=True)
class Mdp:
    """Finite goal-directed MDP over attack-graph vertices.

    ``actions_from[s]`` lists destination vertex ids in ascending order; an
    action is identified by its (state, destination) pair.
    """

    states: tuple[int, ...]
    actions_from: Mapping[int, tuple[int, ...]]
    success_prob: Mapping[tuple[int, int], float]
    transit_reward: Mapping[tuple[int, int], float]
    goal: int
    shaping: Mapping[int, float]
    dfs_path: tuple[int, ...]
    initial: int
    terminal_bonus: float = TERMINAL_BONUS
    discount: float = 0.9

    def shaping_of(self, state: int) -> float:
        return self.shaping.get(state, 0.0)

    def reward(self, state: int, dst: int) -> float:
        """Reward collected on a successful ``state -> dst`` transition."""
        r = self.transit_reward[(state, dst)] + self.shaping_of(dst)
        if dst == self.goal:
            r += self.terminal_bonus
        return r

    def pairs(self):
        for s in self.states:
            for d in self.actions_from[s]:
                yield (s, d)

    @cached_property
    def index(self) -> dict[int, int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        """CSR view: (indptr, destination index, success prob, success reward)."""
        idx = self.index
        indptr = np.zeros(len(self.states) + 1, dtype=np.int64)
        dst, prob, rew = [], [], []
        for i, s in enumerate(self.states):
            for d in self.actions_from[s]:
                dst.append(idx[d])
                prob.append(self.success_prob[(s, d)])
                rew.append(self.reward(s, d))
            indptr[i + 1] = len(dst)
        return (
            indptr,
            np.asarray(dst, dtype=np.int64),
            np.asarray(prob, dtype=np.float64),
            np.asarray(rew, dtype=np.float64),
        )


def compile_mdp(graph: AttackGraph, initial: int, goal: int, config: TerrainConfig | None = None) -> Mdp:
    """Build the MDP for reaching ``goal`` from ``initial``.

    Only vertices that are reachable from ``initial`` and can still reach
    ``goal`` become states; everything else is a dead end for this goal.
    The goal keeps no actions since it is absorbing.
    """
    config = config or TerrainConfig()
    for v in (initial, goal):
        if v not in graph.vertices:
            raise UnknownVertex(v)
    dfs = dfs_reference_path(graph, initial, goal)

    forward = _reachable(graph.successors, initial)
    backward = _reachable(graph.predecessors, goal)
    live = forward & backward
    states = tuple(sorted(live))

    actions_from: dict[int, tuple[int, ...]] = {}
    success_prob: dict[tuple[int, int], float] = {}
    transit: dict[tuple[int, int], float] = {}
    edges = graph.edge_map
    for s in states:
        if s == goal:
            actions_from[s] = ()
            continue
        dsts = tuple(d for d in graph.successors[s] if d in live)
        actions_from[s] = dsts
        for d in dsts:
            ann = graph.annotation(d)
            p = apply_firewall_penalty(complexity_to_probability(ann.attack_complexity), edges[(s, d)], config)
            success_prob[(s, d)] = p
            transit[(s, d)] = transition_reward(ann)

    shaping = {v: shaping_value(v, dfs) for v in dfs}
    return Mdp(
        states=states,
        actions_from=actions_from,
        success_prob=success_prob,
        transit_reward=transit,
        goal=goal,
        shaping=shaping,
        dfs_path=tuple(dfs),
        initial=initial,
        terminal_bonus=TERMINAL_BONUS,
        discount=config.discount,
    )
