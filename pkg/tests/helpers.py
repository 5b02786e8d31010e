"""Graph builders and brute-force oracles shared by the test modules."""
from __future__ import annotations

import numpy as np

from cjarl.graph_io import AttackGraph, Complexity, CvssAnnotation, Edge, Service, Vertex, VertexKind
from cjarl.terrain_mdp import Mdp


def make_graph(arcs, n=None, annotations=None, firewalls=None, crown_jewels=(), initial=(), complexity="LOW",
               base=5.0, expl=5.0):
    """Small graph from an arc list. Vertices 1..n all get the same annotation unless overridden."""
    ids = set(range(1, n + 1)) if n else {v for arc in arcs for v in arc}
    annotations = annotations or {}
    firewalls = firewalls or {}
    verts = [
        Vertex(v, f"v{v}", VertexKind.OR, annotations.get(v, CvssAnnotation(base, expl, Complexity(complexity))))
        for v in sorted(ids)
    ]
    edges = [Edge(s, d, Service(firewalls[(s, d)]) if (s, d) in firewalls else Service.NONE, (s, d) in firewalls)
             for s, d in arcs]
    return AttackGraph(verts, tuple(edges), frozenset(crown_jewels), frozenset(initial))


def hand_mdp(chain_rewards, prob=1.0, gamma=0.9, shaping=None):
    """Chain MDP 1 -> 2 -> ... -> n with explicit transit rewards on entering each vertex."""
    n = len(chain_rewards) + 1
    states = tuple(range(1, n + 1))
    actions = {s: (s + 1,) for s in states[:-1]}
    actions[n] = ()
    success = {(s, s + 1): prob for s in states[:-1]}
    transit = {(s, s + 1): chain_rewards[s - 1] for s in states[:-1]}
    shaping = shaping if shaping is not None else {s: 100.0 * (s - 1) / (n - 1) for s in states}
    return Mdp(states, actions, success, transit, n, shaping, states, 1, 100.0, gamma)


def brute_force_dfs(succ, start, goal):
    """Recursive textbook DFS with ascending-id expansion."""
    visited = set()

    def go(node):
        visited.add(node)
        if node == goal:
            return [node]
        for nxt in sorted(succ.get(node, ())):
            if nxt not in visited:
                found = go(nxt)
                if found:
                    return [node] + found
        return None

    return go(start)


def brute_two_hop(graph: AttackGraph, cj: int) -> set[int]:
    """Every vertex whose undirected distance to cj is at most 2, by explicit neighbour sets."""
    nbr = {v: set() for v in graph.vertices}
    for e in graph.edges:
        nbr[e.src].add(e.dst)
        nbr[e.dst].add(e.src)
    out = {cj}
    for v in graph.vertices:
        if v in nbr[cj] or any(cj in nbr[w] for w in nbr[v]):
            out.add(v)
    return out


def simple_paths(mdp: Mdp, start: int):
    """All simple paths from start to the goal inside the MDP."""
    stack = [(start, (start,))]
    while stack:
        node, path = stack.pop()
        if node == mdp.goal:
            yield path
            continue
        for d in mdp.actions_from[node]:
            if d not in path:
                stack.append((d, path + (d,)))


def path_value(mdp: Mdp, path) -> float:
    """Expected discounted return of committing to ``path`` under stay-on-failure dynamics."""
    g = mdp.discount
    v = 0.0
    for a, b in reversed(list(zip(path, path[1:]))):
        p = mdp.success_prob[(a, b)]
        v = p * (mdp.reward(a, b) + g * v) / (1.0 - g * (1.0 - p))
    return v


def plan_reward(mdp: Mdp, path) -> float:
    r = sum(mdp.shaping_of(v) for v in path)
    r += sum(mdp.transit_reward[(a, b)] for a, b in zip(path, path[1:]))
    return r + (mdp.terminal_bonus if path[-1] == mdp.goal else 0.0)


def best_paths(mdp: Mdp, start: int):
    """(best path, its value, runner-up value) by exhaustive enumeration."""
    scored = sorted(((path_value(mdp, p), p) for p in simple_paths(mdp, start)), reverse=True)
    runner = scored[1][0] if len(scored) > 1 else -np.inf
    return scored[0][1], scored[0][0], runner


def random_pair(graph: AttackGraph, rng):
    """Random (initial, goal) with goal reachable from initial and initial != goal."""
    succ = graph.successors
    ids = list(graph.vertices)
    for _ in range(200):
        i = ids[int(rng.integers(len(ids)))]
        seen, stack = {i}, [i]
        while stack:
            for n in succ[stack.pop()]:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        seen.discard(i)
        if seen:
            far = sorted(seen)
            return i, far[int(rng.integers(len(far)))]
    return None


def all_orderings_best(paths, key):
    """Element no other element beats under ``key``, found by pairwise comparison."""
    winners = [p for p in paths if not any(key(q) < key(p) for q in paths)]
    assert winners
    return winners

