"""Crown jewel analysis: 2-hop neighbourhoods, per-pair training, path statistics."""
from __future__ import annotations

import json
import logging
from collections import Counter, deque
from collections.abc import Iterable, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from cjarl.errors import CjaError, EmptyPathSet, NoReachableInitialNodes, Unreachable, UnknownVertex
from cjarl.graph_io import AttackGraph
from cjarl.path import AttackPath
from cjarl.rl_engine import LearnerConfig, extract_path, train
from cjarl.terrain_mdp import TerrainConfig, compile_mdp

log = logging.getLogger(__name__)


@dataclass
class CjaReport:
    crown_jewel: int
    two_hop: frozenset[int]
    paths: list[AttackPath]
    best_initial: int | None
    best_terminal: int | None
    most_visited: int | None
    most_visited_proportion: float
    failures: list[tuple[int, int, str]] = field(default_factory=list)
    reachable_initial: frozenset[int] = frozenset()
    labels: dict[int, str] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "crown_jewel": self.crown_jewel,
            "two_hop": sorted(self.two_hop),
            "reachable_initial": sorted(self.reachable_initial),
            "best_initial": self.best_initial,
            "best_terminal": self.best_terminal,
            "most_visited": self.most_visited,
            "most_visited_proportion": self.most_visited_proportion,
            "labels": {str(k): self.labels[k] for k in sorted(self.labels)},
            "paths": [p.to_dict() for p in self.paths],
            "failures": [{"initial": i, "terminal": j, "error": e} for i, j, e in self.failures],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


@dataclass
class MultiCjSummary:
    reports: list[CjaReport]
    global_best_initial: int | None

    def to_dict(self) -> dict:
        counts = Counter(r.best_initial for r in self.reports if r.best_initial is not None)
        return {
            "global_best_initial": self.global_best_initial,
            "best_initial_counts": {str(k): counts[k] for k in sorted(counts)},
            "crown_jewels": [
                {
                    "crown_jewel": r.crown_jewel,
                    "best_initial": r.best_initial,
                    "best_terminal": r.best_terminal,
                    "most_visited": r.most_visited,
                    "most_visited_proportion": r.most_visited_proportion,
                    "n_paths": len(r.paths),
                    "n_failures": len(r.failures),
                }
                for r in self.reports
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def two_hop(graph: AttackGraph, cj: int) -> frozenset[int]:
    """Vertices within undirected distance 2 of ``cj``, ``cj`` included."""
    if cj not in graph.vertices:
        raise UnknownVertex(cj)
    succ, pred = graph.successors, graph.predecessors
    found = {cj}
    frontier = {cj}
    for _ in range(2):
        frontier = {n for v in frontier for n in (*succ[v], *pred[v])} - found
        found |= frontier
    return frozenset(found)


def reachable_initial_nodes(graph: AttackGraph, candidates: Iterable[int], two_hop_set: Iterable[int]) -> frozenset[int]:
    """Candidates with a directed path into ``two_hop_set``."""
    pred = graph.predecessors
    targets = set(two_hop_set)
    reach_back = set(targets)
    queue = deque(targets)
    while queue:
        for p in pred[queue.popleft()]:
            if p not in reach_back:
                reach_back.add(p)
                queue.append(p)
    return frozenset(c for c in candidates if c in reach_back)


def _rank(path: AttackPath):
    return (path.hops, -path.reward, path.terminal, path.initial, path.vertices)


def analyze_paths(paths: Sequence[AttackPath]) -> tuple[int, int, int, float]:
    """Return (best_initial, best_terminal, most_visited, proportion).

    Paths rank by fewest hops, then highest reward, then lowest ids. The
    best initial node is the one whose own best path ranks first. The most
    visited node is the vertex on the most distinct paths, ties to the
    lowest id.
    """
    if not paths:
        raise EmptyPathSet("no paths to analyze")
    best_terminal = min(paths, key=_rank).terminal

    per_initial: dict[int, AttackPath] = {}
    for p in paths:
        cur = per_initial.get(p.initial)
        if cur is None or _rank(p) < _rank(cur):
            per_initial[p.initial] = p
    best_initial = min(per_initial.values(), key=lambda p: (p.hops, -p.reward, p.initial)).initial

    counts = Counter(v for p in paths for v in set(p.vertices))
    most_visited = min(counts, key=lambda v: (-counts[v], v))
    return best_initial, best_terminal, most_visited, counts[most_visited] / len(paths)


def summarize_multi_cj(reports: Sequence[CjaReport]) -> MultiCjSummary:
    counts = Counter(r.best_initial for r in reports if r.best_initial is not None)
    best = None
    if counts:
        top = min(counts, key=lambda v: (-counts[v], v))
        if counts[top] >= 2:
            best = top
    return MultiCjSummary(list(reports), best)


# -- per-pair work ---------------------------------------------------------

_worker_state: dict = {}


def solve_pair(graph: AttackGraph, initial: int, terminal: int, terrain: TerrainConfig, learner: LearnerConfig):
    """Train on one (initial, terminal) pair; returns an AttackPath or an error string."""
    try:
        mdp = compile_mdp(graph, initial, terminal, terrain)
        result = train(mdp, initial, learner)
        return extract_path(result.qtable, mdp, initial)
    except CjaError as exc:
        return f"{type(exc).__name__}: {exc}"


def _init_worker(graph, terrain, learner):
    _worker_state.update(graph=graph, terrain=terrain, learner=learner)


def _solve_in_worker(pair):
    s = _worker_state
    return solve_pair(s["graph"], pair[0], pair[1], s["terrain"], s["learner"])


def run_cja(
    graph: AttackGraph,
    cj: int,
    candidates: Iterable[int] | None = None,
    terrain: TerrainConfig | None = None,
    learner: LearnerConfig | None = None,
    jobs: int = 1,
) -> CjaReport:
    """Find greedy attack paths from every reachable entry to every 2-hop node.

    ``candidates`` defaults to the graph's own entry candidates. Pairs with
    no directed route, or whose learned policy loops, are listed in
    ``failures``. Output does not depend on ``jobs``.
    """
    terrain = terrain or TerrainConfig()
    learner = learner or LearnerConfig()
    hood = two_hop(graph, cj)
    candidates = sorted(graph.candidate_initial_nodes if candidates is None else set(candidates))
    for c in candidates:
        if c not in graph.vertices:
            raise UnknownVertex(c)
    initials = sorted(reachable_initial_nodes(graph, candidates, hood))
    if not initials:
        raise NoReachableInitialNodes(cj)

    failures: list[tuple[int, int, str]] = []
    todo: list[tuple[int, int]] = []
    for i in initials:
        reach = _forward(graph, i)
        for j in sorted(hood):
            if j in reach:
                todo.append((i, j))
            else:
                failures.append((i, j, f"Unreachable: {Unreachable(i, j)}"))
    log.info("crown jewel %d: %d entry nodes, %d targets, %d trainable pairs", cj, len(initials), len(hood), len(todo))

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(graph, terrain, learner)) as pool:
            outcomes = list(pool.map(_solve_in_worker, todo, chunksize=max(1, len(todo) // (4 * jobs))))
    else:
        outcomes = []
        for n, (i, j) in enumerate(todo, start=1):
            outcomes.append(solve_pair(graph, i, j, terrain, learner))
            if n % 25 == 0:
                log.info("crown jewel %d: %d/%d pairs trained", cj, n, len(todo))

    paths = []
    for (i, j), out in zip(todo, outcomes):
        if isinstance(out, AttackPath):
            paths.append(out)
        else:
            failures.append((i, j, out))
    paths.sort(key=lambda p: (p.initial, p.terminal))
    failures.sort(key=lambda f: (f[0], f[1]))

    best_i = best_t = most = None
    proportion = 0.0
    if paths:
        best_i, best_t, most, proportion = analyze_paths(paths)
    labels = {v: graph.vertices[v].label for v in (cj, best_i, best_t, most) if v is not None}
    return CjaReport(cj, hood, paths, best_i, best_t, most, proportion, failures, frozenset(initials), labels)


def _forward(graph: AttackGraph, start: int) -> set[int]:
    succ = graph.successors
    seen = {start}
    queue = deque([start])
    while queue:
        for n in succ[queue.popleft()]:
            if n not in seen:
                seen.add(n)
                queue.append(n)
    return seen
