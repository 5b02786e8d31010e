"""Attack graph model, MulVal-style file I/O, synthetic graphs and DOT export.

On-disk layout of a graph directory::

    VERTICES.CSV      id,"label","kind"        (kind: LEAF | AND | OR)
    ARCS.CSV          src,dst
    annotations.json  CVSS scores, firewall terrain, crown jewels, entry candidates

Lines starting with ``#`` are comments in both CSV files.
"""
from __future__ import annotations

import csv
import json
import logging
import math
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from pathlib import Path

import numpy as np

from cjarl.errors import (
    AnnotationError,
    DanglingArc,
    DuplicateArc,
    DuplicateVertexId,
    InfeasibleShape,
    InvalidVertexId,
    MalformedLine,
    ScoreOutOfRange,
    SelfLoop,
    UnknownVertex,
    UnknownVertexInPath,
)

log = logging.getLogger(__name__)

VERTICES_FILE = "VERTICES.CSV"
ARCS_FILE = "ARCS.CSV"
ANNOTATIONS_FILE = "annotations.json"


class VertexKind(str, Enum):
    LEAF = "LEAF"
    AND = "AND"
    OR = "OR"


class Complexity(str, Enum):
    LOW = "LOW"
    MEDIUM = "MEDIUM"
    HIGH = "HIGH"


class Service(str, Enum):
    FTP = "FTP"
    SMTP = "SMTP"
    HTTP = "HTTP"
    SSH = "SSH"
    NONE = "NONE"


FIREWALLED_SERVICES = (Service.FTP, Service.SMTP, Service.HTTP, Service.SSH)


@dataclass(frozen=True)
class CvssAnnotation:
    base_score: float
    exploitability_score: float
    attack_complexity: Complexity

    def __post_init__(self):
        object.__setattr__(self, "attack_complexity", Complexity(self.attack_complexity))

    def check(self, vertex_id: int) -> None:
        for name in ("base_score", "exploitability_score"):
            value = getattr(self, name)
            if not (math.isfinite(value) and 0.0 <= value <= 10.0):
                raise ScoreOutOfRange(vertex_id, name, value)


DEFAULT_ANNOTATION = CvssAnnotation(5.0, 5.0, Complexity.MEDIUM)


@dataclass(frozen=True)
class Vertex:
    id: int
    label: str
    kind: VertexKind
    annotation: CvssAnnotation | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", VertexKind(self.kind))


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    service: Service = Service.NONE
    firewall: bool = False

    def __post_init__(self):
        object.__setattr__(self, "service", Service(self.service))

    @property
    def key(self) -> tuple[int, int]:
        return (self.src, self.dst)


@dataclass(frozen=True)
class AttackGraph:
    """Directed attack graph. Treat instances as read-only once built."""

    vertices: Mapping[int, Vertex]
    edges: tuple[Edge, ...]
    crown_jewels: frozenset[int] = field(default_factory=frozenset)
    candidate_initial_nodes: frozenset[int] = field(default_factory=frozenset)

    def __post_init__(self):
        if not isinstance(self.vertices, Mapping):
            verts: dict[int, Vertex] = {}
            for v in self.vertices:
                if v.id in verts:
                    raise DuplicateVertexId(v.id)
                verts[v.id] = v
        else:
            verts = dict(self.vertices)
        for vid, v in verts.items():
            if vid != v.id:
                raise ValueError(f"vertex keyed {vid} has id {v.id}")
            if not isinstance(vid, int) or vid <= 0:
                raise InvalidVertexId(vid)
            if v.annotation is not None:
                v.annotation.check(vid)
        object.__setattr__(self, "vertices", {k: verts[k] for k in sorted(verts)})

        seen: set[tuple[int, int]] = set()
        for e in self.edges:
            if e.src not in verts or e.dst not in verts:
                raise DanglingArc(e.src, e.dst)
            if e.src == e.dst:
                raise SelfLoop(e.src)
            if e.key in seen:
                raise DuplicateArc(e.src, e.dst)
            seen.add(e.key)
        object.__setattr__(self, "edges", tuple(sorted(self.edges, key=lambda e: e.key)))

        for name in ("crown_jewels", "candidate_initial_nodes"):
            ids = frozenset(getattr(self, name))
            for vid in sorted(ids - verts.keys()):
                raise UnknownVertex(vid)
            object.__setattr__(self, name, ids)

    def __contains__(self, vertex_id) -> bool:
        return vertex_id in self.vertices

    @cached_property
    def successors(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = {v: [] for v in self.vertices}
        for e in self.edges:
            out[e.src].append(e.dst)
        return {v: tuple(sorted(ds)) for v, ds in out.items()}

    @cached_property
    def predecessors(self) -> dict[int, tuple[int, ...]]:
        inc: dict[int, list[int]] = {v: [] for v in self.vertices}
        for e in self.edges:
            inc[e.dst].append(e.src)
        return {v: tuple(sorted(ss)) for v, ss in inc.items()}

    @cached_property
    def edge_map(self) -> dict[tuple[int, int], Edge]:
        return {e.key: e for e in self.edges}

    def annotation(self, vertex_id: int) -> CvssAnnotation:
        """Annotation of a vertex, falling back to the neutral default."""
        ann = self.vertices[vertex_id].annotation
        return ann if ann is not None else DEFAULT_ANNOTATION

    def annotated_fraction(self) -> float:
        if not self.vertices:
            return 0.0
        return sum(v.annotation is not None for v in self.vertices.values()) / len(self.vertices)


# -- parsing ---------------------------------------------------------------


def _records(text: str):
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        yield line_no, line


def _parse_int(token: str, line_no: int, source: str) -> int:
    token = token.strip()
    try:
        value = int(token)
    except ValueError:
        raise MalformedLine(line_no, f"expected integer, got {token!r}", source) from None
    if value <= 0:
        raise MalformedLine(line_no, f"vertex id must be positive, got {value}", source)
    return value


def _parse_vertices(text: str) -> list[tuple[int, str, VertexKind]]:
    rows = []
    seen: set[int] = set()
    for line_no, line in _records(text):
        try:
            fields = next(csv.reader([line], skipinitialspace=True, strict=True))
        except csv.Error as exc:
            raise MalformedLine(line_no, str(exc), VERTICES_FILE) from None
        if len(fields) != 3:
            raise MalformedLine(line_no, f"expected 3 fields, got {len(fields)}", VERTICES_FILE)
        vid = _parse_int(fields[0], line_no, VERTICES_FILE)
        try:
            kind = VertexKind(fields[2].strip())
        except ValueError:
            raise MalformedLine(line_no, f"unknown vertex kind {fields[2]!r}", VERTICES_FILE) from None
        if vid in seen:
            raise DuplicateVertexId(vid)
        seen.add(vid)
        rows.append((vid, fields[1], kind))
    return rows


def _parse_arcs(text: str) -> list[tuple[int, int]]:
    arcs = []
    for line_no, line in _records(text):
        fields = line.split(",")
        if len(fields) != 2:
            raise MalformedLine(line_no, f"expected 2 fields, got {len(fields)}", ARCS_FILE)
        arcs.append((_parse_int(fields[0], line_no, ARCS_FILE), _parse_int(fields[1], line_no, ARCS_FILE)))
    return arcs


def _score(value, vid: int, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise AnnotationError(f"vertex {vid}: {name} must be a number, got {value!r}")
    return float(value)


def _parse_annotation(vid: int, raw) -> CvssAnnotation:
    if not isinstance(raw, dict):
        raise AnnotationError(f"vertex {vid}: annotation must be an object")
    missing = {"base", "exploitability", "complexity"} - raw.keys()
    if missing:
        raise AnnotationError(f"vertex {vid}: annotation lacks {sorted(missing)}")
    try:
        complexity = Complexity(raw["complexity"])
    except ValueError:
        raise AnnotationError(f"vertex {vid}: bad complexity {raw['complexity']!r}") from None
    ann = CvssAnnotation(
        _score(raw["base"], vid, "base"), _score(raw["exploitability"], vid, "exploitability"), complexity
    )
    ann.check(vid)
    return ann


def _id_list(raw, key: str) -> list[int]:
    if not isinstance(raw, list) or any(isinstance(x, bool) or not isinstance(x, int) for x in raw):
        raise AnnotationError(f"{key} must be a list of integer vertex ids")
    return raw


def parse_graph(vertices_text: str, arcs_text: str, annotations_text: str) -> AttackGraph:
    """Build a validated graph from the three file bodies.

    Vertices with outgoing arcs but no CVSS annotation receive
    ``DEFAULT_ANNOTATION``; a warning reports how many.
    """
    rows = _parse_vertices(vertices_text)
    ids = {vid for vid, _, _ in rows}
    arcs = _parse_arcs(arcs_text)
    seen: set[tuple[int, int]] = set()
    for src, dst in arcs:
        if src not in ids or dst not in ids:
            raise DanglingArc(src, dst)
        if src == dst:
            raise SelfLoop(src)
        if (src, dst) in seen:
            raise DuplicateArc(src, dst)
        seen.add((src, dst))

    try:
        doc = json.loads(annotations_text) if annotations_text.strip() else {}
    except json.JSONDecodeError as exc:
        raise AnnotationError(f"annotations are not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise AnnotationError("annotations must be a JSON object")

    raw_vertices = doc.get("vertices", {})
    if not isinstance(raw_vertices, dict):
        raise AnnotationError("'vertices' must be an object keyed by vertex id")
    annotations: dict[int, CvssAnnotation] = {}
    for key, raw in raw_vertices.items():
        try:
            vid = int(key)
        except ValueError:
            raise AnnotationError(f"annotation key {key!r} is not a vertex id") from None
        if vid not in ids:
            raise UnknownVertex(vid)
        annotations[vid] = _parse_annotation(vid, raw)

    terrain: dict[tuple[int, int], tuple[Service, bool]] = {}
    raw_edges = doc.get("edges", [])
    if not isinstance(raw_edges, list):
        raise AnnotationError("'edges' must be a list")
    for raw in raw_edges:
        if not isinstance(raw, dict) or "src" not in raw or "dst" not in raw:
            raise AnnotationError(f"bad edge annotation {raw!r}")
        key = (raw["src"], raw["dst"])
        if key not in seen:
            raise DanglingArc(*key)
        if key in terrain:
            raise AnnotationError(f"edge {key[0]},{key[1]} annotated twice")
        firewall = raw.get("firewall", False)
        if not isinstance(firewall, bool):
            raise AnnotationError(f"edge {key[0]},{key[1]}: firewall must be a boolean")
        try:
            service = Service(raw.get("service", "NONE"))
        except ValueError:
            raise AnnotationError(f"edge {key[0]},{key[1]}: unknown service {raw.get('service')!r}") from None
        terrain[key] = (service, firewall)

    has_out = {src for src, _ in arcs}
    defaulted = 0
    vertices = []
    for vid, label, kind in rows:
        ann = annotations.get(vid)
        if ann is None and vid in has_out:
            ann = DEFAULT_ANNOTATION
            defaulted += 1
        vertices.append(Vertex(vid, label, kind, ann))
    if defaulted:
        log.warning("%d vertices with outgoing arcs lack CVSS annotations; using defaults", defaulted)

    edges = [Edge(src, dst, *terrain.get((src, dst), (Service.NONE, False))) for src, dst in arcs]
    return AttackGraph(
        vertices,
        tuple(edges),
        frozenset(_id_list(doc.get("crown_jewels", []), "crown_jewels")),
        frozenset(_id_list(doc.get("initial_candidates", []), "initial_candidates")),
    )


def serialize_graph(graph: AttackGraph) -> tuple[str, str, str]:
    """Inverse of :func:`parse_graph`: returns (vertices, arcs, annotations) text."""
    vertices_text = "".join(
        f"{v.id},{_quote(v.label)},{_quote(v.kind.value)}\n" for v in graph.vertices.values()
    )
    arcs_text = "".join(f"{e.src},{e.dst}\n" for e in graph.edges)
    doc = {
        "vertices": {
            str(v.id): {
                "base": v.annotation.base_score,
                "exploitability": v.annotation.exploitability_score,
                "complexity": v.annotation.attack_complexity.value,
            }
            for v in graph.vertices.values()
            if v.annotation is not None
        },
        "edges": [
            {"src": e.src, "dst": e.dst, "firewall": e.firewall, "service": e.service.value}
            for e in graph.edges
            if e.firewall or e.service is not Service.NONE
        ],
        "crown_jewels": sorted(graph.crown_jewels),
        "initial_candidates": sorted(graph.candidate_initial_nodes),
    }
    return vertices_text, arcs_text, json.dumps(doc, indent=1) + "\n"


def _quote(text: str) -> str:
    return '"' + text.replace('"', '""') + '"'


def load_graph_dir(directory: str | Path) -> AttackGraph:
    d = Path(directory)
    texts = [(d / name).read_text(encoding="utf-8") for name in (VERTICES_FILE, ARCS_FILE, ANNOTATIONS_FILE)]
    return parse_graph(*texts)


def write_graph_dir(graph: AttackGraph, directory: str | Path) -> list[Path]:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in zip((VERTICES_FILE, ARCS_FILE, ANNOTATIONS_FILE), serialize_graph(graph)):
        p = d / name
        p.write_bytes(text.encode("utf-8"))
        written.append(p)
    return written


# -- synthetic graphs ------------------------------------------------------

_RULES = (
    "Exploit active session",
    "Users with active login sessions",
    "Remote exploit of a server program",
    "Multi-hop access",
    "Password reuse",
    "Local privilege escalation",
)

INTRA_SUBNET_BIAS = 0.8


def generate_synthetic(n_vertices: int, n_edges: int, n_subnets: int, seed: int) -> AttackGraph:
    """Seeded random acyclic attack graph organised as firewalled subnets.

    Vertices get a random global order, subnet by subnet, and every edge
    points forward in it, as in a logical attack graph. Each subnet is a
    random arborescence rooted at its first vertex; subnet ``k - 1`` links
    to the root of subnet ``k`` through a firewalled bridge, so the root of
    subnet 0 reaches every vertex. Remaining edges are drawn at random,
    mostly inside a subnet; any edge crossing subnets is firewalled with a
    uniformly drawn service.
    """
    if n_vertices < 1 or n_subnets < 1:
        raise InfeasibleShape("need at least one vertex and one subnet")
    if n_subnets > n_vertices:
        raise InfeasibleShape(f"{n_subnets} subnets cannot be formed from {n_vertices} vertices")
    if n_edges < n_vertices - 1:
        raise InfeasibleShape(f"{n_edges} edges cannot connect {n_vertices} vertices")
    capacity = n_vertices * (n_vertices - 1) // 2
    if n_edges > capacity:
        raise InfeasibleShape(f"{n_edges} edges exceed the {capacity} possible acyclic arcs")

    rng = np.random.default_rng(seed % 2**64)
    ids = np.arange(1, n_vertices + 1)
    subnets = [list(map(int, rng.permutation(block))) for block in np.array_split(ids, n_subnets)]
    subnet_of = {v: k for k, members in enumerate(subnets) for v in members}
    rank = {v: r for r, v in enumerate(v for members in subnets for v in members)}
    services = FIREWALLED_SERVICES

    edges: dict[tuple[int, int], Edge] = {}

    def add(src: int, dst: int) -> None:
        if subnet_of[src] != subnet_of[dst]:
            edges[(src, dst)] = Edge(src, dst, services[int(rng.integers(len(services)))], True)
        else:
            edges[(src, dst)] = Edge(src, dst)

    for members in subnets:
        for i in range(1, len(members)):
            add(members[int(rng.integers(i))], members[i])
    for k in range(1, n_subnets):
        prev = subnets[k - 1]
        add(prev[int(rng.integers(len(prev)))], subnets[k][0])

    extra = n_edges - len(edges)
    attempts = 0
    while extra and attempts < 20 * extra + 100:
        attempts += 1
        a = int(rng.integers(1, n_vertices + 1))
        home = subnets[subnet_of[a]]
        if len(home) > 1 and rng.random() < INTRA_SUBNET_BIAS:
            b = home[int(rng.integers(len(home)))]
        else:
            b = int(rng.integers(1, n_vertices + 1))
        if a == b:
            continue
        src, dst = (a, b) if rank[a] < rank[b] else (b, a)
        if (src, dst) in edges:
            continue
        add(src, dst)
        extra -= 1
    if extra:
        order = sorted(rank, key=rank.get)
        free = [
            (order[i], order[j])
            for i in range(n_vertices)
            for j in range(i + 1, n_vertices)
            if (order[i], order[j]) not in edges
        ]
        for idx in sorted(rng.choice(len(free), size=extra, replace=False)):
            add(*free[int(idx)])

    has_in = {d for _, d in edges}
    complexities = list(Complexity)
    vertices = []
    for v in range(1, n_vertices + 1):
        host = f"host{v:05d}"
        if v not in has_in:
            kind, label = VertexKind.LEAF, f"vulExists({host},subnet{subnet_of[v]})"
        elif rng.random() < 0.5:
            r = int(rng.integers(len(_RULES)))
            kind, label = VertexKind.AND, f"RULE {r} ({_RULES[r]})"
        else:
            kind, label = VertexKind.OR, f"attack on {host} in subnet{subnet_of[v]}"
        ann = CvssAnnotation(
            round(float(rng.uniform(0.0, 10.0)), 1),
            round(float(rng.uniform(0.0, 10.0)), 1),
            complexities[int(rng.integers(3))],
        )
        vertices.append(Vertex(v, label, kind, ann))

    last = subnets[-1]
    crown_jewel = last[int(rng.integers(len(last)))]
    first = subnets[0]
    pool = first if len(first) >= 5 else list(map(int, ids))
    others = [int(x) for x in rng.permutation([x for x in pool if x != first[0]])]
    candidates = [first[0], *others[: min(5, n_vertices) - 1]]
    return AttackGraph(vertices, tuple(edges.values()), frozenset([crown_jewel]), frozenset(candidates))


# -- DOT -------------------------------------------------------------------


def _path_vertices(path) -> Sequence[int]:
    return path.vertices if hasattr(path, "vertices") else path


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n")


def emit_dot(graph: AttackGraph, highlight_paths: Iterable = ()) -> str:
    """Render ``graph`` as a Graphviz digraph.

    Crown jewels are drawn as red double octagons, entry candidates as green
    boxes, and edges along ``highlight_paths`` bold red with a ``paths``
    count attribute.
    """
    on_path: dict[tuple[int, int], int] = {}
    path_nodes: set[int] = set()
    for path in highlight_paths:
        verts = list(_path_vertices(path))
        for v in verts:
            if v not in graph.vertices:
                raise UnknownVertexInPath(v)
        path_nodes.update(verts)
        for a, b in zip(verts, verts[1:]):
            on_path[(a, b)] = on_path.get((a, b), 0) + 1

    lines = ["digraph attack_graph {", "  rankdir=LR;", "  node [shape=ellipse];"]
    for v in graph.vertices.values():
        attrs = [f'label="{v.id}: {_dot_escape(v.label)}"', f'kind="{v.kind.value}"']
        if v.id in graph.crown_jewels:
            attrs += ["shape=doubleoctagon", "style=filled", "fillcolor=tomato", 'role="crown_jewel"']
        elif v.id in graph.candidate_initial_nodes:
            attrs += ["shape=box", "style=filled", "fillcolor=palegreen", 'role="initial"']
        elif v.id in path_nodes:
            attrs += ["style=filled", "fillcolor=lightyellow"]
        lines.append(f"  {v.id} [{', '.join(attrs)}];")
    for e in graph.edges:
        attrs = []
        if e.firewall:
            attrs += ["style=dashed", f'label="{e.service.value}"']
        count = on_path.pop(e.key, 0)
        if count:
            attrs += ["color=red", "penwidth=2.5", "highlight=true", f"paths={count}"]
        lines.append(f"  {e.src} -> {e.dst}" + (f" [{', '.join(attrs)}]" if attrs else "") + ";")
    for (a, b), count in sorted(on_path.items()):
        lines.append(f"  {a} -> {b} [color=red, style=dotted, highlight=true, paths={count}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
