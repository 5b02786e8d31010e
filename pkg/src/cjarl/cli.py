"""Command-line entry point: ``cjarl {validate,generate,train,analyze}``.

Exit codes: 0 success, 1 analysis-level failure, 2 input or validation error.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from dataclasses import dataclass
from pathlib import Path

from cjarl.cja import CjaReport, run_cja, summarize_multi_cj
from cjarl.errors import CjaError, GraphError, InfeasibleShape, LoopDetected, UnknownVertex
from cjarl.graph_io import emit_dot, generate_synthetic, load_graph_dir, write_graph_dir
from cjarl.rl_engine import LearnerConfig, extract_path, train
from cjarl.terrain_mdp import TerrainConfig, compile_mdp

log = logging.getLogger("cjarl")

EXIT_OK, EXIT_ANALYSIS, EXIT_INPUT = 0, 1, 2


@dataclass
class RunManifest:
    graph_dir: Path
    terrain_path: Path | None = None
    learner_path: Path | None = None
    crown_jewels: list[int] = dataclasses.field(default_factory=list)
    initial: list[int] = dataclasses.field(default_factory=list)
    seed: int | None = None
    out: Path = Path("out")

    @classmethod
    def from_args(cls, args) -> RunManifest:
        initial = getattr(args, "initial", None)
        if isinstance(initial, int):
            initial = [initial]
        return cls(
            Path(args.graph_dir),
            Path(args.terrain) if getattr(args, "terrain", None) else None,
            Path(args.learner) if getattr(args, "learner", None) else None,
            list(getattr(args, "cj", None) or []),
            list(initial or []),
            getattr(args, "seed", None),
            Path(getattr(args, "out", None) or "out"),
        )

    def check(self) -> None:
        for p in (self.graph_dir, self.terrain_path, self.learner_path):
            if p is not None and not p.exists():
                raise FileNotFoundError(f"{p} does not exist")

    def terrain(self) -> TerrainConfig:
        return TerrainConfig.load(self.terrain_path) if self.terrain_path else TerrainConfig()

    def learner(self) -> LearnerConfig:
        cfg = LearnerConfig.load(self.learner_path) if self.learner_path else LearnerConfig()
        if self.seed is not None:
            cfg = dataclasses.replace(cfg, seed=self.seed)
        return cfg


def _fail(code: int, message: str) -> int:
    print(f"error: {message}", file=sys.stderr)
    return code


def _load(manifest: RunManifest):
    manifest.check()
    graph = load_graph_dir(manifest.graph_dir)
    for vid in [*manifest.crown_jewels, *manifest.initial]:
        if vid not in graph.vertices:
            raise UnknownVertex(vid)
    return graph


def cmd_validate(args) -> int:
    manifest = RunManifest.from_args(args)
    try:
        graph = _load(manifest)
    except (GraphError, UnknownVertex, OSError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    cjs = manifest.crown_jewels or sorted(graph.crown_jewels)
    initial = manifest.initial or sorted(graph.candidate_initial_nodes)
    print(f"vertices: {len(graph.vertices)}, edges: {len(graph.edges)}")
    print(f"annotated: {graph.annotated_fraction():.1%}")
    print(f"firewalled edges: {sum(e.firewall for e in graph.edges)}")
    print(f"crown jewels: {' '.join(map(str, cjs)) or '-'}")
    print(f"initial candidates: {' '.join(map(str, initial)) or '-'}")
    print("ok")
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        graph = generate_synthetic(args.vertices, args.edges, args.subnets, args.seed)
    except InfeasibleShape as exc:
        return _fail(EXIT_INPUT, str(exc))
    for p in write_graph_dir(graph, args.out):
        log.info("wrote %s", p)
    return EXIT_OK


def cmd_train(args) -> int:
    manifest = RunManifest.from_args(args)
    try:
        graph = _load(manifest)
        terrain, learner = manifest.terrain(), manifest.learner()
        for vid in (args.initial, args.goal):
            if vid not in graph.vertices:
                raise UnknownVertex(vid)
    except (GraphError, UnknownVertex, OSError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    try:
        mdp = compile_mdp(graph, args.initial, args.goal, terrain)
        result = train(mdp, args.initial, learner)
    except CjaError as exc:
        return _fail(EXIT_ANALYSIS, str(exc))

    out = manifest.out
    out.mkdir(parents=True, exist_ok=True)
    stem = f"{args.initial}_{args.goal}"
    (out / f"train_{stem}.csv").write_text(result.returns_csv(), encoding="utf-8")
    doc = {"initial": args.initial, "goal": args.goal, "episodes": len(result.episode_returns),
           "converged_at": result.converged_at}
    code = EXIT_OK
    try:
        doc["path"] = extract_path(result.qtable, mdp, args.initial).to_dict()
    except LoopDetected as exc:
        doc["error"] = str(exc)
        code = EXIT_ANALYSIS
    (out / f"path_{stem}.json").write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    if code:
        print(f"error: {doc['error']}", file=sys.stderr)
    return code


def cmd_analyze(args) -> int:
    manifest = RunManifest.from_args(args)
    try:
        graph = _load(manifest)
        terrain, learner = manifest.terrain(), manifest.learner()
    except (GraphError, UnknownVertex, OSError, ValueError) as exc:
        return _fail(EXIT_INPUT, str(exc))
    cjs = manifest.crown_jewels or sorted(graph.crown_jewels)
    candidates = manifest.initial or sorted(graph.candidate_initial_nodes)
    if not cjs:
        return _fail(EXIT_INPUT, "no crown jewel given (--cj) or listed in the annotations")
    if not candidates:
        return _fail(EXIT_INPUT, "no initial candidates given (--initial) or listed in the annotations")

    out = manifest.out
    out.mkdir(parents=True, exist_ok=True)
    reports: list[CjaReport] = []
    errors = []
    for cj in dict.fromkeys(cjs):
        log.info("analyzing crown jewel %d", cj)
        try:
            report = run_cja(graph, cj, candidates, terrain, learner, jobs=args.jobs)
        except CjaError as exc:
            log.warning("crown jewel %d: %s", cj, exc)
            errors.append({"crown_jewel": cj, "error": f"{type(exc).__name__}: {exc}"})
            continue
        reports.append(report)
        (out / f"cja_{cj}.json").write_text(report.to_json(), encoding="utf-8")
        if args.emit_dot:
            view = dataclasses.replace(graph, crown_jewels=frozenset([cj]), candidate_initial_nodes=report.reachable_initial)
            (out / f"cja_{cj}.dot").write_text(emit_dot(view, report.paths), encoding="utf-8")

    summary = summarize_multi_cj(reports).to_dict()
    summary["errors"] = errors
    (out / "summary.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    if errors or any(not r.paths for r in reports):
        return EXIT_ANALYSIS
    return EXIT_OK


def _graph_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--graph-dir", required=True, help="directory holding VERTICES.CSV, ARCS.CSV, annotations.json")
    p.add_argument("--cj", type=int, action="append", help="crown jewel vertex id (repeatable)")
    p.add_argument("--initial", type=int, action="append", help="candidate initial vertex id (repeatable)")


def _run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--terrain", help="terrain config JSON")
    p.add_argument("--learner", help="learner config JSON")
    p.add_argument("--seed", type=int, help="overrides the learner config seed")
    p.add_argument("--out", default="out", help="output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cjarl", description="Crown jewel analysis of attack graphs with Q-learning.")
    parser.add_argument("-q", "--quiet", action="store_true", help="only log warnings")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="parse a graph directory and report counts")
    _graph_flags(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("generate", help="write a seeded synthetic graph")
    p.add_argument("--vertices", type=int, required=True)
    p.add_argument("--edges", type=int, required=True)
    p.add_argument("--subnets", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train one initial/goal pair")
    p.add_argument("--graph-dir", required=True)
    p.add_argument("--initial", type=int, required=True)
    p.add_argument("--goal", type=int, required=True)
    _run_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("analyze", help="run crown jewel analysis for each crown jewel")
    _graph_flags(p)
    _run_flags(p)
    p.add_argument("--emit-dot", action="store_true", help="also write cja_<id>.dot")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for pair training")
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
