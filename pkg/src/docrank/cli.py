"""Command-line interface: ``docrank extract|rank|evaluate|bootstrap|compare``.

Configuration precedence is command-line flag, then config file (``--config``
or the ``DOCRANK_CONFIG`` environment variable, simple ``key=value`` lines),
then built-in defaults.  Every output embeds the effective configuration.
"""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import logging
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from . import __version__
from .evaluation import (INDICATORS, RNG_DESCRIPTION, LabelSet, evaluate_scores,
                         read_labels, run_bootstrap)
from .extract import JavaParseError, graph_from_units, parse_project
from .graph import GRAPH_HEADER, DependenceGraph, GraphError, read_graph, serialize
from .pagerank import SolverConfig, score_subset, solve
from .ranking import DEFAULT_THRESHOLDS, rank, read_ranking_csv, select_top, write_ranking_csv
from .stats import benjamini_hochberg, cliffs_delta, wilcoxon_signed_rank

log = logging.getLogger("docrank")

VARIANT_MODES = {
    "base": "uniform",
    "w": "empirical",
    "r": "back_recommendation",
    "wr": "empirical_plus_back",
}
SUBSET_MODES = ("subset_graph", "whole_project")

METRICS_FORMAT = "docrank-metrics v1"
COMPARISON_FORMAT = "docrank-comparison v1"
RANKING_FORMAT = "docrank-ranking v1"


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    variant: str = "base"
    damping: float = 0.85
    tolerance: float = 1e-7
    max_iterations: int = 100
    back_fraction: float = 0.5
    thresholds: list = field(default_factory=lambda: list(DEFAULT_THRESHOLDS))
    runs: int = 100
    subset_mode: str = "subset_graph"
    strict: bool = False

    def validate(self) -> None:
        if self.variant not in VARIANT_MODES:
            raise UsageError(f"variant must be one of {sorted(VARIANT_MODES)}, got {self.variant!r}")
        if self.subset_mode not in SUBSET_MODES:
            raise UsageError(f"subset mode must be one of {SUBSET_MODES}, got {self.subset_mode!r}")
        if self.runs < 0:
            raise UsageError("runs must be >= 0")
        if not self.thresholds:
            raise UsageError("threshold list is empty")
        for k in self.thresholds:
            if not 0 < k <= 100:
                raise UsageError(f"threshold {k} outside (0, 100]")
        if self.back_fraction < 0:
            raise UsageError("back fraction must be >= 0")
        try:
            self.solver()
        except ValueError as exc:
            raise UsageError(str(exc)) from None

    def solver(self) -> SolverConfig:
        return SolverConfig(damping=self.damping, max_iterations=self.max_iterations,
                            tolerance=self.tolerance)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)

    def digest(self) -> str:
        blob = json.dumps(self.as_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]


_KEY_ALIASES = {"max_iters": "max_iterations", "max-iters": "max_iterations"}


def _parse_thresholds(text: str) -> list:
    values = []
    for part in str(text).replace(" ", "").split(","):
        if not part:
            continue
        value = float(part)
        values.append(int(value) if value.is_integer() else value)
    return values


def _parse_bool(text: str) -> bool:
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


_CONVERTERS = {
    "variant": str, "damping": float, "tolerance": float, "max_iterations": int,
    "back_fraction": float, "thresholds": _parse_thresholds, "runs": int,
    "subset_mode": str, "strict": _parse_bool,
}


def read_config_file(path: str | Path) -> dict:
    settings = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = _KEY_ALIASES.get(key, key.replace("-", "_"))
        if key not in _CONVERTERS:
            raise UsageError(f"{path}:{lineno}: unknown setting {key!r}")
        try:
            settings[key] = _CONVERTERS[key](value)
        except ValueError as exc:
            raise UsageError(f"{path}:{lineno}: {exc}") from None
    return settings


def effective_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    path = getattr(args, "config", None) or os.environ.get("DOCRANK_CONFIG")
    if path:
        for key, value in read_config_file(path).items():
            setattr(config, key, value)
    for key in _CONVERTERS:
        value = getattr(args, key, None)
        if value is not None:
            setattr(config, key, value)
    config.validate()
    return config


# output helpers


def _write_output(path: str | None, text: str) -> None:
    """Write atomically; '-' or None means standard output."""
    if path in (None, "-"):
        sys.stdout.write(text)
        sys.stdout.flush()
        return
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def _dump_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _clean(value):
    if isinstance(value, float) and math.isnan(value):
        return None
    return value


def _labels_digest(labels: LabelSet) -> str:
    blob = "\n".join(f"{name},{int(labels[name])}" for name in sorted(labels)).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


def _load_graph(path: str) -> DependenceGraph:
    try:
        return read_graph(path)
    except OSError as exc:
        raise UsageError(f"cannot read graph {path}: {exc.strerror or exc}") from None
    except GraphError as exc:
        raise UsageError(f"malformed graph {path}: {exc}") from None


def _variant_graph(graph: DependenceGraph, config: RunConfig) -> DependenceGraph:
    return graph.with_weighting(VARIANT_MODES[config.variant], config.back_fraction)


# commands


def cmd_extract(args: argparse.Namespace) -> int:
    config = effective_config(args)
    root = Path(args.src)
    if not root.is_dir():
        raise UsageError(f"cannot read source directory {root}")
    try:
        units, errors = parse_project(root, strict=config.strict)
    except JavaParseError as exc:
        raise UsageError(f"parse failure (strict mode): {exc}") from None
    graph = graph_from_units(units)
    _write_output(args.output, serialize(graph))
    print(f"extracted {len(graph.nodes)} modules, {len(graph.edges)} edges "
          f"from {len(units)} files; {len(errors)} parse errors", file=sys.stderr)
    return 0


def _header(kind: str, config: RunConfig) -> str:
    return (f"{kind} variant={config.variant} config={config.digest()}\n"
            f"config: {json.dumps(config.as_dict(), sort_keys=True)}")


def cmd_rank(args: argparse.Namespace) -> int:
    config = effective_config(args)
    graph = _variant_graph(_load_graph(args.graph), config)
    if not graph.nodes:
        raise UsageError("graph has no modules to rank")
    scores = solve(graph, config.solver())
    if not scores.converged:
        log.warning("no convergence after %d iterations (error %.3g)",
                    scores.iterations_used, scores.final_error)
    ranked = rank(scores)
    selection = select_top(ranked, args.top) if args.top is not None else None
    _write_output(args.output, write_ranking_csv(ranked, _header(RANKING_FORMAT, config), selection))
    return 0


def _scores_for_evaluation(args, config: RunConfig, labels: LabelSet):
    """Return (score mapping, optional re-solve callable, input description)."""
    path = Path(args.input)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror or exc}") from None
    first = data.lstrip().split(b"\n", 1)[0].strip().decode("utf-8", "replace")
    if first == GRAPH_HEADER:
        graph = _variant_graph(_load_graph(str(path)), config)
        missing = sorted(set(labels) - set(graph.nodes))
        if missing:
            raise UsageError(f"labeled modules missing from graph: {', '.join(missing)}")
        scores = score_subset(graph, labels, config.subset_mode, config.solver())
        resolver = None
        if args.resolve_test:
            solver = config.solver()
            resolver = lambda names: solve(graph.subgraph(names), solver)  # noqa: E731
        return scores, resolver, "graph"
    if args.resolve_test:
        raise UsageError("--resolve-test needs a graph input")
    try:
        scores = read_ranking_csv(data.decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise UsageError(f"malformed ranking {path}: {exc}") from None
    missing = sorted(set(labels) - set(scores))
    if missing:
        raise UsageError(f"labeled modules missing from ranking: {', '.join(missing)}")
    return scores, None, "ranking"


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = effective_config(args)
    if args.command == "bootstrap" and config.runs < 1:
        raise UsageError("bootstrap needs runs > 0")
    try:
        labels = read_labels(Path(args.labels).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read labels {args.labels}: {exc.strerror or exc}") from None
    except ValueError as exc:
        raise UsageError(f"malformed labels {args.labels}: {exc}") from None
    scores, resolver, input_kind = _scores_for_evaluation(args, config, labels)
    approach = args.approach or (f"pagerank-{config.variant}" if input_kind == "graph" else "ranking")

    doc = {
        "format": METRICS_FORMAT,
        "version": __version__,
        "approach": approach,
        "input_kind": input_kind,
        "config": config.as_dict(),
        "config_hash": config.digest(),
        "labels": {"n_total": labels.n_total, "k_true": labels.k_true,
                   "digest": _labels_digest(labels)},
        "thresholds": config.thresholds,
        "runs": config.runs,
        "rng": dict(RNG_DESCRIPTION),
        "resolve_test": bool(args.resolve_test),
    }
    single = evaluate_scores(scores, labels, config.thresholds, approach)
    doc["single_shot"] = [dict(threshold=r.k_percent, **r.as_dict()) for r in single]

    if config.runs > 0:
        result = run_bootstrap(resolver or {n: scores[n] for n in labels}, labels,
                               config.thresholds, config.runs, approach)
        sections = []
        for j, k in enumerate(result.thresholds):
            per_run = []
            for i, run in enumerate(result.per_run):
                per_run.append(dict(run_index=i, test_size=result.test_sizes[i], **run[j].as_dict()))
            mean = {name: _clean(v) for name, v in result.mean(k).items()}
            sections.append({
                "approach": approach,
                "threshold": config.thresholds[j],
                "runs": config.runs,
                "mean": mean,
                "er_excluded_runs": result.excluded(k, "er"),
                "excluded_runs": {name: result.excluded(k, name) for name in INDICATORS},
                "per_run": per_run,
                "rng": dict(RNG_DESCRIPTION),
            })
        doc["bootstrap"] = sections
    _write_output(args.output, _dump_json(doc))
    return 0


def _load_metrics(path: str) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise UsageError(f"cannot read metrics {path}: {exc.strerror or exc}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"malformed metrics {path}: {exc}") from None
    if doc.get("format") != METRICS_FORMAT:
        raise UsageError(f"{path} is not a {METRICS_FORMAT} file")
    if "bootstrap" not in doc:
        raise UsageError(f"{path} has no bootstrap section (evaluate with runs > 0)")
    return doc


def compare_metrics(doc_a: dict, doc_b: dict) -> dict:
    for key in ("thresholds", "runs", "rng"):
        if doc_a.get(key) != doc_b.get(key):
            raise UsageError(f"metrics files differ in {key}; runs cannot be paired")
    if doc_a["labels"] != doc_b["labels"]:
        raise UsageError("metrics files were computed on different label sets")

    cells = []
    for sec_a, sec_b in zip(doc_a["bootstrap"], doc_b["bootstrap"]):
        runs_a = {r["run_index"]: r for r in sec_a["per_run"]}
        runs_b = {r["run_index"]: r for r in sec_b["per_run"]}
        if set(runs_a) != set(runs_b):
            raise UsageError(f"run indices differ at threshold {sec_a['threshold']}")
        for metric in INDICATORS:
            pairs = [(runs_a[i][metric], runs_b[i][metric]) for i in sorted(runs_a)]
            pairs = [(a, b) for a, b in pairs if a is not None and b is not None]
            a_vals = [a for a, _ in pairs]
            b_vals = [b for _, b in pairs]
            p_raw = wilcoxon_signed_rank(a_vals, b_vals) if pairs else 1.0
            if pairs:
                delta, magnitude = cliffs_delta(a_vals, b_vals)
            else:
                delta, magnitude = None, None
            direction = "none"
            if delta is not None and delta > 0:
                direction = "a"
            elif delta is not None and delta < 0:
                direction = "b"
            cells.append({"metric": metric, "threshold": sec_a["threshold"], "pairs": len(pairs),
                          "p_raw": p_raw, "delta": delta, "magnitude": magnitude,
                          "direction": direction})
    adjusted = benjamini_hochberg([c["p_raw"] for c in cells])
    for cell, p_adj in zip(cells, adjusted):
        cell["p_adjusted"] = p_adj
    return {
        "format": COMPARISON_FORMAT,
        "version": __version__,
        "approach_a": doc_a["approach"],
        "approach_b": doc_b["approach"],
        "config_a": doc_a.get("config"),
        "config_b": doc_b.get("config"),
        "runs": doc_a["runs"],
        "rng": doc_a["rng"],
        "family_size": len(cells),
        "comparisons": cells,
    }


def cmd_compare(args: argparse.Namespace) -> int:
    report = compare_metrics(_load_metrics(args.metrics_a), _load_metrics(args.metrics_b))
    _write_output(args.output, _dump_json(report))
    return 0


# argument parsing


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--variant", choices=sorted(VARIANT_MODES),
                   help="base (PageRank), w (empirical weights), r (back recommendation), wr (both)")
    p.add_argument("--damping", type=float)
    p.add_argument("--tolerance", type=float)
    p.add_argument("--max-iters", dest="max_iterations", type=int)
    p.add_argument("--back-fraction", type=float)


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value config file (default: $DOCRANK_CONFIG)")
    p.add_argument("-o", "--output", help="output file ('-' or omitted: standard output)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="docrank", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="build a dependence graph from Java sources")
    p.add_argument("src")
    p.add_argument("--strict", action="store_const", const=True, default=None,
                   help="abort on the first parse error")
    _add_common(p)
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("rank", help="score and rank modules of a graph")
    p.add_argument("graph")
    p.add_argument("--top", type=float, metavar="K", help="add a 'selected' column for the top K%%")
    _add_solver_flags(p)
    _add_common(p)
    p.set_defaults(func=cmd_rank)

    for name in ("evaluate", "bootstrap"):
        p = sub.add_parser(name, help="evaluate a graph or ranking against labels"
                           + (" (bootstrap runs required)" if name == "bootstrap" else ""))
        p.add_argument("input", help="graph file or ranking CSV")
        p.add_argument("--labels", required=True)
        p.add_argument("--thresholds", type=_parse_thresholds, help="comma-separated k%% values")
        p.add_argument("--runs", type=int, help="bootstrap runs (0 disables)")
        p.add_argument("--subset-mode", choices=SUBSET_MODES)
        p.add_argument("--resolve-test", action="store_true",
                       help="re-solve on each test subgraph instead of restricting scores")
        p.add_argument("--approach", help="approach name recorded in the output")
        _add_solver_flags(p)
        _add_common(p)
        p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("compare", help="paired statistical comparison of two metrics files")
    p.add_argument("metrics_a")
    p.add_argument("metrics_b")
    p.add_argument("--config", help=argparse.SUPPRESS)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"docrank {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
