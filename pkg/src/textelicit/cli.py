"""Command-line pipeline: elicit, fit, evaluate, simulate.

One JSON config file is the source of truth for a run; command-line flags
override individual fields.  Credentials are read from the environment
variable named in the oracle config, never from the command line.  All
outputs are deterministic given the dataset, config, and seed, and reruns
against a warm cache issue no oracle requests.

Exit codes: 0 success, 1 computation failure, 2 usage or config error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from .alignment import FitError, SolverConfig, fit_aligned_rule
from .evaluation import (
    evaluate_methods,
    importance_to_csv,
    properness_report,
    report_to_csv,
    rule_lines_to_csv,
    scatter_to_csv,
)
from .oracles import (
    HttpChatTransport,
    MockChatTransport,
    OracleClient,
    OracleConfig,
    ResponseCache,
    stage_configs,
)
from .pipeline import (
    ClusterDataset,
    ElicitationError,
    ElicitedMatrix,
    build_problem,
    elicit_cluster,
    instructor_references,
    judge_references,
    load_dataset,
)
from .rules import SeparateRule, is_proper_single, properness_failures

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

REFERENCES = ("instructor", "llm_judge")
SPLITS = ("in_sample", "loso_cv")


class UsageError(Exception):
    """Bad invocation or configuration; maps to exit code 2."""


@dataclass
class RunConfig:
    dataset: str = ""
    cache_dir: str = "oracle_cache"
    output_dir: str = "out"
    reference: str = "instructor"
    split: str = "in_sample"
    seed: int = 0
    workers: int = 1
    mock_oracle: bool = False
    oracle_defaults: dict = field(default_factory=dict)
    oracle_stages: dict = field(default_factory=dict)
    solver: SolverConfig = field(default_factory=SolverConfig)

    def validate(self) -> None:
        if not self.dataset:
            raise UsageError("no dataset path given (flag --dataset or config key 'dataset')")
        if not Path(self.dataset).is_file():
            raise UsageError(f"dataset file not found: {self.dataset}")
        if self.reference not in REFERENCES:
            raise UsageError(f"reference must be one of {REFERENCES}, got {self.reference!r}")
        if self.split not in SPLITS:
            raise UsageError(f"split must be one of {SPLITS}, got {self.split!r}")
        if self.workers < 1:
            raise UsageError("workers must be at least 1")


def load_run_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig()
    if args.config:
        path = Path(args.config)
        if not path.is_file():
            raise UsageError(f"config file not found: {args.config}")
        try:
            raw = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"config file is not valid JSON: {exc}") from exc
        oracle_raw = raw.pop("oracle", {})
        solver_raw = raw.pop("solver", {})
        known = {f for f in RunConfig.__dataclass_fields__ if f not in (
            "oracle_defaults", "oracle_stages", "solver")}
        unknown = set(raw) - known
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        config = replace(config, **raw)
        config.oracle_defaults = oracle_raw.get("defaults", {})
        config.oracle_stages = oracle_raw.get("stages", {})
        try:
            config.solver = SolverConfig(**solver_raw) if solver_raw else SolverConfig()
        except (TypeError, ValueError) as exc:
            raise UsageError(f"bad solver config: {exc}") from exc
    for flag, attr in [
        ("dataset", "dataset"),
        ("cache_dir", "cache_dir"),
        ("out", "output_dir"),
        ("reference", "reference"),
        ("split", "split"),
        ("seed", "seed"),
        ("workers", "workers"),
    ]:
        value = getattr(args, flag)
        if value is not None:
            setattr(config, attr, value)
    if args.mock_oracle:
        config.mock_oracle = True
    config.validate()
    return config


def build_oracle(config: RunConfig) -> OracleClient:
    try:
        defaults = OracleConfig.from_dict(config.oracle_defaults) if config.oracle_defaults else OracleConfig()
        configs = stage_configs(defaults, config.oracle_stages)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad oracle config: {exc}") from exc
    transport = MockChatTransport() if config.mock_oracle else HttpChatTransport()
    cache = ResponseCache(config.cache_dir)
    return OracleClient(transport, cache=cache, configs=configs)


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _write_json(path: Path, payload: dict) -> None:
    _write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def _matrix_dir(config: RunConfig) -> Path:
    return Path(config.output_dir) / "matrices"


def _rules_dir(config: RunConfig) -> Path:
    return Path(config.output_dir) / "rules" / config.reference


def _load_matrices(config: RunConfig) -> list[ElicitedMatrix]:
    directory = _matrix_dir(config)
    paths = sorted(directory.glob("*.json"))
    if not paths:
        raise UsageError(f"no elicited matrices under {directory}; run 'elicit' first")
    return [ElicitedMatrix.from_json_dict(json.loads(p.read_text())) for p in paths]


def _load_rules(config: RunConfig, matrices) -> dict[str, SeparateRule]:
    rules: dict[str, SeparateRule] = {}
    for matrix in matrices:
        path = _rules_dir(config) / f"{matrix.cluster_id}.json"
        if not path.is_file():
            raise UsageError(f"missing fitted rule {path}; run 'fit' first")
        rules[matrix.cluster_id] = SeparateRule.from_json_dict(json.loads(path.read_text()))
    return rules


def _references(config: RunConfig, clusters, oracle) -> dict[str, dict]:
    refs = {}
    for cluster in clusters:
        if config.reference == "instructor":
            refs[cluster.cluster_id] = instructor_references(cluster)
        else:
            refs[cluster.cluster_id] = judge_references(cluster, oracle)
    return refs


def cmd_elicit(config: RunConfig, dry_run: bool = False) -> int:
    clusters = load_dataset(config.dataset)
    if dry_run:
        print(f"would elicit {len(clusters)} clusters "
              f"({', '.join(c.cluster_id for c in clusters)}) into {_matrix_dir(config)}")
        return EXIT_OK
    oracle = build_oracle(config)
    failures = []

    def run(cluster: ClusterDataset):
        return elicit_cluster(cluster, oracle)

    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        results = list(pool.map(lambda c: _try(run, c, failures), clusters))
    for matrix in results:
        if matrix is None:
            continue
        _write_json(_matrix_dir(config) / f"{matrix.cluster_id}.json", matrix.to_json_dict())
    for failure in failures:
        logger.error("%s", failure)
    if failures:
        return EXIT_FAILURE
    print(f"elicited {len(results)} matrices into {_matrix_dir(config)}")
    return EXIT_OK


def _try(fn, cluster, failures):
    try:
        return fn(cluster)
    except ElicitationError as exc:
        request = f" (request {exc.request_id})" if exc.request_id else ""
        failures.append(f"cluster {exc.cluster_id} failed: {exc}{request}")
        return None


def cmd_fit(config: RunConfig, dry_run: bool = False) -> int:
    matrices = _load_matrices(config)
    if dry_run:
        print(f"would fit {len(matrices)} rules against reference "
              f"'{config.reference}' into {_rules_dir(config)}")
        return EXIT_OK
    clusters = {c.cluster_id: c for c in load_dataset(config.dataset)}
    oracle = build_oracle(config)
    refs = _references(config, [clusters[m.cluster_id] for m in matrices], oracle)
    fitted: dict[str, SeparateRule] = {}
    for matrix in matrices:
        problem = build_problem(matrix, refs[matrix.cluster_id])
        try:
            result = fit_aligned_rule(problem, config.solver)
        except FitError as exc:
            logger.error(
                "fit failed for cluster %s: %s (residual %.3e, trace length %d)",
                matrix.cluster_id, exc, exc.residual, len(exc.trace),
            )
            return EXIT_FAILURE
        fitted[matrix.cluster_id] = result.rule
        _write_json(_rules_dir(config) / f"{matrix.cluster_id}.json", result.to_json_dict())
    _write(_rules_dir(config) / "importance.csv", importance_to_csv(fitted))
    print(f"fitted {len(fitted)} rules into {_rules_dir(config)}")
    return EXIT_OK


def cmd_evaluate(config: RunConfig, dry_run: bool = False) -> int:
    matrices = _load_matrices(config)
    rules = _load_rules(config, matrices)
    out_dir = Path(config.output_dir) / "evaluation" / config.reference
    if dry_run:
        print(f"would evaluate {len(matrices)} clusters ({config.split}) into {out_dir}")
        return EXIT_OK
    clusters = {c.cluster_id: c for c in load_dataset(config.dataset)}
    oracle = build_oracle(config)
    refs = _references(config, [clusters[m.cluster_id] for m in matrices], oracle)
    report, rows = evaluate_methods(
        matrices,
        rules,
        refs,
        split=config.split,
        solver_config=config.solver,
        reference_name=config.reference,
    )
    _write_json(out_dir / "report.json", report.to_json_dict())
    _write(out_dir / "report.csv", report_to_csv(report))
    _write(out_dir / "scatter.csv", scatter_to_csv(rows))
    _write(out_dir / "rule_lines.csv", rule_lines_to_csv(rules))
    aligned = report.methods["aligned"]
    print(
        f"evaluation ({config.split}, reference {config.reference}): "
        f"aligned squared loss {aligned.squared_loss:.3f} over {report.n} reviews"
    )
    return EXIT_OK


def cmd_simulate(config: RunConfig, dry_run: bool = False) -> int:
    matrices = _load_matrices(config)
    rules = _load_rules(config, matrices)
    out_dir = Path(config.output_dir) / "simulation" / config.reference
    if dry_run:
        print(f"would simulate properness for {len(rules)} rules into {out_dir}")
        return EXIT_OK
    for cluster_id, rule in rules.items():
        for index, dim in enumerate(rule.dims):
            if not is_proper_single(dim.rule, dim.prior, tol=1e-6):
                failures = properness_failures(dim.rule, dim.prior, tol=1e-6)
                logger.error(
                    "rule for cluster %s dimension %d (%s) violates properness: %s",
                    cluster_id, index, dim.point_id, "; ".join(failures),
                )
                return EXIT_FAILURE
    payload = []
    csv_lines = [
        "cluster_id,dim_index,prior,belief,deviation,flip_prob,exact_gap,mc_gap,mc_se"
    ]
    for cluster_id in sorted(rules):
        rule = rules[cluster_id]
        for flip_prob in (0.0, 0.1, 0.3):
            for row in properness_report(
                rule, flip_prob=flip_prob, trials=10_000, seed=config.seed
            ):
                payload.append(
                    {
                        "cluster_id": cluster_id,
                        "dim_index": row.dim_index,
                        "prior": row.prior,
                        "belief": row.belief,
                        "deviation": row.deviation,
                        "flip_prob": flip_prob,
                        "exact_gap": row.exact_gap,
                        "mc_gap": row.mc_gap,
                        "mc_se": row.mc_se,
                    }
                )
                csv_lines.append(
                    f"{cluster_id},{row.dim_index},{row.prior!r},{row.belief},"
                    f"{row.deviation},{flip_prob!r},{row.exact_gap!r},"
                    f"{row.mc_gap!r},{row.mc_se!r}"
                )
    # Fitted rules carry feasibility residue up to 1e-9; only gaps beyond
    # that tolerance indicate a properness violation.
    negative = [p for p in payload if p["exact_gap"] < -1e-9]
    _write_json(out_dir / "properness.json", {"rows": payload, "negative_exact_gaps": len(negative)})
    _write(out_dir / "properness.csv", "\n".join(csv_lines) + "\n")
    print(f"simulated {len(payload)} truthfulness gaps into {out_dir}"
          f" ({len(negative)} negative exact gaps)")
    return EXIT_OK


def cmd_all(config: RunConfig, dry_run: bool = False) -> int:
    for command in (cmd_elicit, cmd_fit, cmd_evaluate, cmd_simulate):
        code = command(config, dry_run)
        if code != EXIT_OK:
            return code
    return EXIT_OK


COMMANDS = {
    "elicit": cmd_elicit,
    "fit": cmd_fit,
    "evaluate": cmd_evaluate,
    "simulate": cmd_simulate,
    "all": cmd_all,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="textelicit",
        description="Truthful scoring of free-text reviews against ground-truth reviews.",
    )
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON run config; flags override its fields")
    parser.add_argument("--dataset", help="dataset JSON path")
    parser.add_argument("--cache-dir", dest="cache_dir", help="oracle response cache directory")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--reference", choices=REFERENCES, help="reference score to align to")
    parser.add_argument("--split", choices=SPLITS, help="evaluation split")
    parser.add_argument("--seed", type=int, help="seed for simulations")
    parser.add_argument("--workers", type=int, help="concurrent clusters")
    parser.add_argument(
        "--mock-oracle", action="store_true", help="use the deterministic offline oracle"
    )
    parser.add_argument(
        "--dry-run", action="store_true", help="validate inputs and print the plan only"
    )
    parser.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_run_config(args)
        return COMMANDS[args.command](config, dry_run=args.dry_run)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ElicitationError, FitError) as exc:
        print(f"failure: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
