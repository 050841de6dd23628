"""Command-line pipeline driver.

Subcommands wire the stages end to end: ``expand`` (ingest -> pair ->
interpolate -> assign -> emit), ``plan`` and ``interpolate`` for the
individual stages, ``diagnose`` for plot data, and ``simulate`` for the
statistical harness. One seed fans out to per-stage sub-seeds via a
stable hash, so any stage can be re-run in isolation reproducibly.

Exit codes: 0 success, 2 input error, 3 capacity error, 4 I/O error.
Every failure prints exactly one ``CATEGORY: detail`` line on stderr.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bank import read_bank, write_bank, _read_text, _write_text
from .core import Gender
from .diagnostics import (
    coverage_gain,
    format_coverage,
    format_histogram,
    format_projection,
    intra_class_similarity,
    project_2d,
)
from .errors import GroupTooSmall, InputError, PipelineError
from .manifest import (
    DEFAULT_MAX_WORDS,
    DEFAULT_MIN_WORDS,
    DEFAULT_UTTERANCES_PER_IDENTITY,
    assign_texts,
    emit,
    ingest_transcripts,
)
from .planner import (
    DEFAULT_ALPHA,
    STRATEGIES,
    execute_plan,
    plan_pairs_nearest_neighbor,
    plan_pairs_random,
    read_pair_plan,
    split_total,
    write_pair_plan,
)
from .seeds import derive_seed
from .simulate import (
    ClusterSpec,
    PopulationSpec,
    format_report,
    run_experiment,
)

PLAN_FILENAME = "pairs.plan"
PROJECTION_FILENAME = "projection.tsv"
HISTOGRAM_FILENAME = "histogram.tsv"
COVERAGE_FILENAME = "coverage.txt"
REPORT_FILENAME = "report.txt"


class _Parser(argparse.ArgumentParser):
    # keep the one-error-line contract even for flag mistakes
    def error(self, message):
        print(f"INPUT: {message}", file=sys.stderr)
        raise SystemExit(2)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="voxpand", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"voxpand {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    expand = sub.add_parser("expand", help="run the full expansion pipeline")
    _add_common(expand)
    _add_planning(expand)
    expand.add_argument("--transcripts", help="transcript pool, one per line")
    expand.add_argument("--utterances-per-identity", type=int)
    expand.add_argument("--min-words", type=int)
    expand.add_argument("--max-words", type=int)

    plan = sub.add_parser("plan", help="write a pair plan only")
    _add_common(plan)
    _add_planning(plan)

    interpolate = sub.add_parser("interpolate", help="execute a pair plan into a bank")
    _add_common(interpolate)
    interpolate.add_argument("--embeddings", help="input embedding bank")
    interpolate.add_argument("--plan", help="pair-plan file to execute")

    diagnose = sub.add_parser("diagnose", help="emit projection/histogram/coverage data")
    _add_common(diagnose)
    diagnose.add_argument("--real", help="real identity bank")
    diagnose.add_argument("--synthetic", help="synthetic identity bank (optional)")
    diagnose.add_argument(
        "--utterances",
        help="utterance bank; ids '<identity>#<k>' group into identities (optional)",
    )
    diagnose.add_argument("--probes", type=int, default=128)
    diagnose.add_argument("--bins", type=int, default=50)
    diagnose.add_argument("--max-pairs", type=int, default=200)

    simulate = sub.add_parser("simulate", help="run the statistical harness")
    _add_common(simulate)
    simulate.add_argument("--seeds", help="comma-separated experiment seeds")
    simulate.add_argument("--probes", type=int, default=128)
    simulate.add_argument("--noise-scale", type=float, default=1.0)
    return parser


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--seed", type=int)
    sub.add_argument("--config", help="key = value config file; flags override")
    sub.add_argument("--output-dir", help="directory for emitted files")


def _add_planning(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--embeddings", help="input embedding bank")
    sub.add_argument("--strategy", choices=STRATEGIES)
    sub.add_argument("--alpha", type=float)
    sub.add_argument("--total-target", type=int)
    sub.add_argument("--split", choices=("proportional", "even"))
    sub.add_argument("--target-male", type=int)
    sub.add_argument("--target-female", type=int)


# -- config files ----------------------------------------------------------------

def parse_config_text(text: str) -> tuple[dict[str, str], list[dict[str, str]]]:
    """key = value lines plus repeatable [cluster] blocks."""
    top: dict[str, str] = {}
    blocks: list[dict[str, str]] = []
    current = top
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if line != "[cluster]":
                raise InputError(f"config line {lineno}: unknown section {line!r}")
            blocks.append({})
            current = blocks[-1]
            continue
        if "=" not in line:
            raise InputError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise InputError(f"config line {lineno}: empty key")
        current[key] = value
    return top, blocks


def load_config(path) -> tuple[dict[str, str], list[dict[str, str]]]:
    return parse_config_text(_read_text(path))


class Settings:
    """Flag values overriding config-file values overriding defaults."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config: dict[str, str] = {}
        self.clusters: list[dict[str, str]] = []
        if getattr(args, "config", None):
            self.config, self.clusters = load_config(args.config)

    def get(self, name: str, default=None, convert=str):
        flag = getattr(self.args, name.replace("-", "_"), None)
        if flag is not None:
            return flag
        if name in self.config:
            try:
                return convert(self.config[name])
            except ValueError as exc:
                raise InputError(f"config key {name!r}: bad value {self.config[name]!r}") from exc
        return default

    def require(self, name: str, convert=str):
        value = self.get(name, None, convert)
        if value is None:
            raise InputError(f"missing required setting {name!r} (flag --{name} or config key)")
        return value


def _resolve_targets(settings: Settings, embeddings) -> dict[Gender, int]:
    male = settings.get("target-male", None, int)
    female = settings.get("target-female", None, int)
    if male is not None or female is not None:
        targets = {}
        if male is not None:
            targets[Gender.MALE] = male
        if female is not None:
            targets[Gender.FEMALE] = female
        return targets
    total = settings.require("total-target", int)
    policy = settings.get("split", "proportional")
    return split_total(total, embeddings.gender_counts(), policy)


def _plan(settings: Settings, embeddings, seed: int):
    strategy = settings.get("strategy", "nearest_neighbor")
    alpha = settings.get("alpha", DEFAULT_ALPHA, float)
    targets = _resolve_targets(settings, embeddings)
    planner = plan_pairs_random if strategy == "random" else plan_pairs_nearest_neighbor
    return planner(embeddings, targets, seed=derive_seed(seed, "plan"), alpha=alpha)


# -- subcommands -------------------------------------------------------------------

def cmd_expand(args: argparse.Namespace) -> int:
    settings = Settings(args)
    output_dir = Path(settings.require("output-dir"))
    seed = settings.get("seed", 0, int)
    embeddings = read_bank(settings.require("embeddings"))
    pool = ingest_transcripts(
        settings.require("transcripts"),
        settings.get("min-words", DEFAULT_MIN_WORDS, int),
        settings.get("max-words", DEFAULT_MAX_WORDS, int),
    )
    plan = _plan(settings, embeddings, seed)
    identities = execute_plan(embeddings, plan)
    manifest = assign_texts(
        identities,
        pool,
        settings.get("utterances-per-identity", DEFAULT_UTTERANCES_PER_IDENTITY, int),
        seed=derive_seed(seed, "assign"),
    )
    paths = emit(manifest, identities, output_dir, dimension=embeddings.dimension)
    write_pair_plan(output_dir / PLAN_FILENAME, plan, embeddings.dimension)
    sys.stdout.write(paths["summary"].read_text(encoding="utf-8"))
    return 0


def cmd_plan(args: argparse.Namespace) -> int:
    settings = Settings(args)
    output_dir = Path(settings.require("output-dir"))
    seed = settings.get("seed", 0, int)
    embeddings = read_bank(settings.require("embeddings"))
    plan = _plan(settings, embeddings, seed)
    output_dir.mkdir(parents=True, exist_ok=True)
    write_pair_plan(output_dir / PLAN_FILENAME, plan, embeddings.dimension)
    print(f"planned {len(plan.pairs)} pairs ({plan.strategy}, max level {plan.max_level_reached})")
    return 0


def cmd_interpolate(args: argparse.Namespace) -> int:
    settings = Settings(args)
    output_dir = Path(settings.require("output-dir"))
    embeddings = read_bank(settings.require("embeddings"))
    plan, dimension = read_pair_plan(settings.require("plan"))
    if dimension != embeddings.dimension:
        raise InputError(
            f"plan dimension {dimension} does not match bank dimension {embeddings.dimension}"
        )
    identities = execute_plan(embeddings, plan)
    output_dir.mkdir(parents=True, exist_ok=True)
    bank_path = output_dir / "synthetic.bank"
    write_bank(bank_path, identities, embeddings.dimension)
    print(f"interpolated {len(identities)} identities -> {bank_path}")
    return 0


def cmd_diagnose(args: argparse.Namespace) -> int:
    settings = Settings(args)
    output_dir = Path(settings.require("output-dir"))
    seed = settings.get("seed", 0, int)
    real = read_bank(settings.require("real"))
    synthetic_path = settings.get("synthetic")
    synthetic = _bank_as_synthetic(read_bank(synthetic_path)) if synthetic_path else []
    output_dir.mkdir(parents=True, exist_ok=True)

    projection = project_2d(real, synthetic, seed=derive_seed(seed, "projection"))
    _write_text(output_dir / PROJECTION_FILENAME, format_projection(projection))

    coverage = coverage_gain(real, synthetic, args.probes, derive_seed(seed, "coverage-probes"))
    _write_text(output_dir / COVERAGE_FILENAME, format_coverage(coverage))

    utterances_path = settings.get("utterances")
    if utterances_path:
        groups = _utterance_groups(read_bank(utterances_path))
        histogram = intra_class_similarity(
            groups, args.max_pairs, seed=derive_seed(seed, "intra"), bins=args.bins
        )
        _write_text(output_dir / HISTOGRAM_FILENAME, format_histogram(histogram))
    print(f"diagnostics written to {output_dir}")
    return 0


def _bank_as_synthetic(bank):
    # diagnose accepts any bank on the synthetic side; provenance fields
    # are not recorded in the bank format
    from .core import SyntheticIdentity

    return [
        SyntheticIdentity(
            id=rec.id, parent_a="", parent_b="", alpha=float("nan"),
            gender=rec.gender, vector=rec.vector,
        )
        for rec in bank.records
    ]


def _utterance_groups(bank) -> dict[str, np.ndarray]:
    grouped: dict[str, list[np.ndarray]] = {}
    for record in bank.records:
        identity = record.id.rsplit("#", 1)[0]
        grouped.setdefault(identity, []).append(record.vector)
    if not grouped:
        raise GroupTooSmall("utterance bank is empty")
    return {identity: np.stack(vectors) for identity, vectors in grouped.items()}


def cmd_simulate(args: argparse.Namespace) -> int:
    settings = Settings(args)
    output_dir = Path(settings.require("output-dir"))
    if not getattr(args, "config", None):
        raise InputError("simulate needs --config with a population spec")
    spec = _population_spec(settings)
    targets = _simulation_targets(settings)
    seeds = _parse_seeds(settings.require("seeds"))
    report = run_experiment(
        spec,
        targets,
        seeds,
        probe_count=args.probes,
        synthetic_noise_scale=args.noise_scale,
    )
    output_dir.mkdir(parents=True, exist_ok=True)
    _write_text(output_dir / REPORT_FILENAME, format_report(report))
    sys.stdout.write(format_report(report).split("\n\n")[0] + "\n")
    return 0


def _population_spec(settings: Settings) -> PopulationSpec:
    top = settings.config
    if not settings.clusters:
        raise InputError("population spec needs at least one [cluster] block")
    try:
        dimension = int(top["dimension"])
        utterance_noise = float(top["utterance_noise"])
        spec_seed = int(top.get("seed", "0"))
        utterances = int(top.get("utterances_per_identity", "10"))
    except KeyError as exc:
        raise InputError(f"population spec misses key {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise InputError(f"population spec has a malformed value: {exc}") from exc
    clusters = []
    for index, block in enumerate(settings.clusters):
        try:
            kappa = float(block["kappa"])
            count = int(block["count"])
            gender = Gender(block["gender"])
            center_text = block.get("center", "random")
        except KeyError as exc:
            raise InputError(f"cluster {index}: missing key {exc.args[0]!r}") from exc
        except ValueError as exc:
            raise InputError(f"cluster {index}: {exc}") from exc
        if center_text == "random":
            rng = np.random.default_rng(derive_seed(spec_seed, f"cluster-center:{index}"))
            center = rng.standard_normal(dimension)
        else:
            try:
                center = np.array([float(v) for v in center_text.split(",")])
            except ValueError as exc:
                raise InputError(f"cluster {index}: bad center {center_text!r}") from exc
        clusters.append(ClusterSpec(center=center, kappa=kappa, count=count, gender=gender))
    return PopulationSpec(
        dimension=dimension,
        clusters=tuple(clusters),
        utterance_noise=utterance_noise,
        seed=spec_seed,
        utterances_per_identity=utterances,
    )


def _simulation_targets(settings: Settings) -> dict[Gender, int]:
    targets = {}
    male = settings.get("target-male", None, int)
    female = settings.get("target-female", None, int)
    if male is None and "target_male" in settings.config:
        male = int(settings.config["target_male"])
    if female is None and "target_female" in settings.config:
        female = int(settings.config["target_female"])
    if male is not None:
        targets[Gender.MALE] = male
    if female is not None:
        targets[Gender.FEMALE] = female
    if not targets:
        raise InputError("simulate needs target-male/target-female settings")
    return targets


def _parse_seeds(text: str) -> list[int]:
    try:
        return [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError as exc:
        raise InputError(f"bad seed list {text!r}") from exc


_COMMANDS = {
    "expand": cmd_expand,
    "plan": cmd_plan,
    "interpolate": cmd_interpolate,
    "diagnose": cmd_diagnose,
    "simulate": cmd_simulate,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except PipelineError as exc:
        print(f"{exc.category}: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"IO: {exc}", file=sys.stderr)
        return 4
    except (ValueError, KeyError) as exc:
        print(f"INPUT: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
