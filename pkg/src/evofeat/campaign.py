"""Multi-run experiment campaigns: evolve, compare against baselines, persist.

A campaign runs the evolutionary search once per seed, tests the best
individual with every testing model, and scores dimension-matched baseline
transforms plus the raw features under the same models. Every run leaves a
self-contained archive directory; aggregate tables feed the stats module.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .baselines import LinearAutoencoder, LinearPCA, SelfOrganizingMap
from .datasets import (
    Dataset,
    load_csv,
    save_split_manifest,
    split as split_dataset,
    synth_interaction,
)
from .evolution import (
    EvolutionConfig,
    GenerationRecord,
    RunResult,
    run_evolution,
    score_transformed,
    test_best,
)
from .exceptions import (
    ConfigInvalidError,
    EvofeatError,
    NoCompletedRunsError,
    UnknownTesterError,
)
from .expressions import complexity_report, parse_program, render_program
from .grammar import default_grammar, parse_grammar
from .models import TESTER_KINDS
from .stats import comparison_report

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

BASELINE_KINDS = ("pca", "som", "autoencoder")
RAW_METHOD = "raw"
EVOLVED_METHOD = "evolved"


@dataclass
class ExperimentConfig:
    output_dir: str = "campaign_out"
    runs: int = 30
    base_seed: int = 0
    dataset_path: str | None = None
    label_column: str = "label"
    synthetic: str | None = None
    synthetic_n: int = 600
    synthetic_noise: float = 0.05
    grammar_path: str | None = None
    max_features: int = 60
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    testing_models: list[str] = field(default_factory=lambda: list(TESTER_KINDS))
    baselines: list[str] = field(default_factory=lambda: list(BASELINE_KINDS))
    external_embeddings: dict[str, str] = field(default_factory=dict)

    def validate(self):
        if self.runs < 1:
            raise ConfigInvalidError("runs must be >= 1")
        if self.dataset_path is None and self.synthetic is None:
            raise ConfigInvalidError(
                "configure either dataset.path or dataset.synthetic")
        if self.dataset_path is not None and not Path(self.dataset_path).exists():
            raise ConfigInvalidError(f"dataset file not found: {self.dataset_path}")
        if self.synthetic is not None and self.synthetic != "interaction":
            raise ConfigInvalidError(
                f"unknown synthetic dataset {self.synthetic!r}")
        if self.grammar_path is not None and not Path(self.grammar_path).exists():
            raise ConfigInvalidError(f"grammar file not found: {self.grammar_path}")
        for name in self.testing_models:
            if name not in TESTER_KINDS:
                raise ConfigInvalidError(f"unknown testing model {name!r}")
        for name in self.baselines:
            if name not in BASELINE_KINDS:
                raise ConfigInvalidError(f"unknown baseline {name!r}")
        for name, path in self.external_embeddings.items():
            if not Path(path).exists():
                raise ConfigInvalidError(
                    f"external embedding {name!r} file not found: {path}")
        self.evolution.validate()

    def to_json(self) -> dict:
        payload = dataclasses.asdict(self)
        return payload


def load_experiment_config(path) -> ExperimentConfig:
    """Read the TOML experiment file into an ExperimentConfig."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    cfg = ExperimentConfig()
    for key in ("output_dir", "runs", "base_seed"):
        if key in raw:
            setattr(cfg, key, raw[key])
    dataset = raw.get("dataset", {})
    cfg.dataset_path = dataset.get("path")
    cfg.label_column = dataset.get("label_column", cfg.label_column)
    cfg.synthetic = dataset.get("synthetic")
    cfg.synthetic_n = dataset.get("n", cfg.synthetic_n)
    cfg.synthetic_noise = dataset.get("noise_rate", cfg.synthetic_noise)
    grammar = raw.get("grammar", {})
    cfg.grammar_path = grammar.get("path")
    cfg.max_features = grammar.get("max_features", cfg.max_features)
    evolution = raw.get("evolution", {})
    known = {f.name for f in dataclasses.fields(EvolutionConfig)}
    unknown = set(evolution) - known
    if unknown:
        raise ConfigInvalidError(f"unknown evolution settings: {sorted(unknown)}")
    cfg.evolution = EvolutionConfig(**evolution)
    comparison = raw.get("comparison", {})
    cfg.testing_models = list(comparison.get("testing_models", cfg.testing_models))
    cfg.baselines = list(comparison.get("baselines", cfg.baselines))
    cfg.external_embeddings = dict(comparison.get("external_embeddings", {}))
    return cfg


@dataclass
class ComparisonRow:
    run: int
    method: str
    tester: str
    balanced_accuracy: float | None
    error: str = ""


@dataclass
class CampaignResult:
    config: ExperimentConfig
    methods: list[str]
    run_results: list[RunResult | None]
    run_errors: list[str]
    rows: list[ComparisonRow]

    @property
    def completed_runs(self) -> list[int]:
        return [i for i, r in enumerate(self.run_results) if r is not None]


def _seed_for(base_seed: int, run: int, tag: str) -> int:
    import hashlib

    digest = hashlib.blake2b(f"{base_seed}:{run}:{tag}".encode(),
                             digest_size=8).digest()
    return int.from_bytes(digest, "big") % (2 ** 63)


def load_dataset(config: ExperimentConfig) -> Dataset:
    if config.dataset_path is not None:
        return load_csv(config.dataset_path, config.label_column)
    return synth_interaction(config.synthetic_n, config.synthetic_noise,
                             seed=config.base_seed)


def load_external_embedding(path, n_rows: int) -> np.ndarray:
    """Numeric CSV (optional header) holding one embedding row per dataset row."""
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [row for row in csv.reader(fh) if row]
    if not rows:
        raise ConfigInvalidError(f"external embedding {path} is empty")
    try:
        float(rows[0][0])
        start = 0
    except ValueError:
        start = 1
    data = np.array([[float(cell) for cell in row] for row in rows[start:]],
                    dtype=np.float64)
    if data.shape[0] != n_rows:
        raise ConfigInvalidError(
            f"external embedding {path} has {data.shape[0]} rows, "
            f"dataset has {n_rows}")
    return data


def _make_baseline(kind: str, k: int, seed: int):
    if kind == "pca":
        return LinearPCA(n_components=k)
    if kind == "som":
        return SelfOrganizingMap(n_units=k, random_state=seed)
    if kind == "autoencoder":
        return LinearAutoencoder(code_size=k, random_state=seed)
    raise ConfigInvalidError(f"unknown baseline {kind!r}")


def _rows_for_failure(run: int, method: str, testers, error: str):
    return [ComparisonRow(run, method, t, None, error) for t in testers]


def run_campaign(config: ExperimentConfig, progress: bool = False) -> CampaignResult:
    """Execute every run, writing archives and tables incrementally."""
    config.validate()
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    dataset = load_dataset(config)
    if config.grammar_path is not None:
        grammar = parse_grammar(Path(config.grammar_path).read_text(encoding="utf-8"))
    else:
        grammar = default_grammar(dataset.n_columns, config.max_features)
    externals = {
        name: load_external_embedding(path, dataset.n_rows)
        for name, path in config.external_embeddings.items()
    }
    methods = ([RAW_METHOD, EVOLVED_METHOD] + list(config.baselines)
               + list(externals.keys()))
    testers = list(config.testing_models)

    result = CampaignResult(config=config, methods=methods,
                            run_results=[None] * config.runs,
                            run_errors=[""] * config.runs, rows=[])
    started = time.perf_counter()
    for run in range(config.runs):
        run_seed = config.base_seed + run
        run_dir = out / f"run_{run:03d}"
        run_dir.mkdir(exist_ok=True)
        split = split_dataset(dataset, seed=run_seed)
        save_split_manifest(split, run_dir / "split.json")

        evo_config = dataclasses.replace(config.evolution, seed=run_seed)
        (run_dir / "config.json").write_text(
            json.dumps(dataclasses.asdict(evo_config), indent=2), encoding="utf-8")
        try:
            run_result = run_evolution(evo_config, grammar, split)
        except EvofeatError as exc:
            result.run_errors[run] = f"{type(exc).__name__}: {exc}"
            result.rows.extend(
                row for method in methods
                for row in _rows_for_failure(run, method, testers,
                                             result.run_errors[run]))
            _write_comparison(result.rows, out / "comparison.csv")
            continue

        result.run_results[run] = run_result
        _write_history(run_result.history, run_dir / "history.csv")
        (run_dir / "best_phenotype.txt").write_text(
            render_program(run_result.best.program) + "\n", encoding="utf-8")

        raw_scores = score_transformed(
            split.train.features, split.validation.features, split.test.features,
            split, testers, seed=_seed_for(config.base_seed, run, "raw"))
        result.rows.extend(ComparisonRow(run, RAW_METHOD, t, s)
                           for t, s in raw_scores.items())

        evolved_scores = test_best(run_result.best, split, testers,
                                   seed=_seed_for(config.base_seed, run, "evolved"))
        result.rows.extend(ComparisonRow(run, EVOLVED_METHOD, t, s)
                           for t, s in evolved_scores.items())

        k = run_result.best.n_features
        fit_features = np.vstack([split.train.features,
                                  split.validation.features])
        for kind in config.baselines:
            try:
                transformer = _make_baseline(
                    kind, k, seed=_seed_for(config.base_seed, run, kind))
                transformer.fit(fit_features)
                scores = score_transformed(
                    transformer.transform(split.train.features),
                    transformer.transform(split.validation.features),
                    transformer.transform(split.test.features),
                    split, testers, seed=_seed_for(config.base_seed, run, kind))
            except EvofeatError as exc:
                result.rows.extend(_rows_for_failure(
                    run, kind, testers, f"{type(exc).__name__}: {exc}"))
                continue
            result.rows.extend(ComparisonRow(run, kind, t, s)
                               for t, s in scores.items())

        for name, embedding in externals.items():
            try:
                scores = score_transformed(
                    embedding[split.train_indices],
                    embedding[split.validation_indices],
                    embedding[split.test_indices],
                    split, testers, seed=_seed_for(config.base_seed, run, name))
            except EvofeatError as exc:
                result.rows.extend(_rows_for_failure(
                    run, name, testers, f"{type(exc).__name__}: {exc}"))
                continue
            result.rows.extend(ComparisonRow(run, name, t, s)
                               for t, s in scores.items())

        _write_comparison(result.rows, out / "comparison.csv")
        if progress:
            best = run_result.best
            print(f"run {run}: best fitness {best.fitness:.4f} "
                  f"with {best.n_features} features", flush=True)

    campaign_meta = {
        "config": config.to_json(),
        "methods": methods,
        "testers": testers,
        "run_errors": result.run_errors,
        "elapsed_seconds": time.perf_counter() - started,
    }
    (out / "campaign.json").write_text(json.dumps(campaign_meta, indent=2),
                                       encoding="utf-8")
    _write_comparison(result.rows, out / "comparison.csv")
    return result


# --------------------------------------------------------------------------
# persistence helpers
# --------------------------------------------------------------------------

_HISTORY_FIELDS = ("generation", "best_fitness", "mean_fitness",
                   "mean_feature_count", "best_feature_count",
                   "min_feature_count", "max_feature_count")


def _write_history(history, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(_HISTORY_FIELDS)
        for record in history:
            writer.writerow([repr(getattr(record, f)) if isinstance(
                getattr(record, f), float) else getattr(record, f)
                for f in _HISTORY_FIELDS])


def _read_history(path) -> list[GenerationRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        records = []
        for row in reader:
            records.append(GenerationRecord(
                generation=int(row["generation"]),
                best_fitness=float(row["best_fitness"]),
                mean_fitness=float(row["mean_fitness"]),
                mean_feature_count=float(row["mean_feature_count"]),
                best_feature_count=int(row["best_feature_count"]),
                min_feature_count=int(row["min_feature_count"]),
                max_feature_count=int(row["max_feature_count"]),
            ))
    return records


def _write_comparison(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["run", "method", "tester", "balanced_accuracy", "error"])
        for row in rows:
            value = "" if row.balanced_accuracy is None else repr(row.balanced_accuracy)
            writer.writerow([row.run, row.method, row.tester, value, row.error])


def read_comparison(path) -> list[ComparisonRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        rows = []
        for raw in reader:
            value = raw["balanced_accuracy"]
            rows.append(ComparisonRow(
                run=int(raw["run"]),
                method=raw["method"],
                tester=raw["tester"],
                balanced_accuracy=float(value) if value else None,
                error=raw.get("error", ""),
            ))
    return rows


# --------------------------------------------------------------------------
# summaries
# --------------------------------------------------------------------------

def _write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(v) if isinstance(v, float) else v for v in row])


def emit_summary(campaign_dir, out_dir=None, plots: bool = False) -> list[Path]:
    """Write the five aggregate tables (and optional SVG plots) for a campaign.

    Reads the run archives under ``campaign_dir``; raises NoCompletedRunsError
    when every run failed.
    """
    campaign_dir = Path(campaign_dir)
    out_dir = Path(out_dir) if out_dir is not None else campaign_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    run_dirs = sorted(p for p in campaign_dir.glob("run_*") if p.is_dir())
    histories = {}
    phenotypes = {}
    for run_dir in run_dirs:
        history_path = run_dir / "history.csv"
        if not history_path.exists():
            continue
        run = int(run_dir.name.split("_")[1])
        histories[run] = _read_history(history_path)
        phenotypes[run] = (run_dir / "best_phenotype.txt").read_text(
            encoding="utf-8").strip()
    if not histories:
        raise NoCompletedRunsError(f"no completed runs under {campaign_dir}")

    written = []
    n_generations = max(len(h) for h in histories.values())
    curve_rows = []
    feature_rows = []
    for g in range(n_generations):
        recs = [h[g] for h in histories.values() if g < len(h)]
        curve_rows.append([g,
                           float(np.mean([r.mean_fitness for r in recs])),
                           float(np.mean([r.best_fitness for r in recs]))])
        feature_rows.append([g,
                             float(np.mean([r.mean_feature_count for r in recs])),
                             float(np.mean([r.best_feature_count for r in recs])),
                             float(np.mean([r.min_feature_count for r in recs])),
                             float(np.mean([r.max_feature_count for r in recs]))])
    path = out_dir / "fitness_curves.csv"
    _write_csv(path, ["generation", "population_fitness", "best_fitness"],
               curve_rows)
    written.append(path)
    path = out_dir / "feature_evolution.csv"
    _write_csv(path, ["generation", "population", "best", "minimum", "maximum"],
               feature_rows)
    written.append(path)

    ratio_rows = []
    count_rows = []
    for run in sorted(histories):
        program = parse_program(phenotypes[run])
        report = complexity_report(program)
        ratio_rows.append([run, report.r_o, report.r_e, report.r_c])
        count_rows.append([run, report.n_total])
    path = out_dir / "complexity_ratios.csv"
    _write_csv(path, ["run", "r_o", "r_e", "r_c"], ratio_rows)
    written.append(path)
    path = out_dir / "feature_counts.csv"
    _write_csv(path, ["run", "n_features"], count_rows)
    written.append(path)

    comparison_src = campaign_dir / "comparison.csv"
    comparison_dst = out_dir / "comparison.csv"
    if comparison_src.exists() and comparison_src != comparison_dst:
        comparison_dst.write_bytes(comparison_src.read_bytes())
    if comparison_dst.exists():
        written.append(comparison_dst)

    if plots:
        written.extend(_render_plots(out_dir, curve_rows, feature_rows,
                                     ratio_rows, count_rows))
    return written


def _render_plots(out_dir, curve_rows, feature_rows, ratio_rows, count_rows):
    try:
        import matplotlib
        matplotlib.use("svg")
        import matplotlib.pyplot as plt
    except ImportError:
        print("matplotlib not installed; skipping SVG plots", file=sys.stderr)
        return []
    written = []

    def save(fig, name):
        path = out_dir / name
        fig.savefig(path)
        plt.close(fig)
        written.append(path)

    gens = [r[0] for r in curve_rows]
    fig, ax = plt.subplots()
    ax.plot(gens, [r[1] for r in curve_rows], label="population")
    ax.plot(gens, [r[2] for r in curve_rows], label="best")
    ax.set_xlabel("generation")
    ax.set_ylabel("1 - balanced accuracy")
    ax.legend()
    save(fig, "fitness_curves.svg")

    fig, ax = plt.subplots()
    for idx, label in ((1, "population"), (2, "best"), (3, "minimum"),
                       (4, "maximum")):
        ax.plot(gens, [r[idx] for r in feature_rows], label=label)
    ax.set_xlabel("generation")
    ax.set_ylabel("features")
    ax.legend()
    save(fig, "feature_evolution.svg")

    fig, ax = plt.subplots()
    runs = [r[0] for r in ratio_rows]
    bottom = np.zeros(len(runs))
    for idx, label in ((1, "original"), (2, "engineered"), (3, "complex")):
        vals = np.array([r[idx] for r in ratio_rows])
        ax.bar(runs, vals, bottom=bottom, label=label)
        bottom += vals
    ax.set_xlabel("run")
    ax.set_ylabel("ratio")
    ax.legend()
    save(fig, "complexity_ratios.svg")

    fig, ax = plt.subplots()
    ax.bar([r[0] for r in count_rows], [r[1] for r in count_rows])
    ax.set_xlabel("run")
    ax.set_ylabel("features of best individual")
    save(fig, "feature_counts.svg")
    return written


# --------------------------------------------------------------------------
# statistics entry point
# --------------------------------------------------------------------------

_PROXY_DEFAULT_TESTER = {
    "decision_tree": "decision_tree",
    "random_forest": "random_forest",
    "gradient_boosting": "gradient_boosting",
}


def stats_command(comparison_csv, tester: str | None = None,
                  alpha: float = 0.05, out_dir=None):
    """Filter the comparison table to one tester and run the full battery.

    When ``tester`` is omitted, the campaign metadata next to the CSV decides:
    the tester matching the run's proxy model.
    """
    comparison_csv = Path(comparison_csv)
    rows = read_comparison(comparison_csv)
    if not rows:
        raise NoCompletedRunsError(f"{comparison_csv} holds no rows")
    testers = []
    for row in rows:
        if row.tester not in testers:
            testers.append(row.tester)
    if tester is None:
        meta_path = comparison_csv.parent / "campaign.json"
        if not meta_path.exists():
            raise UnknownTesterError(
                "no --tester given and no campaign.json found to infer one")
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
        proxy = meta["config"]["evolution"]["proxy"]
        tester = _PROXY_DEFAULT_TESTER.get(proxy, proxy)
    if tester not in testers:
        raise UnknownTesterError(
            f"tester {tester!r} not present; comparison holds {testers}")

    groups: dict[str, list[float]] = {}
    for row in rows:
        if row.tester != tester or row.balanced_accuracy is None:
            continue
        groups.setdefault(row.method, []).append(row.balanced_accuracy)
    groups = {name: vals for name, vals in groups.items() if vals}
    if len(groups) < 2:
        raise NoCompletedRunsError(
            f"fewer than 2 methods have scores for tester {tester!r}")

    report = comparison_report(groups, alpha=alpha)
    out_dir = Path(out_dir) if out_dir is not None else comparison_csv.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_csv(out_dir / "kruskal.csv",
               ["tester", "h", "p_value", "degenerate"],
               [[tester, report.kruskal.h, report.kruskal.p_value,
                 report.kruskal.degenerate]])
    (out_dir / "dunn_effects.txt").write_text(report.render_text(title=tester),
                                              encoding="utf-8")
    return report
