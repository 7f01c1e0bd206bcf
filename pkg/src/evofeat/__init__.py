"""Grammar-based evolutionary feature construction and selection.

The package evolves lists of algebraic feature expressions through a
structured genotype over a BNF grammar, scores them by the validation error
of a tree-based proxy classifier, and compares the winners against
dimension-matched PCA/SOM/autoencoder baselines with nonparametric
statistics.
"""

from .baselines import LinearAutoencoder, LinearPCA, SelfOrganizingMap
from .campaign import (
    CampaignResult,
    ExperimentConfig,
    emit_summary,
    load_experiment_config,
    run_campaign,
    stats_command,
)
from .datasets import Dataset, SplitDataset, load_csv, split, synth_interaction
from .evolution import (
    EvolutionConfig,
    FeatureEvolver,
    Individual,
    RunResult,
    evaluate_individual,
    run_evolution,
    test_best,
)
from .expressions import (
    BinOp,
    ComplexityReport,
    FeatureClass,
    FeatureProgram,
    Var,
    classify,
    complexity_report,
    evaluate,
    parse_expr,
    parse_program,
    render,
    render_program,
)
from .grammar import (
    Genotype,
    Grammar,
    crossover,
    default_grammar,
    map_genotype,
    mutate,
    parse_grammar,
    random_genotype,
    serialize_grammar,
)
from .models import (
    DecisionTreeClassifier,
    GradientBoostingClassifier,
    MLPClassifier,
    RandomForestClassifier,
    balanced_accuracy,
)
from .stats import (
    EffectSize,
    KruskalResult,
    cliffs_delta,
    comparison_report,
    dunn_posthoc,
    kruskal_wallis,
)

__version__ = "0.1.0"

__all__ = [
    "BinOp",
    "CampaignResult",
    "ComplexityReport",
    "Dataset",
    "DecisionTreeClassifier",
    "EffectSize",
    "EvolutionConfig",
    "ExperimentConfig",
    "FeatureClass",
    "FeatureEvolver",
    "FeatureProgram",
    "Genotype",
    "GradientBoostingClassifier",
    "Grammar",
    "Individual",
    "KruskalResult",
    "LinearAutoencoder",
    "LinearPCA",
    "MLPClassifier",
    "RandomForestClassifier",
    "RunResult",
    "SelfOrganizingMap",
    "SplitDataset",
    "Var",
    "balanced_accuracy",
    "classify",
    "cliffs_delta",
    "comparison_report",
    "complexity_report",
    "crossover",
    "default_grammar",
    "dunn_posthoc",
    "emit_summary",
    "evaluate",
    "evaluate_individual",
    "kruskal_wallis",
    "load_csv",
    "load_experiment_config",
    "map_genotype",
    "mutate",
    "parse_expr",
    "parse_grammar",
    "parse_program",
    "random_genotype",
    "render",
    "render_program",
    "run_campaign",
    "run_evolution",
    "serialize_grammar",
    "split",
    "stats_command",
    "synth_interaction",
    "test_best",
]
