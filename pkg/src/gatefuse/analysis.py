"""Diagnostics on trained gates: linguistic-to-visual weight ratios,
concreteness contrasts, and the training-data-size ablation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .benchmark import SimilarityBenchmark, evaluate, spearman
from .embeddings import EmbeddingTable
from .errors import GatefuseError, LoadError
from .gates import (
    CATEGORY,
    FusionInputs,
    GateModel,
    build_fused_table,
    compute_gates,
    initialize_gate_model,
)
from .training import AssociationPairSet, TrainConfig, train

log = logging.getLogger(__name__)


def load_concreteness(path) -> dict[str, float]:
    """Read ``word<TAB>rating``; higher ratings mean more concrete."""
    ratings: dict[str, float] = {}
    dup = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2:
                raise LoadError(f"{path}: line {lineno}: expected word<TAB>rating")
            try:
                rating = float(parts[1])
            except ValueError:
                raise LoadError(f"{path}: line {lineno}: bad rating {parts[1]!r}") from None
            if not math.isfinite(rating):
                raise LoadError(f"{path}: line {lineno}: non-finite rating")
            if parts[0] in ratings:
                dup += 1
                continue
            ratings[parts[0]] = rating
    if dup:
        log.warning("%s: ignored %d duplicate ratings", path, dup)
    return ratings


def weight_ratio(
    model: GateModel,
    word: str,
    L_i: np.ndarray,
    P_i: np.ndarray,
    supersense: str | None = None,
) -> float:
    """Linguistic-to-visual gate magnitude for one word.

    Value gates compare absolute values, vector gates l2-norms. A zero
    visual gate makes the ratio infinite; callers exclude those from means.
    """
    g_L, g_P = compute_gates(model, L_i, P_i, supersense)
    num = float(np.linalg.norm(g_L))
    den = float(np.linalg.norm(g_P))
    if den == 0.0:
        return math.inf
    return num / den


def quartile_split(
    conc: dict[str, float],
    vocab: set[str],
    seed: int = 0,
    sample_size: int | None = None,
) -> tuple[list[str], list[str]]:
    """(concrete, abstract) word lists from the rating quartiles.

    Words are ordered by (rating, word); the bottom quartile is abstract,
    the top quartile concrete, each of size floor(n/4). Optional seeded
    subsampling draws `sample_size` words from each quartile.
    """
    rated = sorted((w for w in conc if w in vocab), key=lambda w: (conc[w], w))
    n = len(rated)
    if n < 4:
        raise GatefuseError(f"need at least 4 rated in-vocabulary words, have {n}")
    q = n // 4
    abstract = rated[:q]
    concrete = rated[-q:]
    if sample_size is not None:
        rng = np.random.default_rng(seed)
        if sample_size < len(concrete):
            concrete = [concrete[i] for i in np.sort(rng.choice(q, sample_size, replace=False))]
        if sample_size < len(abstract):
            abstract = [abstract[i] for i in np.sort(rng.choice(q, sample_size, replace=False))]
    return concrete, abstract


@dataclass
class RatioReport:
    word_ratios: dict[str, float]
    concrete_mean: float
    abstract_mean: float
    n_infinite: int
    correlation: float
    correlation_defined: bool
    top: list[tuple[str, float]]
    bottom: list[tuple[str, float]]
    per_category: dict[str, float] | None
    concreteness: dict[str, float] = field(repr=False, default_factory=dict)

    def to_text(self) -> str:
        lines = [
            f"concrete_mean_ratio\t{self.concrete_mean:.6f}",
            f"abstract_mean_ratio\t{self.abstract_mean:.6f}",
            "concreteness_spearman\t"
            + (f"{self.correlation:.6f}" if self.correlation_defined else "NA"),
            f"excluded_infinite\t{self.n_infinite}",
            "top_ratio_words\t" + " ".join(w for w, _ in self.top),
            "bottom_ratio_words\t" + " ".join(w for w, _ in self.bottom),
        ]
        if self.per_category is not None:
            for sense in sorted(self.per_category):
                lines.append(f"category_ratio\t{sense}\t{self.per_category[sense]:.6f}")
        lines.append("")
        for word, ratio in sorted(
            self.word_ratios.items(), key=lambda kv: (-kv[1], kv[0])
        ):
            shown = "inf" if math.isinf(ratio) else f"{ratio:.6f}"
            lines.append(f"{word}\t{shown}\t{self.concreteness[word]:.6g}")
        return "\n".join(lines) + "\n"


def _finite_mean(values: list[float]) -> float:
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return math.nan
    return float(np.mean(finite))


def ratio_report(
    model: GateModel,
    ling: EmbeddingTable,
    predicted_visual: EmbeddingTable,
    conc: dict[str, float],
    supersense_map: dict[str, str] | None = None,
    k: int = 10,
) -> RatioReport:
    """Weight-ratio diagnostics over every rated in-vocabulary word.

    Reports mean ratios over the concrete and abstract rating quartiles
    (infinite ratios excluded and counted), the Spearman correlation of
    ratio against concreteness, the k highest- and lowest-ratio words, and
    per-category ratios for category gates.
    """
    inputs = FusionInputs(ling, predicted_visual, supersense_map)
    rated = [w for w in inputs.words if w in conc]
    if not rated:
        raise GatefuseError("no rated words in the vocabulary")
    ratios: dict[str, float] = {}
    for w in rated:
        L_i, P_i, sense = inputs.row(w)
        ratios[w] = weight_ratio(model, w, L_i, P_i, sense)
    n_inf = sum(1 for r in ratios.values() if math.isinf(r))

    concrete, abstract = quartile_split(conc, set(rated))
    concrete_mean = _finite_mean([ratios[w] for w in concrete])
    abstract_mean = _finite_mean([ratios[w] for w in abstract])

    # ranks handle infinities fine, so the correlation keeps every word
    rho, defined = spearman([conc[w] for w in rated], [ratios[w] for w in rated])

    by_ratio = sorted(ratios.items(), key=lambda kv: (-kv[1], kv[0]))
    k = min(k, len(by_ratio))
    top = by_ratio[:k]
    bottom = sorted(by_ratio[-k:], key=lambda kv: (kv[1], kv[0]))

    per_category = None
    if model.kind == CATEGORY:
        per_category = {}
        for sense in model.senses():
            g_L = model.params[f"g_L[{sense}]"]
            g_P = model.params[f"g_P[{sense}]"]
            den = float(np.linalg.norm(g_P))
            per_category[sense] = (
                math.inf if den == 0.0 else float(np.linalg.norm(g_L)) / den
            )

    return RatioReport(
        word_ratios=ratios,
        concrete_mean=concrete_mean,
        abstract_mean=abstract_mean,
        n_infinite=n_inf,
        correlation=rho,
        correlation_defined=defined,
        top=top,
        bottom=bottom,
        per_category=per_category,
        concreteness={w: conc[w] for w in rated},
    )


@dataclass
class AblationSetup:
    """Everything a single train-and-evaluate run needs."""

    gate_kind: str
    gate_form: str
    train_set: AssociationPairSet
    dev_set: AssociationPairSet
    ling: EmbeddingTable
    predicted: EmbeddingTable
    benchmarks: list[SimilarityBenchmark]
    visual_vocab: set[str]
    config: TrainConfig
    supersense_map: dict[str, str] | None = None
    init_seed: int = 0


def run_pipeline(setup: AblationSetup, train_set: AssociationPairSet | None = None) -> float:
    """Train one gate model and return its mean benchmark rho (ALL region)."""
    pairs = train_set if train_set is not None else setup.train_set
    senses = sorted(set(setup.supersense_map.values())) if setup.supersense_map else ()
    model = initialize_gate_model(
        setup.gate_kind,
        setup.gate_form,
        setup.ling.dimension,
        senses=senses,
        seed=setup.init_seed,
    )
    best, _ = train(
        model,
        pairs,
        setup.dev_set,
        setup.ling,
        setup.predicted,
        setup.config,
        setup.supersense_map,
    )
    fused = build_fused_table(setup.ling, setup.predicted, best, setup.supersense_map)
    rhos = []
    for bench in setup.benchmarks:
        for result in evaluate(fused, bench, setup.visual_vocab):
            if result.region == "ALL" and result.defined:
                rhos.append(result.rho)
    if not rhos:
        raise GatefuseError("no benchmark produced a defined score")
    return float(np.mean(rhos))


def data_size_ablation(
    fractions,
    setup: AblationSetup,
) -> list[tuple[float, float]]:
    """Mean benchmark rho after training on seeded subsamples of the pairs.

    Subsampled indices keep their original order, so fraction 1.0 is exactly
    the unsubsampled run. A fraction that yields fewer pairs than one batch
    is an error.
    """
    n = len(setup.train_set.pairs)
    rows = []
    for fraction in fractions:
        if not 0.0 < fraction <= 1.0:
            raise GatefuseError(f"fraction {fraction} outside (0, 1]")
        k = round(fraction * n)
        if k < setup.config.batch_size:
            raise GatefuseError(
                f"fraction {fraction} keeps {k} pairs, fewer than one batch "
                f"of {setup.config.batch_size}"
            )
        rng = np.random.default_rng(
            np.random.SeedSequence(setup.config.seed, spawn_key=(7001,))
        )
        keep = np.sort(rng.choice(n, size=k, replace=False))
        subset = AssociationPairSet([setup.train_set.pairs[i] for i in keep], "train")
        rows.append((float(fraction), run_pipeline(setup, subset)))
    return rows
