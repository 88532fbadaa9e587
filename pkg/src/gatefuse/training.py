"""Gate training on word-association pairs with a max-margin objective.

For an associated pair (w1, w2) and two sampled negatives (n1, n2) the loss
is

    max(0, margin - M_w1.M_w2 + M_w1.M_n1)
  + max(0, margin - M_w1.M_w2 + M_w2.M_n2)

over fused vectors M. Only the gate parameters train; the embeddings stay
frozen. Optimization is Adagrad over seeded shuffled mini-batches, with
model selection by Spearman correlation on a held-out development split.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .benchmark import cosine, spearman
from .embeddings import EmbeddingTable
from .errors import GatefuseError, LoadError
from .gates import CATEGORY, MODALITY, VALUE, FusionInputs, GateModel

log = logging.getLogger(__name__)

# One negative is drawn per hinge term, two per pair.
NEGATIVES_PER_TERM = 1


@dataclass
class AssociationPairSet:
    """Cue/target pairs with association scores, tagged train or dev."""

    pairs: list[tuple[str, str, float]]
    split: str

    def words(self) -> set[str]:
        return {w for c, t, _ in self.pairs for w in (c, t)}

    def __len__(self) -> int:
        return len(self.pairs)


@dataclass
class TrainConfig:
    learning_rates: tuple[float, ...] = (0.05, 0.01, 0.5, 0.1)
    batch_size: int = 25
    epochs: int = 5
    margin: float = 1.0
    seed: int = 0
    adagrad_epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rates or any(lr <= 0 for lr in self.learning_rates):
            raise GatefuseError("learning rates must be positive")
        if self.batch_size < 1:
            raise GatefuseError("batch size must be positive")
        if self.epochs < 0:
            raise GatefuseError("epochs must be nonnegative")
        if self.margin <= 0:
            raise GatefuseError("margin must be positive")
        if self.adagrad_epsilon <= 0:
            raise GatefuseError("adagrad epsilon must be positive")


@dataclass
class AdagradState:
    """Per-parameter accumulated squared gradients."""

    accumulators: dict[str, np.ndarray]

    @classmethod
    def for_model(cls, model: GateModel) -> "AdagradState":
        return cls({k: np.zeros_like(v) for k, v in model.params.items()})

    def update(
        self,
        params: dict[str, np.ndarray],
        grads: dict[str, np.ndarray],
        lr: float,
        eps: float,
    ) -> None:
        for name, g in grads.items():
            acc = self.accumulators[name]
            acc += g * g
            params[name] -= lr * g / np.sqrt(acc + eps)


def parse_pairs_file(path) -> list[tuple[str, str, float]]:
    """Read ``cue<TAB>target<TAB>score`` lines."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise LoadError(f"{path}: line {lineno}: expected 3 tab-separated fields")
            try:
                score = float(parts[2])
            except ValueError:
                raise LoadError(f"{path}: line {lineno}: bad score {parts[2]!r}") from None
            pairs.append((parts[0], parts[1], score))
    return pairs


def split_pairs(
    pairs: list[tuple[str, str, float]],
    score_threshold: float,
    benchmark_vocab: set[str],
    ling_vocab: set[str],
) -> tuple[AssociationPairSet, AssociationPairSet]:
    """Train/dev split.

    Train keeps pairs with score >= threshold, both words in the linguistic
    vocabulary, and neither word in any evaluation benchmark (leakage
    guard). Every other in-vocabulary pair goes to dev with its score.
    """
    train, dev = [], []
    for cue, target, score in pairs:
        if cue not in ling_vocab or target not in ling_vocab:
            continue
        if (
            score >= score_threshold
            and cue not in benchmark_vocab
            and target not in benchmark_vocab
        ):
            train.append((cue, target, score))
        else:
            dev.append((cue, target, score))
    if not train:
        raise GatefuseError("no training pairs survive filtering")
    return AssociationPairSet(train, "train"), AssociationPairSet(dev, "dev")


def load_pairs(
    path,
    score_threshold: float,
    benchmark_vocab: set[str],
    ling_vocab: set[str],
) -> tuple[AssociationPairSet, AssociationPairSet]:
    return split_pairs(parse_pairs_file(path), score_threshold, benchmark_vocab, ling_vocab)


def pair_loss(
    M_w1: np.ndarray,
    M_w2: np.ndarray,
    M_n1: np.ndarray,
    M_n2: np.ndarray,
    margin: float = 1.0,
) -> float:
    """Two-hinge max-margin loss on fused vectors."""
    vecs = [np.asarray(v, dtype=float) for v in (M_w1, M_w2, M_n1, M_n2)]
    if len({v.shape for v in vecs}) != 1:
        raise GatefuseError("fused vectors must share one dimension")
    m1, m2, n1, n2 = vecs
    s12 = float(m1 @ m2)
    t1 = margin - s12 + float(m1 @ n1)
    t2 = margin - s12 + float(m2 @ n2)
    return max(0.0, t1) + max(0.0, t2)


def sample_negatives(
    pair: tuple[str, str],
    pool: list[str],
    rng: np.random.Generator,
) -> tuple[str, str]:
    """Two independent uniform draws from the pool, excluding both pair words."""
    w1, w2 = pair[0], pair[1]
    if len(pool) < 3:
        raise GatefuseError("negative pool too small (need at least 3 words)")
    remaining = [w for w in pool if w != w1 and w != w2]
    if not remaining:
        raise GatefuseError("negative pool contains only the pair words")
    n1 = remaining[int(rng.integers(len(remaining)))]
    n2 = remaining[int(rng.integers(len(remaining)))]
    return n1, n2


class _GateCache:
    """Fused vectors plus the intermediates needed for backprop, per word."""

    __slots__ = ("L", "P", "sense", "gL", "gP", "aL", "aP")

    def __init__(self, model: GateModel, inputs: FusionInputs, word: str):
        from .gates import compute_gates

        self.L, self.P, self.sense = inputs.row(word)
        self.gL, self.gP = compute_gates(model, self.L, self.P, self.sense)
        self.aL = self.gL * self.L
        self.aP = self.gP * self.P

    def fused_dot(self, other: "_GateCache") -> float:
        return float(self.aL @ other.aL) + float(self.aP @ other.aP)


def _route_gate_grad(
    model: GateModel,
    grads: dict[str, np.ndarray],
    cache: _GateCache,
    upstream_vec: np.ndarray,
    half: str,
) -> None:
    """Push d(loss)/d(gate) for one word occurrence into parameter space.

    `upstream_vec` is the per-dimension gradient on gate*input (length d);
    value-form gates see its sum.
    """
    gate = cache.gL if half == "L" else cache.gP
    x = cache.L if half == "L" else cache.P
    u = np.array([upstream_vec.sum()]) if model.form == VALUE else upstream_vec
    if model.kind == MODALITY:
        grads[f"g_{half}"] += u
    elif model.kind == CATEGORY:
        sense = model.resolve_sense(cache.sense)
        grads[f"g_{half}[{sense}]"] += u
    else:
        dz = u * (1.0 - gate * gate)
        if model.form == VALUE:
            grads[f"W_{half}"] += dz[0] * x
        else:
            grads[f"W_{half}"] += np.outer(dz, x)
        grads[f"b_{half}"] += dz


def gradients(
    model: GateModel,
    batch: list[tuple[str, str, str, str]],
    inputs: FusionInputs,
    margin: float = 1.0,
) -> tuple[float, dict[str, np.ndarray]]:
    """Summed loss and exact subgradients over one batch of (w1, w2, n1, n2).

    The hinge subgradient is taken as 0 exactly at the kink. Accumulation
    order is the batch order, so results are deterministic.
    """
    if not batch:
        raise GatefuseError("empty batch")
    grads = {k: np.zeros_like(v) for k, v in model.params.items()}
    total = 0.0
    for w1, w2, n1, n2 in batch:
        caches: dict[str, _GateCache] = {}
        for w in (w1, w2, n1, n2):
            if w not in caches:
                caches[w] = _GateCache(model, inputs, w)
        c1, c2, cn1, cn2 = caches[w1], caches[w2], caches[n1], caches[n2]
        s12 = c1.fused_dot(c2)
        t1 = margin - s12 + c1.fused_dot(cn1)
        t2 = margin - s12 + c2.fused_dot(cn2)
        total += max(0.0, t1) + max(0.0, t2)

        def add_dot(cx: _GateCache, cy: _GateCache, sign: float) -> None:
            # d(ax.ay)/d(gate_x) routed for each occurrence, both halves
            _route_gate_grad(model, grads, cx, sign * (cx.L * cy.aL), "L")
            _route_gate_grad(model, grads, cy, sign * (cy.L * cx.aL), "L")
            _route_gate_grad(model, grads, cx, sign * (cx.P * cy.aP), "P")
            _route_gate_grad(model, grads, cy, sign * (cy.P * cx.aP), "P")

        if t1 > 0.0:
            add_dot(c1, c2, -1.0)
            add_dot(c1, cn1, +1.0)
        if t2 > 0.0:
            add_dot(c1, c2, -1.0)
            add_dot(c2, cn2, +1.0)
    return total, grads


def batch_loss(
    model: GateModel,
    batch: list[tuple[str, str, str, str]],
    inputs: FusionInputs,
    margin: float = 1.0,
) -> float:
    """Summed pair loss of a batch under the current parameters."""
    total = 0.0
    for w1, w2, n1, n2 in batch:
        caches = {}
        for w in (w1, w2, n1, n2):
            if w not in caches:
                caches[w] = _GateCache(model, inputs, w)
        c1, c2 = caches[w1], caches[w2]
        s12 = c1.fused_dot(c2)
        t1 = margin - s12 + c1.fused_dot(caches[n1])
        t2 = margin - s12 + c2.fused_dot(caches[n2])
        total += max(0.0, t1) + max(0.0, t2)
    return total


def _dev_similarities(
    model: GateModel,
    dev: AssociationPairSet,
    inputs: FusionInputs,
) -> tuple[np.ndarray, np.ndarray]:
    sims, scores = [], []
    cache: dict[str, np.ndarray] = {}
    for cue, target, score in dev.pairs:
        for w in (cue, target):
            if w not in cache:
                c = _GateCache(model, inputs, w)
                cache[w] = np.concatenate([c.aL, c.aP])
        sims.append(cosine(cache[cue], cache[target]))
        scores.append(score)
    return np.array(sims), np.array(scores)


def dev_score(
    model: GateModel,
    dev: AssociationPairSet,
    ling: EmbeddingTable,
    predicted_visual: EmbeddingTable,
    supersense_map: dict[str, str] | None = None,
) -> float:
    """Spearman correlation between fused cosines and dev association scores."""
    if not dev.pairs:
        raise GatefuseError("empty dev set")
    inputs = FusionInputs(ling, predicted_visual, supersense_map)
    sims, scores = _dev_similarities(model, dev, inputs)
    rho, defined = spearman(sims, scores)
    if not defined:
        log.warning("dev similarities are constant; dev score flagged as 0")
    return rho


@dataclass
class TrainReportRow:
    lr: float
    epoch: int
    mean_loss: float
    dev_spearman: float


@dataclass
class TrainReport:
    rows: list[TrainReportRow] = field(default_factory=list)
    best_lr: float | None = None
    best_epoch: int | None = None
    best_dev: float | None = None

    def to_text(self) -> str:
        lines = [
            f"{r.epoch}\t{r.lr:g}\t{r.mean_loss:.6f}\t{r.dev_spearman:.6f}"
            for r in self.rows
        ]
        return "\n".join(lines) + ("\n" if lines else "")


def train(
    model: GateModel,
    train_set: AssociationPairSet,
    dev_set: AssociationPairSet,
    ling: EmbeddingTable,
    predicted_visual: EmbeddingTable,
    config: TrainConfig,
    supersense_map: dict[str, str] | None = None,
) -> tuple[GateModel, TrainReport]:
    """Grid over learning rates, Adagrad within each; keep the best-dev model.

    Pairs are reshuffled and negatives resampled every epoch from seeds
    derived from (config.seed, lr index, epoch), so runs are bit-for-bit
    reproducible. The negative pool is the set of words appearing in the
    training pairs. Returns the snapshot with the highest dev Spearman seen
    across the whole grid (ties keep the earliest), plus a per-epoch report.
    """
    if not train_set.pairs:
        raise GatefuseError("empty training set")
    inputs = FusionInputs(ling, predicted_visual, supersense_map)
    for w in train_set.words() | dev_set.words():
        if w not in inputs.index:
            raise GatefuseError(f"pair word {w!r} missing from the vocabulary")
    pool = sorted(train_set.words())
    pairs = train_set.pairs
    report = TrainReport()
    best_params: dict[str, np.ndarray] | None = None
    best_score = -np.inf
    for li, lr in enumerate(config.learning_rates):
        m = model.clone()
        state = AdagradState.for_model(m)
        for epoch in range(1, config.epochs + 1):
            rng = np.random.default_rng(
                np.random.SeedSequence(config.seed, spawn_key=(li, epoch))
            )
            order = rng.permutation(len(pairs))
            epoch_loss = 0.0
            for start in range(0, len(order), config.batch_size):
                chunk = order[start : start + config.batch_size]
                batch = []
                for idx in chunk:
                    cue, target, _ = pairs[idx]
                    n1, n2 = sample_negatives((cue, target), pool, rng)
                    batch.append((cue, target, n1, n2))
                loss, grads = gradients(m, batch, inputs, config.margin)
                if not np.isfinite(loss):
                    norms = {k: float(np.linalg.norm(v)) for k, v in m.params.items()}
                    raise GatefuseError(
                        f"non-finite loss at lr={lr} epoch={epoch}; "
                        f"last batch={batch}; parameter norms={norms}"
                    )
                epoch_loss += loss
                state.update(m.params, grads, lr, config.adagrad_epsilon)
            sims, scores = _dev_similarities(m, dev_set, inputs) if dev_set.pairs else (
                np.array([]),
                np.array([]),
            )
            rho, _ = spearman(sims, scores) if len(sims) >= 2 else (0.0, False)
            report.rows.append(TrainReportRow(lr, epoch, epoch_loss / len(pairs), rho))
            if rho > best_score:
                best_score = rho
                best_params = {k: v.copy() for k, v in m.params.items()}
                report.best_lr, report.best_epoch, report.best_dev = lr, epoch, rho
    if best_params is None:  # zero epochs: hand back the initial model
        return model.clone(), report
    return GateModel(model.kind, model.form, model.dim, best_params), report
