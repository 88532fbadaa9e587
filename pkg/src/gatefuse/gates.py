"""Trainable gates that weight each modality before concatenation.

A fused word vector is ``[g_L * L_i ; g_P * P_i]`` where L_i is the word's
(normalized) linguistic vector, P_i its (normalized) predicted visual
vector, and the gates g_L, g_P are either scalars ("value" form) or
per-dimension vectors ("vector" form). Three parameterizations exist:

* modality — one gate pair shared by every word;
* category — one gate pair per word supersense (plus ``__default__``);
* sample   — gates computed from the word's own vectors,
             g = tanh(W x + b).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .embeddings import EmbeddingTable, normalize_rows
from .errors import GatefuseError, LoadError

log = logging.getLogger(__name__)

MODALITY, CATEGORY, SAMPLE = "modality", "category", "sample"
VALUE, VECTOR = "value", "vector"
KINDS = (MODALITY, CATEGORY, SAMPLE)
FORMS = (VALUE, VECTOR)
DEFAULT_SENSE = "__default__"

# Fused tables are plain embedding tables whose rows are the gated halves.
FusedTable = EmbeddingTable


@dataclass(eq=False)
class GateModel:
    """One of the six gate parameterizations (kind x form).

    Parameters live in a flat name -> array dict so the trainer can walk
    them generically:

    * modality: ``g_L``, ``g_P``
    * category: ``g_L[<sense>]``, ``g_P[<sense>]`` per sense
    * sample:   ``W_L``, ``b_L``, ``W_P``, ``b_P``

    Value-form arrays have size 1 and broadcast over any dimension; vector
    and sample forms are tied to ``dim``.
    """

    kind: str
    form: str
    dim: int
    params: dict[str, np.ndarray]

    def __post_init__(self):
        self.validate()

    @property
    def width(self) -> int:
        """Length of one gate: 1 for value form, dim for vector form."""
        return 1 if self.form == VALUE else self.dim

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise GatefuseError(f"unknown gate kind {self.kind!r}")
        if self.form not in FORMS:
            raise GatefuseError(f"unknown gate form {self.form!r}")
        if self.dim < 1:
            raise GatefuseError("gate dimension must be positive")
        for name, value in self.params.items():
            self.params[name] = np.asarray(value, dtype=float)
            if not np.all(np.isfinite(self.params[name])):
                raise GatefuseError(f"gate parameter {name} has non-finite entries")
        shapes = self._expected_shapes()
        if set(self.params) != set(shapes):
            raise GatefuseError(
                f"gate parameters {sorted(self.params)} do not match "
                f"expected {sorted(shapes)}"
            )
        for name, shape in shapes.items():
            if self.params[name].shape != shape:
                raise GatefuseError(
                    f"gate parameter {name} has shape {self.params[name].shape}, "
                    f"expected {shape}"
                )

    def _expected_shapes(self) -> dict[str, tuple[int, ...]]:
        w = (self.width,)
        if self.kind == MODALITY:
            return {"g_L": w, "g_P": w}
        if self.kind == CATEGORY:
            shapes = {}
            for name in self.params:
                if not (name.startswith("g_L[") or name.startswith("g_P[")) or not name.endswith("]"):
                    raise GatefuseError(f"bad category parameter name {name!r}")
                shapes[name] = w
            if f"g_L[{DEFAULT_SENSE}]" not in self.params:
                raise GatefuseError(f"category gates need a {DEFAULT_SENSE} sense")
            for sense in self.senses():
                if f"g_P[{sense}]" not in self.params or f"g_L[{sense}]" not in self.params:
                    raise GatefuseError(f"sense {sense!r} is missing one modality's gate")
            return shapes
        if self.form == VALUE:
            return {"W_L": (self.dim,), "b_L": (1,), "W_P": (self.dim,), "b_P": (1,)}
        return {
            "W_L": (self.dim, self.dim),
            "b_L": (self.dim,),
            "W_P": (self.dim, self.dim),
            "b_P": (self.dim,),
        }

    def senses(self) -> list[str]:
        """Sorted sense inventory (category kind only)."""
        return sorted(
            name[len("g_L[") : -1] for name in self.params if name.startswith("g_L[")
        )

    def resolve_sense(self, supersense: str | None) -> str:
        if supersense is not None and f"g_L[{supersense}]" in self.params:
            return supersense
        return DEFAULT_SENSE

    def clone(self) -> "GateModel":
        return GateModel(
            self.kind, self.form, self.dim, {k: v.copy() for k, v in self.params.items()}
        )


def initialize_gate_model(
    kind: str,
    form: str,
    dim: int,
    senses=(),
    seed: int = 0,
) -> GateModel:
    """Fresh model with gates starting at 1.

    Modality and category gates are set to 1.0 directly. Sample gates reach
    their starting value through tanh, so the biases are set to 1.0 and the
    W entries to small uniform(-0.01, 0.01) noise, giving initial gates of
    about tanh(1) = 0.762.
    """
    if form not in FORMS:
        raise GatefuseError(f"unknown gate form {form!r}")
    w = 1 if form == VALUE else dim
    if kind == MODALITY:
        params = {"g_L": np.ones(w), "g_P": np.ones(w)}
    elif kind == CATEGORY:
        params = {}
        for sense in sorted(set(senses) | {DEFAULT_SENSE}):
            params[f"g_L[{sense}]"] = np.ones(w)
            params[f"g_P[{sense}]"] = np.ones(w)
    elif kind == SAMPLE:
        rng = np.random.default_rng(seed)
        w_shape = (dim,) if form == VALUE else (dim, dim)
        params = {
            "W_L": rng.uniform(-0.01, 0.01, size=w_shape),
            "b_L": np.ones(w),
            "W_P": rng.uniform(-0.01, 0.01, size=w_shape),
            "b_P": np.ones(w),
        }
    else:
        raise GatefuseError(f"unknown gate kind {kind!r}")
    return GateModel(kind, form, dim, params)


def compute_gates(
    model: GateModel,
    L_i: np.ndarray,
    P_i: np.ndarray,
    supersense: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Gate pair for one word; each gate has shape (1,) or (dim,)."""
    L_i = np.asarray(L_i, dtype=float)
    P_i = np.asarray(P_i, dtype=float)
    if model.kind == MODALITY:
        return model.params["g_L"], model.params["g_P"]
    if model.kind == CATEGORY:
        sense = model.resolve_sense(supersense)
        return model.params[f"g_L[{sense}]"], model.params[f"g_P[{sense}]"]
    if L_i.shape != (model.dim,) or P_i.shape != (model.dim,):
        raise GatefuseError(
            f"sample gates need {model.dim}-dimensional halves, got "
            f"{L_i.shape} and {P_i.shape}"
        )
    if model.form == VALUE:
        g_L = np.tanh(np.atleast_1d(model.params["W_L"] @ L_i) + model.params["b_L"])
        g_P = np.tanh(np.atleast_1d(model.params["W_P"] @ P_i) + model.params["b_P"])
    else:
        g_L = np.tanh(model.params["W_L"] @ L_i + model.params["b_L"])
        g_P = np.tanh(model.params["W_P"] @ P_i + model.params["b_P"])
    return g_L, g_P


def fuse(L_i, P_i, g_L, g_P) -> np.ndarray:
    """Concatenate the gated halves, linguistic half first."""
    L_i = np.asarray(L_i, dtype=float)
    P_i = np.asarray(P_i, dtype=float)
    g_L = np.atleast_1d(np.asarray(g_L, dtype=float))
    g_P = np.atleast_1d(np.asarray(g_P, dtype=float))
    if g_L.shape not in ((1,), L_i.shape):
        raise GatefuseError(f"g_L shape {g_L.shape} does not broadcast over {L_i.shape}")
    if g_P.shape not in ((1,), P_i.shape):
        raise GatefuseError(f"g_P shape {g_P.shape} does not broadcast over {P_i.shape}")
    return np.concatenate([g_L * L_i, g_P * P_i])


class FusionInputs:
    """Aligned, optionally l2-normalized modality halves for a vocabulary.

    Central construction point so that fusion, training, and analysis all
    see the same normalization. `senses` maps each row to its supersense
    (None when no map was supplied).
    """

    def __init__(
        self,
        ling: EmbeddingTable,
        predicted: EmbeddingTable,
        supersense_map: dict[str, str] | None = None,
        normalize: bool = True,
    ):
        if len(ling.words) != len(predicted.words):
            raise GatefuseError(
                f"vocabulary mismatch: {len(ling.words)} linguistic vs "
                f"{len(predicted.words)} visual words"
            )
        for a, b in zip(ling.words, predicted.words):
            if a != b:
                raise GatefuseError(f"vocabulary mismatch: {a!r} vs {b!r}")
        self.words = list(ling.words)
        self.index = {w: i for i, w in enumerate(self.words)}
        if normalize:
            self.L, zero_l = normalize_rows(ling.vectors)
            self.P, zero_p = normalize_rows(predicted.vectors)
            n_zero = int(zero_l.sum() + zero_p.sum())
            if n_zero:
                log.warning("%d zero-norm rows left unnormalized", n_zero)
        else:
            self.L = np.array(ling.vectors, dtype=float)
            self.P = np.array(predicted.vectors, dtype=float)
        if supersense_map is None:
            self.senses = [None] * len(self.words)
        else:
            self.senses = [supersense_map.get(w) for w in self.words]

    def row(self, word: str) -> tuple[np.ndarray, np.ndarray, str | None]:
        i = self.index[word]
        return self.L[i], self.P[i], self.senses[i]


def gate_matrices(
    model: GateModel,
    inputs: FusionInputs,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized gates for every row: shapes (m, 1) or (m, dim)."""
    m = len(inputs.words)
    if model.kind == MODALITY:
        G_L = np.tile(model.params["g_L"], (m, 1))
        G_P = np.tile(model.params["g_P"], (m, 1))
    elif model.kind == CATEGORY:
        G_L = np.empty((m, model.width))
        G_P = np.empty((m, model.width))
        for i, sense in enumerate(inputs.senses):
            s = model.resolve_sense(sense)
            G_L[i] = model.params[f"g_L[{s}]"]
            G_P[i] = model.params[f"g_P[{s}]"]
    else:
        _check_sample_dims(model, inputs)
        if model.form == VALUE:
            G_L = np.tanh(inputs.L @ model.params["W_L"] + model.params["b_L"])[:, None]
            G_P = np.tanh(inputs.P @ model.params["W_P"] + model.params["b_P"])[:, None]
        else:
            G_L = np.tanh(inputs.L @ model.params["W_L"].T + model.params["b_L"])
            G_P = np.tanh(inputs.P @ model.params["W_P"].T + model.params["b_P"])
    return G_L, G_P


def _check_sample_dims(model: GateModel, inputs: FusionInputs) -> None:
    if inputs.L.shape[1] != model.dim or inputs.P.shape[1] != model.dim:
        raise GatefuseError(
            f"gate model of dimension {model.dim} cannot gate halves of "
            f"dimensions {inputs.L.shape[1]} and {inputs.P.shape[1]}"
        )


def fuse_matrix(model: GateModel, inputs: FusionInputs) -> np.ndarray:
    if model.form == VECTOR and model.kind != SAMPLE:
        _check_sample_dims(model, inputs)
    G_L, G_P = gate_matrices(model, inputs)
    return np.hstack([G_L * inputs.L, G_P * inputs.P])


def build_fused_table(
    ling: EmbeddingTable,
    predicted_visual: EmbeddingTable,
    model: GateModel,
    supersense_map: dict[str, str] | None = None,
    normalize: bool = True,
) -> FusedTable:
    """Fused table over the (shared, aligned) vocabulary of both inputs.

    Both halves are l2-normalized before gating by default; pass
    normalize=False for sensitivity runs on raw vectors.
    """
    inputs = FusionInputs(ling, predicted_visual, supersense_map, normalize=normalize)
    return EmbeddingTable(inputs.words, fuse_matrix(model, inputs))


def unit_gate_model(ling_dim: int) -> GateModel:
    """Modality-value gates fixed at (1, 1): plain normalized concatenation."""
    return initialize_gate_model(MODALITY, VALUE, ling_dim)


def baseline_ridge(
    ling: EmbeddingTable,
    predicted_visual: EmbeddingTable,
    normalize: bool = True,
) -> FusedTable:
    """Unit-gate fusion of linguistic and predicted visual vectors."""
    return build_fused_table(
        ling, predicted_visual, unit_gate_model(ling.dimension), normalize=normalize
    )


def baseline_conc(
    ling: EmbeddingTable,
    visual: EmbeddingTable,
    normalize: bool = True,
) -> FusedTable:
    """Unit-gate fusion with true visual vectors; vocabulary restricted to
    the words that have them."""
    common = [w for w in ling.words if w in visual]
    if not common:
        raise GatefuseError("no shared vocabulary between linguistic and visual tables")
    return build_fused_table(
        ling.subset(common),
        visual.subset(common),
        unit_gate_model(ling.dimension),
        normalize=normalize,
    )


def baseline_dispersion(
    ling: EmbeddingTable,
    visual: EmbeddingTable,
    features,
    normalize: bool = True,
) -> tuple[FusedTable, list[str]]:
    """Concatenation with the visual half zeroed for abstract words.

    A word counts as abstract when its image dispersion exceeds the median
    dispersion over the shared vocabulary. Words without at least two
    images cannot be scored and are treated as abstract; they are returned
    as the second element.
    """
    from .embeddings import image_dispersion

    common = [w for w in ling.words if w in visual]
    if not common:
        raise GatefuseError("no shared vocabulary between linguistic and visual tables")
    counts = {w: len(v) for w, v in features.by_word().items()}
    dispersions = {}
    missing = []
    for w in common:
        if counts.get(w, 0) >= 2:
            dispersions[w] = image_dispersion(features, w)
        else:
            missing.append(w)
    if not dispersions:
        raise GatefuseError("no word has enough images to compute dispersion")
    median = float(np.median(list(dispersions.values())))
    L, _ = normalize_rows(ling.subset(common).vectors) if normalize else (
        ling.subset(common).vectors,
        None,
    )
    V, _ = normalize_rows(visual.subset(common).vectors) if normalize else (
        visual.subset(common).vectors,
        None,
    )
    g_P = np.array(
        [0.0 if w in missing or dispersions[w] > median else 1.0 for w in common]
    )
    if missing:
        log.warning(
            "dispersion unavailable for %d words; treated as abstract", len(missing)
        )
    return EmbeddingTable(common, np.hstack([L, g_P[:, None] * V])), missing


def load_supersense_map(path) -> dict[str, str]:
    """Read a ``word<TAB>supersense`` file; first mapping per word wins."""
    mapping: dict[str, str] = {}
    dup = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise LoadError(f"{path}: line {lineno}: expected word<TAB>supersense")
            word, sense = parts
            if word in mapping:
                dup += 1
                continue
            mapping[word] = sense
    if dup:
        log.warning("%s: ignored %d duplicate word mappings", path, dup)
    return mapping


def save_gate_model(model: GateModel, path) -> None:
    """Text format: ``gate <kind> <form> <dim>`` then named parameter lines."""
    def fmt(arr: np.ndarray) -> str:
        return " ".join(f"{v:.17g}" for v in np.ravel(arr))

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"gate {model.kind} {model.form} {model.dim}\n")
        if model.kind == CATEGORY:
            for sense in model.senses():
                fh.write(
                    f"sense {sense} g_L {fmt(model.params[f'g_L[{sense}]'])} "
                    f"g_P {fmt(model.params[f'g_P[{sense}]'])}\n"
                )
        else:
            for name in ("g_L", "g_P") if model.kind == MODALITY else (
                "W_L", "b_L", "W_P", "b_P"
            ):
                fh.write(f"{name} {fmt(model.params[name])}\n")


def load_gate_model(path) -> GateModel:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "gate":
            raise LoadError(f"{path}: bad gate header")
        kind, form = header[1], header[2]
        try:
            dim = int(header[3])
        except ValueError:
            raise LoadError(f"{path}: bad gate dimension {header[3]!r}") from None
        if kind not in KINDS or form not in FORMS:
            raise LoadError(f"{path}: unknown gate kind/form {kind!r} {form!r}")
        width = 1 if form == VALUE else dim
        params: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            tokens = line.split()
            if not tokens:
                continue
            try:
                if tokens[0] == "sense":
                    sense = tokens[1]
                    if tokens[2] != "g_L" or tokens[3 + width] != "g_P":
                        raise LoadError(f"{path}: line {lineno}: malformed sense block")
                    params[f"g_L[{sense}]"] = np.array(
                        [float(v) for v in tokens[3 : 3 + width]]
                    )
                    params[f"g_P[{sense}]"] = np.array(
                        [float(v) for v in tokens[4 + width : 4 + 2 * width]]
                    )
                else:
                    values = np.array([float(v) for v in tokens[1:]])
                    if tokens[0] in ("W_L", "W_P") and form == VECTOR:
                        values = values.reshape(dim, dim)
                    params[tokens[0]] = values
            except (ValueError, IndexError) as exc:
                raise LoadError(f"{path}: line {lineno}: {exc}") from None
    try:
        return GateModel(kind, form, dim, params)
    except GatefuseError as exc:
        raise LoadError(f"{path}: {exc}") from None
