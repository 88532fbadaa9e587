"""Load, validate, normalize and serve dense word-embedding tables.

Two kinds of inputs live here: word-level embedding tables (one vector per
word, text format ``word v1 ... vd``) and per-image feature sets (TSV format
``word<TAB>image_id<TAB>v1 v2 ... vd``) that get aggregated into word-level
visual vectors.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import GatefuseError, LoadError

log = logging.getLogger(__name__)


@dataclass(eq=False)
class EmbeddingTable:
    """Ordered vocabulary with one fixed-width real-valued vector per word.

    Immutable after construction by convention; safe to share across readers.
    """

    words: list[str]
    vectors: np.ndarray
    duplicates_dropped: int = 0
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=float)
        if self.vectors.ndim != 2:
            raise GatefuseError("vectors must be a 2-d matrix")
        if self.vectors.shape[0] != len(self.words):
            raise GatefuseError(
                f"{len(self.words)} words but {self.vectors.shape[0]} vector rows"
            )
        if self.vectors.shape[1] < 1:
            raise GatefuseError("vector dimension must be at least 1")
        if not np.all(np.isfinite(self.vectors)):
            raise GatefuseError("embedding table contains non-finite values")
        self._index = {}
        for i, w in enumerate(self.words):
            if not w:
                raise GatefuseError(f"empty word at row {i}")
            if w in self._index:
                raise GatefuseError(f"duplicate word {w!r} at row {i}")
            self._index[w] = i

    @property
    def dimension(self) -> int:
        return self.vectors.shape[1]

    def __len__(self) -> int:
        return len(self.words)

    def __contains__(self, word: str) -> bool:
        return word in self._index

    def row(self, word: str) -> np.ndarray:
        try:
            return self.vectors[self._index[word]]
        except KeyError:
            raise GatefuseError(f"word {word!r} not in table") from None

    def index_of(self, word: str) -> int:
        return self._index[word]

    def subset(self, words) -> "EmbeddingTable":
        """New table restricted to `words`, keeping this table's row order."""
        keep = set(words)
        idx = [i for i, w in enumerate(self.words) if w in keep]
        return EmbeddingTable([self.words[i] for i in idx], self.vectors[idx].copy())

    def vocab(self) -> set[str]:
        return set(self.words)


def load_embeddings(path, expected_dim: int | None = None) -> EmbeddingTable:
    """Read a whitespace-separated ``word v1 ... vd`` text file.

    Duplicate words keep their first occurrence (tallied on the returned
    table). Dimension mismatches and non-numeric fields raise LoadError
    naming the offending line.
    """
    words: list[str] = []
    rows: list[np.ndarray] = []
    seen: set[str] = set()
    dup = 0
    dim = expected_dim
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts:
                continue
            word, values = parts[0], parts[1:]
            if not values:
                raise LoadError(f"{path}: line {lineno}: no values for {word!r}")
            if dim is None:
                dim = len(values)
            elif len(values) != dim:
                raise LoadError(
                    f"{path}: line {lineno}: expected {dim} values, got {len(values)}"
                )
            try:
                vec = np.array([float(v) for v in values])
            except ValueError as exc:
                raise LoadError(f"{path}: line {lineno}: {exc}") from None
            if word in seen:
                dup += 1
                continue
            seen.add(word)
            words.append(word)
            rows.append(vec)
    if not rows:
        raise LoadError(f"{path}: no rows")
    if dup:
        log.warning("%s: dropped %d duplicate words (kept first occurrence)", path, dup)
    return EmbeddingTable(words, np.vstack(rows), duplicates_dropped=dup)


def save_embeddings(table: EmbeddingTable, path) -> None:
    """Write in the same format load_embeddings reads, 6 significant digits."""
    with open(path, "w", encoding="utf-8") as fh:
        for word, vec in zip(table.words, table.vectors):
            fh.write(word + " " + " ".join(f"{v:.6g}" for v in vec) + "\n")


def l2_normalize(v: np.ndarray) -> np.ndarray:
    """Scale `v` to unit Euclidean norm; an all-zero vector stays zero."""
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if norm == 0.0:
        return v.copy()
    return v / norm


def normalize_rows(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-wise l2 normalization.

    Returns (normalized matrix, boolean mask of zero-norm rows). Zero rows
    are left as-is rather than erroring so that downstream evaluation can
    skip them.
    """
    matrix = np.asarray(matrix, dtype=float)
    norms = np.linalg.norm(matrix, axis=1)
    zero = norms == 0.0
    safe = np.where(zero, 1.0, norms)
    return matrix / safe[:, None], zero


@dataclass(eq=False)
class ImageFeatureSet:
    """Per-image feature vectors: entries of (word, image_id, vector)."""

    entries: list[tuple[str, str, np.ndarray]]

    def __post_init__(self):
        if not self.entries:
            raise GatefuseError("image feature set is empty")
        seen = set()
        dim = None
        norm_entries = []
        for word, image_id, vec in self.entries:
            vec = np.asarray(vec, dtype=float)
            if dim is None:
                dim = vec.shape[0]
            elif vec.shape != (dim,):
                raise GatefuseError(
                    f"feature for ({word}, {image_id}) has dimension "
                    f"{vec.shape[0]}, expected {dim}"
                )
            key = (word, image_id)
            if key in seen:
                raise GatefuseError(f"duplicate image entry {key}")
            seen.add(key)
            norm_entries.append((word, image_id, vec))
        self.entries = norm_entries

    @property
    def dimension(self) -> int:
        return self.entries[0][2].shape[0]

    def by_word(self) -> dict[str, list[tuple[str, np.ndarray]]]:
        """Group entries by word, preserving first-appearance order."""
        groups: dict[str, list[tuple[str, np.ndarray]]] = {}
        for word, image_id, vec in self.entries:
            groups.setdefault(word, []).append((image_id, vec))
        return groups


def load_image_features(path) -> ImageFeatureSet:
    """Read a ``word<TAB>image_id<TAB>v1 v2 ... vd`` TSV file."""
    entries = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 3:
                raise LoadError(f"{path}: line {lineno}: expected 3 tab-separated fields")
            word, image_id, values = parts
            try:
                vec = np.array([float(v) for v in values.split()])
            except ValueError as exc:
                raise LoadError(f"{path}: line {lineno}: {exc}") from None
            entries.append((word, image_id, vec))
    if not entries:
        raise LoadError(f"{path}: no rows")
    return ImageFeatureSet(entries)


def aggregate_image_features(
    features: ImageFeatureSet,
    min_images: int | None = None,
    max_images: int | None = None,
    seed: int = 0,
) -> EmbeddingTable:
    """Average each word's image vectors into one visual vector per word.

    Optional corpus-construction filters: drop words with fewer than
    `min_images` images, and subsample (seeded, without replacement) words
    with more than `max_images`. Output vocabulary is sorted so the result
    does not depend on entry order.
    """
    groups = features.by_word()
    rng = np.random.default_rng(seed)
    words, rows = [], []
    for word in sorted(groups):
        entries = sorted(groups[word], key=lambda e: e[0])
        if min_images is not None and len(entries) < min_images:
            continue
        if max_images is not None and len(entries) > max_images:
            pick = np.sort(rng.choice(len(entries), size=max_images, replace=False))
            entries = [entries[i] for i in pick]
        words.append(word)
        rows.append(np.mean([vec for _, vec in entries], axis=0))
    if not words:
        raise GatefuseError("no words left after image-count filtering")
    return EmbeddingTable(words, np.vstack(rows))


def image_dispersion(features: ImageFeatureSet, word: str) -> float:
    """Average pairwise cosine distance among a word's image vectors.

    Returns (2 / n(n-1)) * sum over pairs of (1 - cosine); lies in [0, 2].
    A zero-norm image vector makes its pairs contribute distance 1
    (orthogonality convention).
    """
    groups = features.by_word()
    if word not in groups:
        raise GatefuseError(f"no images for word {word!r}")
    vecs = np.vstack([vec for _, vec in groups[word]])
    n = vecs.shape[0]
    if n < 2:
        raise GatefuseError(f"dispersion undefined for {word!r}: needs >= 2 images")
    normed, zero = normalize_rows(vecs)
    if zero.any():
        log.warning("word %r has %d zero-norm image vectors", word, int(zero.sum()))
    cos = normed @ normed.T
    cos[zero, :] = 0.0
    cos[:, zero] = 0.0
    iu, ju = np.triu_indices(n, k=1)
    return float(np.sum(1.0 - cos[iu, ju]) * 2.0 / (n * (n - 1)))
