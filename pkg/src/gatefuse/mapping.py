"""Ridge-regression mapping from the linguistic space to the visual space.

The map is fit on the words that have true visual vectors and then applied
to the full linguistic vocabulary, producing a predicted visual vector for
every word. Each visual output dimension is an independent ridge problem,
so the whole fit reduces to one symmetric positive-definite solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from .embeddings import EmbeddingTable
from .errors import GatefuseError, LoadError


@dataclass(eq=False)
class MappingModel:
    """Linear map: predicted visual rows = L @ coefficients."""

    coefficients: np.ndarray  # (source_dim, target_dim)
    lam: float

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.ndim != 2:
            raise GatefuseError("coefficients must be a 2-d matrix")
        if not np.all(np.isfinite(self.coefficients)):
            raise GatefuseError("mapping coefficients contain non-finite values")
        if self.lam < 0:
            raise GatefuseError("regularization strength must be nonnegative")

    @property
    def source_dim(self) -> int:
        return self.coefficients.shape[0]

    @property
    def target_dim(self) -> int:
        return self.coefficients.shape[1]


def fit_ridge(L_v: np.ndarray, V: np.ndarray, lam: float) -> MappingModel:
    """Minimize ||L_v A - V||^2 + lam ||A||^2 column by column.

    Solved in closed form via the normal equations
    (L_v' L_v + lam I) A = L_v' V with a Cholesky factorization.
    lam = 0 requires L_v' L_v to be nonsingular.
    """
    L_v = np.atleast_2d(np.asarray(L_v, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if L_v.shape[0] != V.shape[0]:
        raise GatefuseError(
            f"row-count mismatch: {L_v.shape[0]} linguistic rows vs {V.shape[0]} visual rows"
        )
    if L_v.shape[0] < 1:
        raise GatefuseError("need at least one training row")
    if lam < 0:
        raise GatefuseError("lambda must be nonnegative")
    gram = L_v.T @ L_v + lam * np.eye(L_v.shape[1])
    try:
        factor = cho_factor(gram)
    except LinAlgError:
        raise GatefuseError(
            "singular normal equations; use lambda > 0"
            if lam == 0
            else "normal equations are not positive definite"
        ) from None
    A = cho_solve(factor, L_v.T @ V)
    return MappingModel(A, float(lam))


def predict_visual(L: np.ndarray, model: MappingModel) -> np.ndarray:
    """Apply the fitted map: returns L @ A."""
    L = np.atleast_2d(np.asarray(L, dtype=float))
    if L.shape[1] != model.source_dim:
        raise GatefuseError(
            f"input has {L.shape[1]} columns, map expects {model.source_dim}"
        )
    return L @ model.coefficients


def predict_table(ling: EmbeddingTable, model: MappingModel) -> EmbeddingTable:
    """Predicted visual table over the full linguistic vocabulary."""
    return EmbeddingTable(list(ling.words), predict_visual(ling.vectors, model))


def select_lambda(
    L_v: np.ndarray,
    V: np.ndarray,
    candidates,
    folds: int,
    seed: int = 0,
) -> tuple[float, list[float]]:
    """Pick the regularization strength by k-fold cross validation.

    Fold assignment comes from one seeded shuffle, so the sweep is
    reproducible. Returns (best candidate, per-candidate mean squared error
    pooled over held-out entries). Ties break toward the larger lambda.
    """
    L_v = np.atleast_2d(np.asarray(L_v, dtype=float))
    V = np.atleast_2d(np.asarray(V, dtype=float))
    candidates = list(candidates)
    if not candidates:
        raise GatefuseError("no lambda candidates given")
    m = L_v.shape[0]
    if folds < 2:
        raise GatefuseError("need at least 2 folds")
    if folds > m:
        raise GatefuseError(f"{folds} folds but only {m} rows")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(m)
    fold_indices = np.array_split(perm, folds)
    mses: list[float] = []
    for lam in candidates:
        sse = 0.0
        count = 0
        for hold in fold_indices:
            mask = np.ones(m, dtype=bool)
            mask[hold] = False
            model = fit_ridge(L_v[mask], V[mask], lam)
            resid = predict_visual(L_v[hold], model) - V[hold]
            sse += float(np.sum(resid**2))
            count += resid.size
        mses.append(sse / count)
    best_lam, best_mse = candidates[0], mses[0]
    for lam, mse in zip(candidates[1:], mses[1:]):
        if mse < best_mse or (mse == best_mse and lam > best_lam):
            best_lam, best_mse = lam, mse
    return best_lam, mses


def save_mapping(model: MappingModel, path) -> None:
    """Text format: header ``ridge n_l n_v lambda`` then n_l rows of floats."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"ridge {model.source_dim} {model.target_dim} {model.lam:.17g}\n")
        for row in model.coefficients:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def load_mapping(path) -> MappingModel:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 4 or header[0] != "ridge":
            raise LoadError(f"{path}: bad mapping header")
        try:
            n_l, n_v, lam = int(header[1]), int(header[2]), float(header[3])
        except ValueError as exc:
            raise LoadError(f"{path}: bad mapping header: {exc}") from None
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                row = [float(v) for v in line.split()]
            except ValueError as exc:
                raise LoadError(f"{path}: line {lineno}: {exc}") from None
            if len(row) != n_v:
                raise LoadError(
                    f"{path}: line {lineno}: expected {n_v} values, got {len(row)}"
                )
            rows.append(row)
    if len(rows) != n_l:
        raise LoadError(f"{path}: expected {n_l} coefficient rows, got {len(rows)}")
    return MappingModel(np.array(rows), lam)
