"""Word-similarity benchmark evaluation with tie-aware Spearman correlation.

Every benchmark is scored three times: ALL (every pair the evaluated table
covers), VIS (pairs whose two words both have true visual vectors), and ZS
(pairs where at least one word lacks a true visual vector). VIS and ZS
partition the benchmark, so their counts add up exactly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .embeddings import EmbeddingTable
from .errors import GatefuseError, LoadError

log = logging.getLogger(__name__)

REGIONS = ("ALL", "VIS", "ZS")


class SpearmanResult(NamedTuple):
    rho: float
    defined: bool


def fractional_ranks(values) -> np.ndarray:
    """Average ranks (1-based); tied values share the mean of their ranks."""
    values = np.asarray(values, dtype=float)
    n = len(values)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(n)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def spearman(xs, ys) -> SpearmanResult:
    """Tie-aware Spearman: Pearson correlation of fractional ranks.

    Undefined cases (fewer than two points, or zero rank variance in either
    list) come back as rho 0.0 with defined=False. Perfectly monotone inputs
    give exactly +/-1.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if xs.shape != ys.shape:
        raise GatefuseError(f"length mismatch: {xs.shape} vs {ys.shape}")
    n = len(xs)
    if n < 2:
        return SpearmanResult(0.0, False)
    rx = fractional_ranks(xs)
    ry = fractional_ranks(ys)
    if np.array_equal(rx, ry):
        # identical rank vectors include the zero-variance (all-tied) case
        if np.all(rx == rx[0]):
            return SpearmanResult(0.0, False)
        return SpearmanResult(1.0, True)
    if np.array_equal(rx, n + 1.0 - ry):
        return SpearmanResult(-1.0, True)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    vx = float(dx @ dx)
    vy = float(dy @ dy)
    if vx == 0.0 or vy == 0.0:
        return SpearmanResult(0.0, False)
    return SpearmanResult(float(dx @ dy) / np.sqrt(vx * vy), True)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; zero-norm inputs count as orthogonal (0.0)."""
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        return 0.0
    return float(np.dot(u, v) / (nu * nv))


@dataclass(eq=False)
class SimilarityBenchmark:
    """Named list of (word1, word2, human rating) pairs."""

    name: str
    pairs: list[tuple[str, str, float]]

    def __post_init__(self):
        seen = set()
        unique = []
        dropped = 0
        for w1, w2, rating in self.pairs:
            rating = float(rating)
            if not np.isfinite(rating):
                raise GatefuseError(f"{self.name}: non-finite rating for ({w1}, {w2})")
            key = frozenset((w1, w2)) if w1 != w2 else (w1,)
            if key in seen:
                dropped += 1
                continue
            seen.add(key)
            unique.append((w1, w2, rating))
        if dropped:
            log.warning("%s: dropped %d duplicate pairs", self.name, dropped)
        self.pairs = unique

    def vocab(self) -> set[str]:
        return {w for w1, w2, _ in self.pairs for w in (w1, w2)}


def load_benchmark(path, name: str | None = None) -> SimilarityBenchmark:
    """Read ``word1<TAB>word2<TAB>rating``; a single header line is skipped."""
    import os

    if name is None:
        name = os.path.splitext(os.path.basename(str(path)))[0]
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) < 3:
                raise LoadError(f"{path}: line {lineno}: expected 3 tab-separated fields")
            try:
                rating = float(parts[2])
            except ValueError:
                if lineno == 1:
                    continue  # header
                raise LoadError(f"{path}: line {lineno}: bad rating {parts[2]!r}") from None
            pairs.append((parts[0], parts[1], rating))
    if not pairs:
        raise LoadError(f"{path}: no rows")
    return SimilarityBenchmark(name, pairs)


@dataclass
class BenchmarkResult:
    dataset: str
    region: str
    rho: float
    defined: bool
    pairs_used: int
    pairs_skipped: int


def evaluate(
    table: EmbeddingTable,
    bench: SimilarityBenchmark,
    visual_vocab: set[str],
) -> list[BenchmarkResult]:
    """Score one table on one benchmark, per region.

    Model similarity is the cosine of the two words' vectors. Pairs with a
    word missing from the table are skipped and counted; an empty or
    constant region is reported as rho 0.0 with defined=False.
    """
    sims: dict[str, list[float]] = {r: [] for r in REGIONS}
    ratings: dict[str, list[float]] = {r: [] for r in REGIONS}
    skipped = {r: 0 for r in REGIONS}
    for w1, w2, rating in bench.pairs:
        region = "VIS" if (w1 in visual_vocab and w2 in visual_vocab) else "ZS"
        if w1 in table and w2 in table:
            sim = cosine(table.row(w1), table.row(w2))
            for r in ("ALL", region):
                sims[r].append(sim)
                ratings[r].append(rating)
        else:
            for r in ("ALL", region):
                skipped[r] += 1
    results = []
    for region in REGIONS:
        rho, defined = spearman(sims[region], ratings[region])
        results.append(
            BenchmarkResult(
                dataset=bench.name,
                region=region,
                rho=rho,
                defined=defined,
                pairs_used=len(sims[region]),
                pairs_skipped=skipped[region],
            )
        )
    return results


def run_suite(
    tables: list[tuple[str, EmbeddingTable]],
    benchmarks: list[SimilarityBenchmark],
    visual_vocab: set[str],
) -> list[tuple[str, BenchmarkResult]]:
    """Cross product of tables x benchmarks x regions, in given order."""
    rows = []
    for model_name, table in tables:
        for bench in benchmarks:
            for result in evaluate(table, bench, visual_vocab):
                rows.append((model_name, result))
    return rows


def _cell(result: BenchmarkResult) -> str:
    return f"{result.rho:.6f}" if result.defined else "NA"


def format_results(rows: list[tuple[str, BenchmarkResult]]) -> str:
    """Aligned text table of suite results."""
    header = ("model", "dataset", "region", "rho", "used", "skipped")
    table = [header] + [
        (name, r.dataset, r.region, _cell(r), str(r.pairs_used), str(r.pairs_skipped))
        for name, r in rows
    ]
    widths = [max(len(row[i]) for row in table) for i in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
        for row in table
    )


def write_results_tsv(rows: list[tuple[str, BenchmarkResult]], path) -> None:
    """TSV: ``model dataset region rho used skipped`` with one header line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("model\tdataset\tregion\trho\tused\tskipped\n")
        for name, r in rows:
            fh.write(
                f"{name}\t{r.dataset}\t{r.region}\t{_cell(r)}\t"
                f"{r.pairs_used}\t{r.pairs_skipped}\n"
            )
