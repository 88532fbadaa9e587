"""Controlled corpora with a planted modality structure.

Words come in small clusters that share a latent vector; association pairs
are drawn within clusters, so associated words agree in the linguistic
space. Concrete-like clusters also project their latent into the visual
space (through a fixed random rotation), while abstract-like words get pure
noise as visual vectors. Training should therefore discover that the
linguistic half matters more, and matters most for abstract-like words.

Latents of the two kinds live in complementary coordinate halves, which
lets the text-to-vision map send abstract directions to (near) zero instead
of propagating them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .benchmark import SimilarityBenchmark
from .embeddings import EmbeddingTable
from .errors import GatefuseError

CLUSTER_SIZE = 4
BENCH_CLUSTER_SHARE = 0.3
# Abstract visual vectors are pure noise at a small scale: cosine-based
# consumers never see the scale, but it keeps the text-to-vision fit from
# dressing shared latent directions up as spurious coefficients.
ABSTRACT_VISUAL_SCALE = 0.1
# Each kind's latents share a mean component, so kind is linearly decodable
# from a word vector (as abstractness is in real embeddings); sample gates
# need that to route modality weights by kind.
KIND_MEAN_SHIFT = 1.5

ABSTRACT_SENSE = "abstractish"
CONCRETE_SENSE = "concretish"
ABSTRACT_RATING = 1.0
CONCRETE_RATING = 7.0


@dataclass
class SyntheticSpec:
    vocab_size: int = 500
    dim: int = 16
    n_pairs: int = 400
    frac_abstract: float = 0.5
    noise: float = 0.25
    seed: int = 0
    visual_coverage: float = 0.6

    def __post_init__(self):
        if self.vocab_size < 4 * CLUSTER_SIZE:
            raise GatefuseError(f"vocab_size must be at least {4 * CLUSTER_SIZE}")
        if self.dim < 2:
            raise GatefuseError("dim must be at least 2")
        if self.n_pairs < 1:
            raise GatefuseError("n_pairs must be positive")
        if not 0.0 <= self.frac_abstract <= 1.0:
            raise GatefuseError("frac_abstract must lie in [0, 1]")
        if self.noise < 0:
            raise GatefuseError("noise must be nonnegative")
        if not 0.0 < self.visual_coverage <= 1.0:
            raise GatefuseError("visual_coverage must lie in (0, 1]")


@dataclass(eq=False)
class SyntheticCorpus:
    ling: EmbeddingTable
    visual: EmbeddingTable
    pairs: list[tuple[str, str, float]]
    concreteness: dict[str, float]
    supersenses: dict[str, str]
    benchmark: SimilarityBenchmark


def _random_rotation(rng: np.random.Generator, dim: int) -> np.ndarray:
    q, r = np.linalg.qr(rng.standard_normal((dim, dim)))
    return q * np.sign(np.diag(r))


def _cluster_combos(clusters: list[list[int]]) -> list[tuple[int, int]]:
    combos = []
    for members in clusters:
        for i in range(len(members)):
            for j in range(i + 1, len(members)):
                combos.append((members[i], members[j]))
    return combos


def generate(spec: SyntheticSpec) -> SyntheticCorpus:
    """Deterministic corpus from the spec's seed.

    Word vocabulary splits into pair clusters (association training) and
    benchmark clusters (similarity evaluation), so training pairs above the
    usual 0.2 score threshold never contain benchmark words. Benchmark
    ratings are the cosines of the true cluster latents.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.vocab_size
    words = [f"w{i:04d}" for i in range(n)]
    dim, half = spec.dim, spec.dim // 2

    n_clusters = n // CLUSTER_SIZE
    clusters = [
        list(range(c * CLUSTER_SIZE, min((c + 1) * CLUSTER_SIZE, n)))
        for c in range(n_clusters)
    ]
    # leftover words (vocab not divisible by cluster size) join the last cluster
    for i in range(n_clusters * CLUSTER_SIZE, n):
        clusters[-1].append(i)

    n_bench_clusters = max(1, round(BENCH_CLUSTER_SHARE * n_clusters))
    n_pair_clusters = n_clusters - n_bench_clusters
    if n_pair_clusters < 1:
        raise GatefuseError("too few clusters for a training split")
    shuffled = rng.permutation(n_clusters)
    pair_cluster_ids = sorted(shuffled[:n_pair_clusters].tolist())
    bench_cluster_ids = sorted(shuffled[n_pair_clusters:].tolist())

    n_abstract = round(spec.frac_abstract * n_clusters)
    kind_flags = np.zeros(n_clusters, dtype=bool)
    kind_flags[rng.permutation(n_clusters)[:n_abstract]] = True  # True = abstract

    latents = np.zeros((n_clusters, dim))
    for c in range(n_clusters):
        block = rng.standard_normal(half if half else 1)
        block[0] += KIND_MEAN_SHIFT
        if kind_flags[c]:
            latents[c, half : 2 * half] = block
        else:
            latents[c, :half] = block

    cluster_of = np.empty(n, dtype=int)
    for c, members in enumerate(clusters):
        for i in members:
            cluster_of[i] = c

    L = np.empty((n, dim))
    V = np.empty((n, dim))
    rotation = _random_rotation(rng, dim)
    for i in range(n):
        c = cluster_of[i]
        L[i] = latents[c] + spec.noise * rng.standard_normal(dim)
        if kind_flags[c]:
            V[i] = ABSTRACT_VISUAL_SCALE * rng.standard_normal(dim)
        else:
            V[i] = rotation @ latents[c] + spec.noise * rng.standard_normal(dim)

    ling = EmbeddingTable(words, L)
    n_visual = max(1, round(spec.visual_coverage * n))
    visual_ids = np.sort(rng.choice(n, size=n_visual, replace=False))
    visual = EmbeddingTable([words[i] for i in visual_ids], V[visual_ids])

    # planted association pairs, within pair clusters, scores above 0.2
    pair_combos = _cluster_combos([clusters[c] for c in pair_cluster_ids])
    if spec.n_pairs > len(pair_combos):
        raise GatefuseError(
            f"requested {spec.n_pairs} pairs but only {len(pair_combos)} "
            "within-cluster combinations exist"
        )
    chosen = rng.choice(len(pair_combos), size=spec.n_pairs, replace=False)
    pairs = [
        (words[pair_combos[k][0]], words[pair_combos[k][1]], float(rng.uniform(0.3, 1.0)))
        for k in sorted(chosen.tolist())
    ]

    # weakly-scored dev pairs: associated pairs inside benchmark clusters,
    # plus unassociated cross-cluster pairs; all below the 0.2 threshold
    n_dev = spec.n_pairs // 2
    bench_combos = _cluster_combos([clusters[c] for c in bench_cluster_ids])
    take = min(n_dev, len(bench_combos))
    for k in sorted(rng.choice(len(bench_combos), size=take, replace=False).tolist()):
        a, b = bench_combos[k]
        pairs.append((words[a], words[b], float(rng.uniform(0.10, 0.19))))
    cross_seen = set()
    while len(cross_seen) < n_dev:
        a, b = rng.integers(n), rng.integers(n)
        if a == b or cluster_of[a] == cluster_of[b]:
            continue
        key = (min(a, b), max(a, b))
        if key in cross_seen:
            continue
        cross_seen.add(key)
        pairs.append((words[key[0]], words[key[1]], float(rng.uniform(0.01, 0.09))))

    concreteness = {
        words[i]: ABSTRACT_RATING if kind_flags[cluster_of[i]] else CONCRETE_RATING
        for i in range(n)
    }
    supersenses = {
        words[i]: ABSTRACT_SENSE if kind_flags[cluster_of[i]] else CONCRETE_SENSE
        for i in range(n)
    }

    # benchmark: within-cluster and cross-cluster pairs over benchmark words,
    # rated by the cosine of the true latents
    n_within = min(60, len(bench_combos))
    bench_pairs: list[tuple[str, str, float]] = []
    used = set()
    for k in sorted(rng.choice(len(bench_combos), size=n_within, replace=False).tolist()):
        a, b = bench_combos[k]
        used.add((min(a, b), max(a, b)))
        bench_pairs.append((words[a], words[b], _latent_cosine(latents, cluster_of, a, b)))
    bench_word_ids = [i for c in bench_cluster_ids for i in clusters[c]]
    while len(bench_pairs) < 2 * n_within:
        a, b = (
            bench_word_ids[int(rng.integers(len(bench_word_ids)))],
            bench_word_ids[int(rng.integers(len(bench_word_ids)))],
        )
        if a == b or cluster_of[a] == cluster_of[b]:
            continue
        key = (min(a, b), max(a, b))
        if key in used:
            continue
        used.add(key)
        bench_pairs.append(
            (words[key[0]], words[key[1]], _latent_cosine(latents, cluster_of, a, b))
        )
    benchmark = SimilarityBenchmark("synthetic", bench_pairs)

    return SyntheticCorpus(ling, visual, pairs, concreteness, supersenses, benchmark)


def _latent_cosine(latents, cluster_of, a: int, b: int) -> float:
    za, zb = latents[cluster_of[a]], latents[cluster_of[b]]
    denom = np.linalg.norm(za) * np.linalg.norm(zb)
    if denom == 0.0:
        return 0.0
    return float(za @ zb / denom)


def write_corpus(corpus: SyntheticCorpus, outdir) -> dict[str, str]:
    """Write every corpus piece in the formats the other modules ingest."""
    import os

    from .embeddings import save_embeddings

    os.makedirs(outdir, exist_ok=True)
    paths = {
        "ling": os.path.join(outdir, "linguistic.txt"),
        "visual": os.path.join(outdir, "visual.txt"),
        "visual_vocab": os.path.join(outdir, "visual_vocab.txt"),
        "pairs": os.path.join(outdir, "pairs.tsv"),
        "concreteness": os.path.join(outdir, "concreteness.tsv"),
        "supersenses": os.path.join(outdir, "supersenses.tsv"),
        "benchmark": os.path.join(outdir, "benchmark.tsv"),
    }
    save_embeddings(corpus.ling, paths["ling"])
    save_embeddings(corpus.visual, paths["visual"])
    with open(paths["visual_vocab"], "w", encoding="utf-8") as fh:
        for w in corpus.visual.words:
            fh.write(w + "\n")
    with open(paths["pairs"], "w", encoding="utf-8") as fh:
        for cue, target, score in corpus.pairs:
            fh.write(f"{cue}\t{target}\t{score:.6g}\n")
    with open(paths["concreteness"], "w", encoding="utf-8") as fh:
        for w in corpus.ling.words:
            fh.write(f"{w}\t{corpus.concreteness[w]:.6g}\n")
    with open(paths["supersenses"], "w", encoding="utf-8") as fh:
        for w in corpus.ling.words:
            fh.write(f"{w}\t{corpus.supersenses[w]}\n")
    with open(paths["benchmark"], "w", encoding="utf-8") as fh:
        for w1, w2, rating in corpus.benchmark.pairs:
            fh.write(f"{w1}\t{w2}\t{rating:.6g}\n")
    return paths
