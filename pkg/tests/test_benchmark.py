import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gatefuse.benchmark import (
    SimilarityBenchmark,
    cosine,
    evaluate,
    format_results,
    fractional_ranks,
    load_benchmark,
    run_suite,
    spearman,
    write_results_tsv,
)
from gatefuse.embeddings import EmbeddingTable
from gatefuse.errors import LoadError

from oracles import brute_force_ranks, brute_force_spearman


class TestSpearman:
    def test_monotone_exactly_one(self):
        assert spearman([1, 2, 3], [10, 20, 30]) == (1.0, True)

    def test_reversed_exactly_minus_one(self):
        assert spearman([1, 2, 3], [3, 2, 1]) == (-1.0, True)

    def test_ties_match_brute_force(self):
        rho, defined = spearman([1, 1, 2], [1, 2, 3])
        assert defined
        assert rho == pytest.approx(brute_force_spearman([1, 1, 2], [1, 2, 3]), abs=1e-12)

    def test_random_lists_with_ties_match_oracle(self):
        rng = np.random.default_rng(17)
        for _ in range(200):
            n = int(rng.integers(2, 30))
            xs = rng.integers(0, 6, size=n).astype(float)
            ys = rng.integers(0, 6, size=n).astype(float)
            mine, defined = spearman(xs, ys)
            if not defined:
                continue
            assert mine == pytest.approx(brute_force_spearman(xs, ys), abs=1e-12)

    def test_degenerate_cases_flagged(self):
        assert spearman([1.0], [2.0]) == (0.0, False)
        assert spearman([1, 1, 1], [1, 2, 3]) == (0.0, False)
        assert spearman([1, 2, 3], [5, 5, 5]) == (0.0, False)

    def test_fractional_ranks_match_counting(self):
        rng = np.random.default_rng(23)
        for _ in range(50):
            xs = rng.integers(0, 4, size=int(rng.integers(1, 20))).astype(float)
            assert np.array_equal(fractional_ranks(xs), brute_force_ranks(xs))

    @settings(max_examples=50)
    @given(
        st.lists(st.integers(min_value=-100, max_value=100), min_size=2, max_size=20),
        st.floats(min_value=0.1, max_value=5.0),
    )
    def test_invariant_under_increasing_transform(self, xs, slope):
        # integer-valued inputs keep the tie structure intact under the
        # affine transform (no floating-point collapse of distinct values)
        ys = list(range(len(xs)))
        base = spearman([float(x) for x in xs], ys)
        transformed = spearman([slope * x + 2.0 for x in xs], ys)
        assert base.defined == transformed.defined
        assert base.rho == pytest.approx(transformed.rho, abs=1e-9)


def toy_table():
    # vector angle encodes the word's rank
    words = ["a", "b", "c", "d"]
    angles = np.array([0.0, 0.3, 0.6, 0.9])
    vectors = np.stack([np.cos(angles), np.sin(angles)], axis=1)
    return EmbeddingTable(words, vectors)


class TestEvaluate:
    def test_rank_encoding_gives_one(self):
        table = toy_table()
        bench = SimilarityBenchmark(
            "toy", [("a", "b", 3.0), ("a", "c", 2.0), ("a", "d", 1.0)]
        )
        results = evaluate(table, bench, visual_vocab=set())
        all_result = results[0]
        assert all_result.region == "ALL"
        assert all_result.rho == 1.0

    def test_partition_counts(self):
        table = toy_table()
        bench = SimilarityBenchmark(
            "toy",
            [("a", "b", 1.0), ("a", "c", 2.0), ("b", "d", 3.0), ("c", "d", 4.0)],
        )
        results = {r.region: r for r in evaluate(table, bench, {"a", "b", "c"})}
        assert results["VIS"].pairs_used == 2
        assert results["ZS"].pairs_used == 2
        assert results["ALL"].pairs_used == 4

    def test_vis_zs_partition_all(self):
        rng = np.random.default_rng(31)
        words = [f"w{i}" for i in range(12)]
        table = EmbeddingTable(words, rng.normal(size=(12, 3)))
        pairs = [
            (words[int(rng.integers(12))], f"oov{i}" if i % 3 == 0 else words[int(rng.integers(12))], float(i))
            for i in range(20)
        ]
        bench = SimilarityBenchmark("mix", pairs)
        visual = set(words[:5])
        results = {r.region: r for r in evaluate(table, bench, visual)}
        assert (
            results["VIS"].pairs_used + results["ZS"].pairs_used
            == results["ALL"].pairs_used
        )
        assert (
            results["VIS"].pairs_skipped + results["ZS"].pairs_skipped
            == results["ALL"].pairs_skipped
        )
        n = len(bench.pairs)
        for r in results.values():
            if r.region == "ALL":
                assert r.pairs_used + r.pairs_skipped == n

    def test_oov_pairs_skipped_and_counted(self):
        table = toy_table()
        bench = SimilarityBenchmark("toy", [("a", "zzz", 1.0), ("a", "b", 2.0)])
        results = {r.region: r for r in evaluate(table, bench, set())}
        assert results["ALL"].pairs_skipped == 1
        assert results["ALL"].pairs_used == 1

    def test_pair_order_invariance(self):
        table = toy_table()
        pairs = [("a", "b", 1.0), ("a", "c", 5.0), ("b", "c", 3.0), ("a", "d", 2.0)]
        b1 = SimilarityBenchmark("x", pairs)
        b2 = SimilarityBenchmark("x", pairs[::-1])
        r1 = evaluate(table, b1, {"a"})
        r2 = evaluate(table, b2, {"a"})
        assert [(x.region, x.rho, x.pairs_used) for x in r1] == [
            (x.region, x.rho, x.pairs_used) for x in r2
        ]

    def test_cosine_scale_invariance(self):
        rng = np.random.default_rng(19)
        words = [f"w{i}" for i in range(10)]
        table = EmbeddingTable(words, rng.normal(size=(10, 4)))
        scaled = EmbeddingTable(words, table.vectors * 3.0)
        pairs = [
            (words[int(rng.integers(10))], words[int(rng.integers(10))], float(i))
            for i in range(15)
        ]
        bench = SimilarityBenchmark("rand", pairs)
        visual = set(words[:4])
        for r1, r2 in zip(evaluate(table, bench, visual), evaluate(scaled, bench, visual)):
            assert r1.rho == pytest.approx(r2.rho, abs=1e-12)
            assert r1.defined == r2.defined

    def test_empty_region_flagged(self):
        table = toy_table()
        bench = SimilarityBenchmark("toy", [("a", "b", 1.0), ("a", "c", 2.0)])
        results = {r.region: r for r in evaluate(table, bench, {"a", "b", "c", "d"})}
        assert results["ZS"].defined is False
        assert results["ZS"].rho == 0.0
        assert results["ZS"].pairs_used == 0


class TestSuite:
    def test_one_model_one_dataset_three_rows(self):
        rows = run_suite(
            [("m", toy_table())],
            [SimilarityBenchmark("d", [("a", "b", 1.0), ("a", "c", 2.0)])],
            {"a"},
        )
        assert len(rows) == 3
        assert [r.region for _, r in rows] == ["ALL", "VIS", "ZS"]

    def test_identical_model_identical_rows(self):
        bench = SimilarityBenchmark("d", [("a", "b", 1.0), ("b", "c", 2.0)])
        rows = run_suite([("x", toy_table()), ("y", toy_table())], [bench], {"a", "b"})
        first = [(r.region, r.rho, r.pairs_used) for _, r in rows[:3]]
        second = [(r.region, r.rho, r.pairs_used) for _, r in rows[3:]]
        assert first == second

    def test_suite_matches_single_calls(self):
        benches = [
            SimilarityBenchmark("d1", [("a", "b", 1.0), ("a", "c", 2.0)]),
            SimilarityBenchmark("d2", [("b", "d", 1.0), ("c", "d", 5.0)]),
        ]
        visual = {"a", "d"}
        rows = run_suite([("m", toy_table())], benches, visual)
        direct = [r for bench in benches for r in evaluate(toy_table(), bench, visual)]
        assert [(r.dataset, r.region, r.rho) for _, r in rows] == [
            (r.dataset, r.region, r.rho) for r in direct
        ]

    def test_formatting_and_tsv(self, tmp_path):
        bench = SimilarityBenchmark("d", [("a", "b", 1.0), ("a", "c", 2.0)])
        rows = run_suite([("m", toy_table())], [bench], {"a", "b", "c"})
        text = format_results(rows)
        assert "model" in text and "ZS" in text
        out = tmp_path / "results.tsv"
        write_results_tsv(rows, out)
        lines = out.read_text().splitlines()
        assert lines[0] == "model\tdataset\tregion\trho\tused\tskipped"
        assert len(lines) == 4
        assert lines[3].split("\t")[3] == "NA"  # empty ZS region


class TestLoaders:
    def test_load_with_header(self, tmp_path):
        path = tmp_path / "bench.tsv"
        path.write_text("word1\tword2\trating\na\tb\t3.5\n", encoding="utf-8")
        bench = load_benchmark(path)
        assert bench.pairs == [("a", "b", 3.5)]
        assert bench.name == "bench"

    def test_load_without_header(self, tmp_path):
        path = tmp_path / "b.tsv"
        path.write_text("a\tb\t1.0\nb\tc\t2.0\n", encoding="utf-8")
        assert len(load_benchmark(path, "named").pairs) == 2

    def test_bad_rating_mid_file(self, tmp_path):
        path = tmp_path / "b.tsv"
        path.write_text("a\tb\t1.0\nb\tc\toops\n", encoding="utf-8")
        with pytest.raises(LoadError, match="line 2"):
            load_benchmark(path)

    def test_duplicate_unordered_pairs_dropped(self):
        bench = SimilarityBenchmark("d", [("a", "b", 1.0), ("b", "a", 2.0)])
        assert len(bench.pairs) == 1


def test_cosine_zero_norm_is_zero():
    assert cosine(np.zeros(3), np.ones(3)) == 0.0
    assert cosine(np.array([1.0, 0.0]), np.array([1.0, 0.0])) == pytest.approx(1.0)
