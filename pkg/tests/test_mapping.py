import numpy as np
import pytest

from gatefuse.embeddings import EmbeddingTable
from gatefuse.errors import GatefuseError, LoadError
from gatefuse.mapping import (
    MappingModel,
    fit_ridge,
    load_mapping,
    predict_table,
    predict_visual,
    save_mapping,
    select_lambda,
)

from oracles import ridge_gradient_descent, ridge_objective


class TestFitRidge:
    def test_identity_problem(self):
        model = fit_ridge(np.eye(3), np.eye(3), 0.0)
        assert np.allclose(model.coefficients, np.eye(3), atol=1e-12)

    def test_huge_lambda_shrinks_coefficients(self):
        rng = np.random.default_rng(0)
        L = rng.normal(size=(10, 4))
        V = rng.normal(size=(10, 2))
        model = fit_ridge(L, V, 1e9)
        assert np.linalg.norm(model.coefficients) < 1e-6 * np.linalg.norm(L.T @ V)

    def test_matches_gradient_descent_oracle(self):
        rng = np.random.default_rng(42)
        L = rng.normal(size=(8, 3))
        V = rng.normal(size=(8, 2))
        model = fit_ridge(L, V, 0.5)
        oracle = ridge_gradient_descent(L, V, 0.5)
        assert np.max(np.abs(model.coefficients - oracle)) <= 1e-6

    def test_residual_orthogonality_at_zero_lambda(self):
        rng = np.random.default_rng(7)
        L = rng.normal(size=(12, 5))
        V = rng.normal(size=(12, 3))
        model = fit_ridge(L, V, 0.0)
        assert np.max(np.abs(L.T @ (L @ model.coefficients - V))) < 1e-8

    def test_perturbing_solution_never_improves_objective(self):
        rng = np.random.default_rng(9)
        L = rng.normal(size=(9, 4))
        V = rng.normal(size=(9, 2))
        lam = 0.6
        model = fit_ridge(L, V, lam)
        base = ridge_objective(L, V, model.coefficients, lam)
        for i in range(4):
            for j in range(2):
                for delta in (1e-3, -1e-3):
                    A = model.coefficients.copy()
                    A[i, j] += delta
                    assert ridge_objective(L, V, A, lam) >= base

    def test_singular_at_zero_lambda(self):
        L = np.array([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
        V = np.ones((3, 1))
        with pytest.raises(GatefuseError, match="lambda > 0"):
            fit_ridge(L, V, 0.0)

    def test_row_count_mismatch(self):
        with pytest.raises(GatefuseError, match="mismatch"):
            fit_ridge(np.ones((3, 2)), np.ones((4, 1)), 0.1)

    def test_negative_lambda(self):
        with pytest.raises(GatefuseError):
            fit_ridge(np.eye(2), np.eye(2), -1.0)


class TestPredict:
    def test_identity_map(self):
        model = MappingModel(np.eye(3), 0.0)
        L = np.arange(6.0).reshape(2, 3)
        assert np.array_equal(predict_visual(L, model), L)

    def test_hand_example(self):
        model = MappingModel(np.array([[1.0, 0.0], [0.0, 2.0]]), 0.0)
        assert np.array_equal(predict_visual(np.array([[3.0, 4.0]]), model), [[3.0, 8.0]])

    def test_rows_independent(self):
        rng = np.random.default_rng(1)
        model = MappingModel(rng.normal(size=(4, 3)), 0.1)
        L = rng.normal(size=(6, 4))
        full = predict_visual(L, model)
        for i in range(6):
            single = predict_visual(L[i : i + 1], model)[0]
            assert np.allclose(full[i], single, rtol=1e-14, atol=1e-14)

    def test_dimension_mismatch(self):
        model = MappingModel(np.eye(3), 0.0)
        with pytest.raises(GatefuseError, match="columns"):
            predict_visual(np.ones((2, 4)), model)

    def test_predict_table_keeps_vocab(self):
        table = EmbeddingTable(["a", "b"], np.array([[1.0, 0.0], [0.0, 1.0]]))
        model = MappingModel(np.array([[2.0], [3.0]]), 0.0)
        out = predict_table(table, model)
        assert out.words == ["a", "b"]
        assert np.array_equal(out.vectors, [[2.0], [3.0]])


class TestSelectLambda:
    def test_single_candidate_forced(self):
        rng = np.random.default_rng(3)
        L = rng.normal(size=(10, 3))
        V = rng.normal(size=(10, 2))
        best, mses = select_lambda(L, V, [0.6], folds=5)
        assert best == 0.6
        assert len(mses) == 1

    def test_noiseless_linear_prefers_tiny_lambda(self):
        rng = np.random.default_rng(4)
        L = rng.normal(size=(40, 4))
        A_true = rng.normal(size=(4, 3))
        V = L @ A_true
        best, _ = select_lambda(L, V, [0.0001, 10.0], folds=5)
        assert best == 0.0001

    def test_reproducible_mses(self):
        rng = np.random.default_rng(5)
        L = rng.normal(size=(15, 3))
        V = rng.normal(size=(15, 2))
        first = select_lambda(L, V, [0.1, 0.6, 1.0], folds=3, seed=9)
        second = select_lambda(L, V, [0.1, 0.6, 1.0], folds=3, seed=9)
        assert first == second

    def test_ties_break_toward_larger_lambda(self):
        # duplicated candidate forces an exact tie
        rng = np.random.default_rng(6)
        L = rng.normal(size=(12, 3))
        V = rng.normal(size=(12, 2))
        best, mses = select_lambda(L, V, [0.6, 0.6], folds=4)
        assert best == 0.6
        assert mses[0] == mses[1]

    def test_too_many_folds(self):
        with pytest.raises(GatefuseError, match="folds"):
            select_lambda(np.ones((3, 2)), np.ones((3, 1)), [0.1], folds=4)

    def test_paper_style_grid_includes_winner(self):
        rng = np.random.default_rng(12)
        L = rng.normal(size=(60, 5))
        A_true = rng.normal(size=(5, 3))
        V = L @ A_true + 0.5 * rng.normal(size=(60, 3))
        grid = [0.1, 0.3, 0.6, 1.0, 3.0]
        best, mses = select_lambda(L, V, grid, folds=5)
        assert best in grid
        assert mses[grid.index(best)] == min(mses)


def test_mapping_file_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    model = MappingModel(rng.normal(size=(4, 3)), 0.6)
    path = tmp_path / "map.txt"
    save_mapping(model, path)
    loaded = load_mapping(path)
    assert loaded.lam == model.lam
    assert np.array_equal(loaded.coefficients, model.coefficients)
    save_mapping(loaded, tmp_path / "map2.txt")
    assert (tmp_path / "map.txt").read_bytes() == (tmp_path / "map2.txt").read_bytes()


def test_mapping_file_errors(tmp_path):
    bad = tmp_path / "bad.txt"
    bad.write_text("nonsense 1 2\n", encoding="utf-8")
    with pytest.raises(LoadError, match="header"):
        load_mapping(bad)
    short = tmp_path / "short.txt"
    short.write_text("ridge 2 2 0.5\n1.0 2.0\n", encoding="utf-8")
    with pytest.raises(LoadError, match="rows"):
        load_mapping(short)
