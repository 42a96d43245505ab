"""Tests for PCA, 1-NN, linear SVR, pipelines and fusion."""

import re
from pathlib import Path

import numpy as np
import pytest
from scipy import optimize

from skillseries.core.config import FamilySettings
from skillseries.core.errors import (
    BadParam,
    DataError,
    DegenerateInput,
    DimMismatch,
    EmptyModel,
    NoConvergence,
    OrderMismatch,
    TooFewSurgeons,
)
from skillseries.core.events import EventBus
from skillseries.core.trial import ALL_TARGETS, Criterion, Dataset, SkillLevel
from skillseries.features.base import FeatureFamily
from skillseries.features.extract import ExtractionParams, build_feature_table
from skillseries.models.fusion import (
    build_fusion_training_matrix,
    fit_fusion,
    fit_fusion_models,
    fused_predict,
    inner_louo_predictions,
)
from skillseries.models.knn import knn_classify, knn_fit
from skillseries.models.pca import (
    pca_fit,
    pca_from_text,
    pca_reconstruct,
    pca_to_text,
    pca_transform,
)
from skillseries.models.pipeline import (
    classify_levels,
    fit_classification_pipeline,
    fit_regression_pipeline,
    load_pipeline,
    predict_score,
    predict_targets,
    save_pipeline,
)
from skillseries.models.svr import (
    LinearSvrModel,
    best_bias,
    hinge_loss,
    svr_fit,
    svr_objective,
    svr_predict,
)

SETTINGS = FamilySettings(k_classify=2, k_predict=3, C=1.0, q=5)


class TestPca:
    """Test principal component analysis."""

    def test_components_orthonormal(self, rng: np.random.Generator) -> None:
        model = pca_fit(rng.standard_normal((20, 6)), 4)
        np.testing.assert_allclose(model.components @ model.components.T, np.eye(4), atol=1e-12)

    def test_variances_match_covariance_spectrum(self, rng: np.random.Generator) -> None:
        X = rng.standard_normal((30, 5)) * np.array([5.0, 3.0, 2.0, 1.0, 0.5])
        model = pca_fit(X, 3)
        eigenvalues = np.sort(np.linalg.eigvalsh(np.cov(X.T)))[::-1]
        np.testing.assert_allclose(model.explained_variance, eigenvalues[:3], rtol=1e-10)
        assert np.all(np.diff(model.explained_variance) <= 0)

    def test_k_clamped_to_rank(self, rng: np.random.Generator) -> None:
        model = pca_fit(rng.standard_normal((5, 10)), 10)
        assert model.k == 4
        assert model.requested_k == 10
        assert "clamped" in model.note

    def test_sign_convention(self, rng: np.random.Generator) -> None:
        model = pca_fit(rng.standard_normal((12, 5)), 3)
        pivots = np.argmax(np.abs(model.components), axis=1)
        assert np.all(model.components[np.arange(3), pivots] >= 0)

    def test_full_rank_reconstruction(self, rng: np.random.Generator) -> None:
        X = rng.standard_normal((6, 4))
        model = pca_fit(X, 4)
        np.testing.assert_allclose(pca_reconstruct(model, pca_transform(model, X)), X, atol=1e-10)

    def test_residual_non_increasing_in_k(self, rng: np.random.Generator) -> None:
        X = rng.standard_normal((15, 8)) @ rng.standard_normal((8, 8))
        residuals = []
        for k in range(1, 9):
            model = pca_fit(X, k)
            rebuilt = pca_reconstruct(model, pca_transform(model, X))
            residuals.append(float(np.sum((X - rebuilt) ** 2)))
        assert np.all(np.diff(residuals) <= 1e-9)
        assert residuals[-1] == pytest.approx(0.0, abs=1e-9)

    def test_points_on_a_line(self) -> None:
        t = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
        model = pca_fit(np.column_stack([t, 2 * t]), 1)
        np.testing.assert_allclose(model.components[0], np.array([1.0, 2.0]) / np.sqrt(5))
        assert model.explained_variance[0] == pytest.approx(12.5)
        assert pca_transform(model, np.array([1.0, 2.0])) == pytest.approx([np.sqrt(5)])

    def test_new_rows_use_training_mean(self) -> None:
        X = np.array([[0.0, 0.0], [2.0, 0.0], [4.0, 0.0]])
        model = pca_fit(X, 1)
        assert pca_transform(model, np.array([2.0, 0.0])) == pytest.approx([0.0])

    def test_errors(self, rng: np.random.Generator) -> None:
        with pytest.raises(DegenerateInput):
            pca_fit(np.ones((1, 3)), 1)
        model = pca_fit(rng.standard_normal((5, 3)), 2)
        with pytest.raises(DimMismatch):
            pca_transform(model, np.ones(4))

    def test_text_format_reloads(self, rng: np.random.Generator) -> None:
        model = pca_fit(rng.standard_normal((8, 4)), 2)
        loaded = pca_from_text(pca_to_text(model))
        np.testing.assert_array_equal(loaded.mean, model.mean)
        np.testing.assert_array_equal(loaded.components, model.components)
        np.testing.assert_array_equal(loaded.explained_variance, model.explained_variance)


class TestKnn:
    """Test the 1-nearest-neighbor classifier."""

    def test_nearest_label(self) -> None:
        model = knn_fit(
            np.array([[0.0, 0.0], [5.0, 5.0], [10.0, 0.0]]),
            [SkillLevel.NOVICE, SkillLevel.INTERMEDIATE, SkillLevel.EXPERT],
        )
        assert knn_classify(model, np.array([9.0, 1.0])) is SkillLevel.EXPERT
        assert knn_classify(model, np.array([4.0, 4.0])) is SkillLevel.INTERMEDIATE

    def test_tie_goes_to_first_training_point(self) -> None:
        model = knn_fit(np.array([[0.0], [2.0]]), [SkillLevel.EXPERT, SkillLevel.NOVICE])
        assert knn_classify(model, np.array([1.0])) is SkillLevel.EXPERT

    def test_errors(self) -> None:
        with pytest.raises(EmptyModel):
            knn_fit(np.empty((0, 2)), [])
        model = knn_fit(np.zeros((1, 2)), [SkillLevel.NOVICE])
        with pytest.raises(DimMismatch):
            knn_classify(model, np.zeros(3))


def dense_qp_objective(X: np.ndarray, y: np.ndarray, C: float, epsilon: float) -> float:
    """Primal QP over (w, b, slack+, slack-) solved by SLSQP from a feasible start."""
    n, k = X.shape
    w0, *_ = np.linalg.lstsq(np.column_stack([X, np.ones(n)]), y, rcond=None)
    residual = y - X @ w0[:k] - w0[k]
    over = np.maximum(0.0, residual - epsilon) + 1e-3
    under = np.maximum(0.0, -residual - epsilon) + 1e-3
    start = np.concatenate([w0, over, under])
    A = np.column_stack([X, np.ones(n)])
    upper = np.hstack([A, np.eye(n), np.zeros((n, n))])
    lower = np.hstack([-A, np.zeros((n, n)), np.eye(n)])
    constraints = [
        {"type": "ineq", "fun": lambda z: upper @ z - y + epsilon, "jac": lambda z: upper},
        {"type": "ineq", "fun": lambda z: lower @ z + y + epsilon, "jac": lambda z: lower},
    ]

    def objective(z: np.ndarray) -> float:
        return 0.5 * float(z[:k] @ z[:k]) + C * float(z[k + 1 :].sum())

    def gradient(z: np.ndarray) -> np.ndarray:
        return np.concatenate([z[:k], [0.0], np.full(2 * n, C)])

    result = optimize.minimize(
        objective,
        start,
        jac=gradient,
        method="SLSQP",
        bounds=[(None, None)] * (k + 1) + [(0.0, None)] * (2 * n),
        constraints=constraints,
        options={"maxiter": 2000, "ftol": 1e-14},
    )
    return float(result.fun)


class TestSvr:
    """Test the epsilon-insensitive linear SVR solver."""

    def test_realizable_linear_fit(self, rng: np.random.Generator) -> None:
        X = rng.standard_normal((25, 3))
        y = X @ np.array([1.5, -2.0, 0.5]) + 3.0
        model = svr_fit(X, y, C=100.0, epsilon=0.1, tol=1e-9)
        residual = np.abs(svr_predict(model, X) - y)
        assert residual.max() <= 0.1 + 1e-5
        np.testing.assert_allclose(model.weights, [1.5, -2.0, 0.5], atol=0.1)

    @pytest.mark.parametrize("C", [0.01, 1.0, 50.0])
    def test_no_perturbation_improves_objective(self, C: float) -> None:
        rng = np.random.default_rng(int(C * 100))
        X = rng.standard_normal((30, 4))
        y = X @ rng.standard_normal(4) + rng.standard_normal(30)
        model = svr_fit(X, y, C=C, epsilon=0.2, tol=1e-7)
        base = svr_objective(model, X, y)
        slack = 1e-5 * max(1.0, base)
        for _ in range(200):
            step = rng.standard_normal(5) * 10.0 ** rng.uniform(-4, 0)
            moved = LinearSvrModel(model.weights + step[:4], model.bias + step[4], C, 0.2)
            assert svr_objective(moved, X, y) >= base - slack

    def test_wide_tube_gives_flat_midpoint(self) -> None:
        X = np.array([[0.0], [1.0], [2.0], [3.0]])
        y = np.array([0.2, 0.0, 0.6, 0.4])
        model = svr_fit(X, y, C=1.0, epsilon=1.0)
        assert model.weights.tolist() == [0.0]
        assert model.bias == pytest.approx(0.3)
        assert model.iterations == 0

    def test_realizable_line_has_zero_loss(self) -> None:
        x = np.linspace(-2.0, 3.0, 15)[:, None]
        y = 0.7 * x[:, 0] - 1.2
        model = svr_fit(x, y, C=10.0, epsilon=0.1)
        assert hinge_loss(model, x, y) <= 1e-5
        assert abs(svr_predict(model, np.array([1.5])) - (0.7 * 1.5 - 1.2)) <= 0.1 + 1e-5

    @pytest.mark.parametrize("seed", range(20))
    def test_matches_dense_qp(self, seed: int) -> None:
        rng = np.random.default_rng(100 + seed)
        n, k = int(rng.integers(10, 41)), int(rng.integers(1, 6))
        C = float(rng.choice([0.1, 1.0, 10.0]))
        X = rng.standard_normal((n, k))
        y = X @ rng.standard_normal(k) + 0.5 * rng.standard_normal(n)
        ours = svr_objective(svr_fit(X, y, C=C, epsilon=0.1, tol=1e-10), X, y)
        oracle = dense_qp_objective(X, y, C, 0.1)
        assert ours <= oracle + 1e-6 * (1.0 + abs(oracle))
        assert abs(ours - oracle) <= 1e-4 * (1.0 + abs(oracle))

    def test_converges_on_near_singular_gram(self, rng: np.random.Generator) -> None:
        X = rng.standard_normal((32, 31))
        X -= X.mean(axis=0)
        y = rng.uniform(6.0, 30.0, size=32)
        for C in (1e-6, 1.0, 1e4):
            model = svr_fit(X, y, C=C, epsilon=0.1)
            assert np.all(np.isfinite(model.weights))
            assert model.gap <= 1e-8

    def test_hinge_loss_non_increasing_in_c(self, rng: np.random.Generator) -> None:
        X = rng.standard_normal((30, 3))
        y = X @ np.array([1.0, -1.0, 0.5]) + rng.standard_normal(30)
        losses = [
            hinge_loss(svr_fit(X, y, C=C, epsilon=0.1, tol=1e-10), X, y)
            for C in (1e-3, 1e-2, 0.1, 1.0, 10.0, 100.0)
        ]
        for smaller_c, larger_c in zip(losses, losses[1:]):
            assert larger_c <= smaller_c + 1e-6 * (1.0 + smaller_c)

    def test_predict_is_affine(self, rng: np.random.Generator) -> None:
        X = rng.standard_normal((20, 4))
        model = svr_fit(X, X @ np.ones(4), C=1.0)
        x1, x2 = rng.standard_normal(4), rng.standard_normal(4)
        for t in (0.0, 0.3, 1.0, 2.5):
            mixed = svr_predict(model, t * x1 + (1 - t) * x2)
            expected = t * svr_predict(model, x1) + (1 - t) * svr_predict(model, x2)
            assert abs(mixed - expected) <= 1e-10

    def test_best_bias_is_midpoint_of_flat_region(self) -> None:
        assert best_bias(np.array([0.0, 1.0]), 1.0) == pytest.approx(0.5)
        assert best_bias(np.array([0.0, 0.0, 10.0]), 0.0) == pytest.approx(0.0)
        assert best_bias(np.array([-5.0, 5.0]), 0.5) == pytest.approx(0.0)

    def test_iteration_cap(self, rng: np.random.Generator) -> None:
        X = rng.standard_normal((20, 3))
        y = X @ np.array([1.0, 2.0, 3.0])
        with pytest.raises(NoConvergence) as info:
            svr_fit(X, y, C=10.0, epsilon=0.01, tol=1e-12, max_iter=1)
        assert info.value.iterations == 1
        assert info.value.gap > 0

    def test_argument_checks(self) -> None:
        with pytest.raises(DegenerateInput):
            svr_fit(np.ones((1, 2)), np.ones(1), C=1.0)
        with pytest.raises(DimMismatch):
            svr_fit(np.ones((3, 2)), np.ones(2), C=1.0)
        with pytest.raises(BadParam):
            svr_fit(np.ones((3, 2)), np.ones(3), C=0.0)
        model = LinearSvrModel(np.ones(2), 0.0, 1.0, 0.1)
        assert svr_predict(model, np.array([1.0, 2.0])) == 3.0
        with pytest.raises(DimMismatch):
            svr_predict(model, np.ones(3))


def _training_data(rng: np.random.Generator, n: int = 10) -> tuple[np.ndarray, np.ndarray]:
    X = rng.standard_normal((n, 6))
    osats = rng.integers(1, 6, size=(n, 6)).astype(float)
    return X, np.column_stack([osats, osats.sum(axis=1)])


class TestPipelines:
    """Test per-family pipelines and bundle files."""

    def test_regression_pipeline_predicts_every_target(self, rng: np.random.Generator) -> None:
        X, targets = _training_data(rng)
        ids = [f"Suturing_B{i:03d}" for i in range(10)]
        pipeline = fit_regression_pipeline(
            X, targets, FeatureFamily.DCT, ExtractionParams(dct_q=2), SETTINGS, ids
        )
        assert pipeline.criteria == ALL_TARGETS
        assert pipeline.pca.k == 3
        predictions = predict_targets(pipeline, X[:2])
        assert predictions.shape == (2, 7)
        assert predictions[1, 6] == pytest.approx(predict_score(pipeline, X[1], Criterion.GRS))

    def test_fit_events_list_training_ids(
        self, rng: np.random.Generator, event_log: tuple
    ) -> None:
        bus, received = event_log
        X, targets = _training_data(rng, 4)
        ids = ["a", "b", "c", "d"]
        fit_regression_pipeline(
            X,
            targets,
            FeatureFamily.DFT,
            ExtractionParams(),
            SETTINGS,
            ids,
            criteria=(Criterion.GRS,),
            events=bus,
        )
        assert [e.data["component"] for e in received] == ["pca", "svr"]
        assert all(e.data["trial_ids"] == tuple(ids) for e in received)

    def test_no_convergence_names_criterion(self, rng: np.random.Generator) -> None:
        X, targets = _training_data(rng)
        with pytest.raises(NoConvergence) as info:
            fit_regression_pipeline(
                X,
                targets,
                FeatureFamily.DCT,
                ExtractionParams(),
                SETTINGS,
                [str(i) for i in range(10)],
                tol=1e-12,
                max_iter=1,
            )
        assert info.value.context["criterion"] == "RT"
        assert info.value.context["family"] == "DCT"

    def test_regression_bundle_reloads(self, tmp_path: Path, rng: np.random.Generator) -> None:
        X, targets = _training_data(rng)
        pipeline = fit_regression_pipeline(
            X,
            targets,
            FeatureFamily.DCT,
            ExtractionParams(dct_q=2),
            SETTINGS,
            [str(i) for i in range(10)],
        )
        path = tmp_path / "dct.toml"
        save_pipeline(pipeline, path)
        loaded = load_pipeline(path)
        assert loaded.params_hash() == pipeline.params_hash()
        assert loaded.train_ids == pipeline.train_ids
        np.testing.assert_array_equal(predict_targets(loaded, X), predict_targets(pipeline, X))

    def test_classification_bundle_reloads(
        self, tmp_path: Path, rng: np.random.Generator
    ) -> None:
        X = rng.standard_normal((6, 4))
        levels = [SkillLevel.NOVICE, SkillLevel.EXPERT] * 3
        pipeline = fit_classification_pipeline(
            X, levels, FeatureFamily.SMT, ExtractionParams(), SETTINGS, list("abcdef")
        )
        assert classify_levels(pipeline, X) == levels
        path = tmp_path / "smt.toml"
        save_pipeline(pipeline, path)
        assert classify_levels(load_pipeline(path), X) == levels

    def test_tampered_bundle_rejected(self, tmp_path: Path, rng: np.random.Generator) -> None:
        X, targets = _training_data(rng)
        pipeline = fit_regression_pipeline(
            X,
            targets,
            FeatureFamily.DCT,
            ExtractionParams(),
            SETTINGS,
            [str(i) for i in range(10)],
            criteria=(Criterion.GRS,),
        )
        path = tmp_path / "dct.toml"
        save_pipeline(pipeline, path)
        text = path.read_text()
        path.write_text(re.sub(r'params_hash = "\w+"', 'params_hash = "000000000000"', text))
        with pytest.raises(DataError):
            load_pipeline(path)

    def test_missing_bundle(self, tmp_path: Path) -> None:
        with pytest.raises(DataError):
            load_pipeline(tmp_path / "none.toml")

    def test_regression_pipeline_cannot_classify(self, rng: np.random.Generator) -> None:
        X, targets = _training_data(rng)
        pipeline = fit_regression_pipeline(
            X,
            targets,
            FeatureFamily.DCT,
            ExtractionParams(),
            SETTINGS,
            [str(i) for i in range(10)],
            criteria=(Criterion.GRS,),
        )
        with pytest.raises(DataError):
            classify_levels(pipeline, X)
        with pytest.raises(DataError):
            predict_score(pipeline, X[0], Criterion.RT)


class TestFusion:
    """Test least-squares fusion."""

    FAMILIES = (FeatureFamily.DCT, FeatureFamily.DFT, FeatureFamily.APEN)

    def test_exact_weights(self, rng: np.random.Generator) -> None:
        Y = rng.standard_normal((10, 3))
        model = fit_fusion(Y, Y @ np.array([0.5, 0.2, 0.3]), self.FAMILIES)
        np.testing.assert_allclose(model.weights, [0.5, 0.2, 0.3], atol=1e-10)
        assert model.training_residual == pytest.approx(0.0, abs=1e-18)
        assert fused_predict(model, Y[0]) == pytest.approx(float(Y[0] @ [0.5, 0.2, 0.3]))

    def test_matches_normal_equations(self, rng: np.random.Generator) -> None:
        Y = rng.standard_normal((12, 3))
        G = rng.standard_normal(12)
        model = fit_fusion(Y, G, self.FAMILIES)
        np.testing.assert_allclose(model.weights, np.linalg.solve(Y.T @ Y, Y.T @ G), atol=1e-10)
        assert model.training_residual > 0

    def test_no_perturbation_lowers_residual(self, rng: np.random.Generator) -> None:
        Y = rng.standard_normal((15, 3))
        G = rng.standard_normal(15)
        model = fit_fusion(Y, G, self.FAMILIES)
        for _ in range(100):
            moved = model.weights + rng.standard_normal(3) * 10.0 ** rng.uniform(-6, 0)
            residual = float(np.sum((Y @ moved - G) ** 2))
            assert residual >= model.training_residual - 1e-12

    def test_zero_column_gets_zero_weight(self, rng: np.random.Generator) -> None:
        Y = rng.standard_normal((10, 3))
        Y[:, 1] = 0.0
        model = fit_fusion(Y, rng.standard_normal(10), self.FAMILIES)
        assert model.weights[1] == pytest.approx(0.0, abs=1e-12)

    def test_minimum_norm_for_duplicate_columns(self, rng: np.random.Generator) -> None:
        column = rng.standard_normal(8)
        model = fit_fusion(
            np.column_stack([column, column]), column, self.FAMILIES[:2]
        )
        np.testing.assert_allclose(model.weights, [0.5, 0.5], atol=1e-10)

    def test_order_is_checked(self, rng: np.random.Generator) -> None:
        Y = rng.standard_normal((6, 2))
        model = fit_fusion(Y, Y[:, 0], self.FAMILIES[:2])
        with pytest.raises(OrderMismatch):
            fused_predict(model, Y[0], families=self.FAMILIES[1::-1])
        with pytest.raises(DimMismatch):
            fused_predict(model, np.ones(3))
        with pytest.raises(DimMismatch):
            fit_fusion(Y, Y[:5, 0], self.FAMILIES[:2])

    def test_inner_predictions_never_see_held_surgeon(
        self, small_dataset: Dataset, event_log: tuple
    ) -> None:
        bus, received = event_log
        extraction = ExtractionParams(dct_q=5)
        table = build_feature_table(small_dataset.trials, FeatureFamily.DCT, extraction)
        predictions = inner_louo_predictions(
            small_dataset.trials, table, extraction, SETTINGS, events=bus
        )
        assert predictions.shape == (len(small_dataset), 7)
        assert received
        for event in received:
            held = event.data["inner_surgeon"]
            owners = {small_dataset.get(t).surgeon_id for t in event.data["trial_ids"]}
            assert held not in owners

    def test_inner_predictions_need_two_surgeons(self, small_dataset: Dataset) -> None:
        trials = small_dataset.by_surgeon()["B"]
        extraction = ExtractionParams(dct_q=5)
        table = build_feature_table(trials, FeatureFamily.DCT, extraction)
        with pytest.raises(TooFewSurgeons):
            inner_louo_predictions(trials, table, extraction, SETTINGS)

    def test_training_matrix_and_models(self, small_dataset: Dataset) -> None:
        extraction = ExtractionParams(dct_q=5, dft_q=5)
        families = (FeatureFamily.DCT, FeatureFamily.DFT)
        tables = {
            f: build_feature_table(small_dataset.trials, f, extraction) for f in families
        }
        settings = {f: SETTINGS for f in families}
        Y, G = build_fusion_training_matrix(
            small_dataset.trials, families, tables, extraction, settings, inner_split_seed=0
        )
        assert Y.shape == (len(small_dataset), 2)
        assert G.tolist() == [t.labels.grs for t in small_dataset]

        inner = {
            f: inner_louo_predictions(small_dataset.trials, tables[f], extraction, SETTINGS)
            for f in families
        }
        np.testing.assert_array_equal(inner[FeatureFamily.DCT][:, 6], Y[:, 0])
        targets = np.vstack([t.labels.targets() for t in small_dataset])
        models = fit_fusion_models(
            inner, targets, families, small_dataset.trial_ids, events=EventBus()
        )
        assert list(models) == list(ALL_TARGETS)
        assert models[Criterion.GRS].families == families
