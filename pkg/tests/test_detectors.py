import numpy as np
import pytest

from etcpn.detectors import (
    DetectorConfig,
    KernelSpec,
    OneClassModel,
    load_model,
    predict,
    rbf_kernel,
    save_model,
    score,
    train_ee,
    train_ocsvm,
    train_svdd,
)
from etcpn.errors import DimensionError, TrainingError


def blob(rng, center, n, spread=0.3):
    return center + spread * rng.standard_normal((n, 2))


class TestOcsvm:
    def test_separated_blob_is_anomalous(self):
        rng = np.random.default_rng(0)
        train = blob(rng, np.array([0.0, 0.0]), 120)
        other = blob(rng, np.array([8.0, 8.0]), 60)
        model = train_ocsvm(train, nu=0.12)
        assert np.all(score(model, other) > 0)
        # most training points stay inside
        assert predict(model, train).mean() <= 0.12 + 1.0 / len(train)

    def test_two_identical_points_nu_one(self):
        X = np.array([[1.0, 2.0], [1.0, 2.0]])
        model = train_ocsvm(X, nu=1.0)
        assert np.allclose(np.sort(model.alpha), [0.5, 0.5])

    def test_nu_property_on_500_samples(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((500, 3))
        nu = 0.12
        model = train_ocsvm(X, nu=nu)
        N = 500
        outlier_frac = predict(model, X).mean()
        # support vectors counted on the retained coefficients
        sv_frac = len(model.alpha) / N
        assert outlier_frac <= nu + 1.0 / N
        assert sv_frac >= nu - 1.0 / N

    def test_rejects_single_sample_and_nonfinite(self):
        with pytest.raises(TrainingError):
            train_ocsvm(np.ones((1, 2)))
        with pytest.raises(TrainingError):
            train_ocsvm(np.array([[1.0, np.nan], [0.0, 1.0]]))


class TestSvdd:
    def test_predictions_match_ocsvm_under_equal_rbf(self):
        rng = np.random.default_rng(2)
        for trial in range(10):
            X = rng.standard_normal((60, 2)) * rng.uniform(0.5, 2.0)
            probes = rng.standard_normal((40, 2)) * 2.0
            kernel = KernelSpec(gamma=0.35)
            a = train_ocsvm(X, nu=0.12, kernel=kernel)
            b = train_svdd(X, nu=0.12, kernel=kernel)
            assert np.array_equal(predict(a, probes), predict(b, probes))

    def test_single_training_point(self):
        model = train_svdd(np.array([[0.5, -0.5]]), nu=0.2)
        assert score(model, np.array([0.5, -0.5])) <= 0
        assert score(model, np.array([2.0, 2.0])) > 0

    def test_nu_property(self):
        rng = np.random.default_rng(3)
        X = rng.standard_normal((500, 3))
        model = train_svdd(X, nu=0.12, kernel=KernelSpec(gamma=0.1))
        outlier_frac = predict(model, X).mean()
        sv_frac = len(model.alpha) / 500
        assert outlier_frac <= 0.12 + 1.0 / 500
        assert sv_frac >= 0.12 - 1.0 / 500


class TestEllipticEnvelope:
    def test_flags_contamination_fraction_of_training(self):
        rng = np.random.default_rng(4)
        for n in (100, 333, 500):
            X = rng.standard_normal((n, 2))
            model = train_ee(X, contamination=0.05)
            flagged = int(predict(model, X).sum())
            assert abs(flagged - int(0.05 * n)) <= 1

    def test_constant_coordinate_still_defined(self):
        rng = np.random.default_rng(5)
        X = np.column_stack([rng.standard_normal(50), np.full(50, 3.0)])
        model = train_ee(X, contamination=0.1)
        assert np.isfinite(score(model, X)).all()

    def test_center_never_anomalous(self):
        rng = np.random.default_rng(6)
        X = rng.standard_normal((80, 3)) + 5.0
        model = train_ee(X)
        assert score(model, model.mean) == -model.tau2
        assert not predict(model, model.mean)

    def test_needs_more_samples_than_dims(self):
        with pytest.raises(TrainingError):
            train_ee(np.eye(3))

    def test_score_monotone_along_rays(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((120, 2))
        model = train_ee(X)
        direction = np.array([0.7, -0.3])
        radii = np.linspace(0.0, 5.0, 30)
        vals = [score(model, model.mean + t * direction) for t in radii]
        assert np.all(np.diff(vals) >= -1e-12)


class TestScorePredict:
    def test_sign_convention_shared(self):
        rng = np.random.default_rng(8)
        X = rng.standard_normal((100, 2))
        far = np.array([30.0, 30.0])
        for model in (train_ocsvm(X), train_svdd(X), train_ee(X)):
            assert score(model, far) > 0
            assert predict(model, far)

    def test_score_is_locally_continuous(self):
        rng = np.random.default_rng(9)
        X = rng.standard_normal((80, 2))
        for model in (train_ocsvm(X), train_svdd(X), train_ee(X)):
            x = np.array([0.4, -0.2])
            base = score(model, x)
            for eps in (1e-3, 1e-5, 1e-7):
                assert abs(score(model, x + eps) - base) < 100 * eps + 1e-9

    def test_dimension_mismatch(self):
        X = np.random.default_rng(10).standard_normal((50, 3))
        model = train_ee(X)
        with pytest.raises(DimensionError):
            score(model, np.zeros(2))

    def test_determinism(self):
        rng = np.random.default_rng(11)
        X = rng.standard_normal((200, 2))
        a = train_ocsvm(X, nu=0.12)
        b = train_ocsvm(X.copy(), nu=0.12)
        assert np.array_equal(a.alpha, b.alpha)
        assert a.rho == b.rho


class TestSaveLoad:
    @pytest.mark.parametrize("kind", ["ocsvm", "svdd", "ee"])
    def test_round_trip_preserves_scores(self, kind):
        rng = np.random.default_rng(12)
        X = rng.standard_normal((90, 2))
        trainer = {"ocsvm": train_ocsvm, "svdd": train_svdd, "ee": train_ee}[kind]
        model = trainer(X)
        text = save_model(model)
        back = load_model(text)
        probes = rng.standard_normal((25, 2)) * 2
        assert np.allclose(score(model, probes), score(back, probes), atol=0, rtol=0)


class TestConfig:
    def test_defaults(self):
        cfg = DetectorConfig()
        assert cfg.nu == 0.12 and cfg.gamma_svdd == 0.1
        assert cfg.contamination == 0.05 and cfg.gamma_ocsvm == "scale"

    def test_validation(self):
        with pytest.raises(DimensionError):
            DetectorConfig(nu=0.0)
        with pytest.raises(DimensionError):
            DetectorConfig(contamination=0.7)

    def test_scale_rule(self):
        rng = np.random.default_rng(13)
        X = rng.standard_normal((40, 4)) * 2.0
        g = KernelSpec().resolve(X)
        assert np.isclose(g, 1.0 / (4 * X.var()))
