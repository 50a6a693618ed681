import numpy as np
import pytest

from csib.attacks import AttackConfig, attack_inputs, evaluate_robustness, fgsm, pgd
from csib.errors import ConfigError
from csib.nn import Layer, ModelGraph, init_model


def rand(shape, seed):
    return np.random.default_rng(seed).standard_normal(shape)


def linear_model(w):
    w = np.asarray(w, dtype=np.float64).reshape(-1, 1)
    return ModelGraph([Layer(w, np.zeros(1), "identity")], np.zeros(1), [])


def trained_like_model(seed=0):
    # random small nonlinear model; attacks only need differentiability
    return init_model(3, encoder_widths=(8, 6), decoder_widths=(6,), seed=seed, noise_init=0.0)


class TestFgsm:
    def test_analytic_linear_case(self):
        # w=[1,-2], x=0, y=1: dMSE/dx = 2(yhat-y)w = [-2, 4], sign = [-1, 1]
        model = linear_model([1.0, -2.0])
        adv = fgsm(model, [[0.0, 0.0]], [[1.0]], epsilon=0.25)
        np.testing.assert_allclose(adv, [[-0.25, 0.25]])

    def test_zero_epsilon_identity(self):
        model = linear_model([1.0, -2.0])
        x = rand((5, 2), 0)
        adv = fgsm(model, x, rand((5, 1), 1), epsilon=0.0)
        np.testing.assert_array_equal(adv, x)

    def test_exact_fit_warns_and_returns_input(self):
        model = linear_model([1.0, 0.0])
        x = np.array([[2.0, 3.0]])
        y = np.array([[2.0]])  # prediction == target -> zero gradient
        with pytest.warns(UserWarning, match="zero"):
            adv = fgsm(model, x, y, epsilon=0.1)
        np.testing.assert_array_equal(adv, x)

    def test_perturbation_magnitude(self):
        model = trained_like_model()
        x = rand((20, 3), 2)
        y = rand((20, 1), 3)
        adv = fgsm(model, x, y, epsilon=0.1)
        delta = np.abs(adv - x)
        # wherever gradient is nonzero the step is exactly epsilon
        assert np.all((delta == 0.0) | np.isclose(delta, 0.1, atol=1e-15))


class TestPgd:
    def test_single_step_large_alpha_equals_fgsm(self):
        model = trained_like_model(1)
        x = rand((10, 3), 4)
        y = rand((10, 1), 5)
        rho = 0.2
        adv_pgd = pgd(model, x, y, rho=rho, alpha=0.5, steps=1)
        adv_fgsm = fgsm(model, x, y, epsilon=rho)
        np.testing.assert_allclose(adv_pgd, adv_fgsm, atol=1e-15)

    def test_containment_exact(self):
        model = trained_like_model(2)
        for seed in range(25):
            x = rand((40, 3), seed)
            y = rand((40, 1), seed + 100)
            adv = pgd(model, x, y, rho=0.3, alpha=0.1, steps=5)
            assert np.max(np.abs(adv - x)) <= 0.3 + 1e-12

    def test_attack_increases_mse_on_most_points(self):
        from csib.conditional import mse
        from csib.nn import predict

        model = trained_like_model(3)
        gen = np.random.default_rng(6)
        wins = 0
        trials = 40
        for i in range(trials):
            x = gen.standard_normal((8, 3))
            y = gen.standard_normal((8, 1))
            adv = pgd(model, x, y, rho=0.3, alpha=0.1, steps=5)
            if mse(y, predict(model, adv)) >= mse(y, predict(model, x)):
                wins += 1
        assert wins / trials >= 0.95


class TestEvaluateRobustness:
    def test_zero_epsilon_clean_equals_attacked(self):
        model = trained_like_model(4)
        x = rand((30, 3), 7)
        y = rand((30, 1), 8)
        report = evaluate_robustness(model, x, y, AttackConfig(kind="fgsm", epsilon=0.0))
        assert report["clean_rmse"] == report["attacked_rmse"]
        assert report["n"] == 30

    def test_default_parameters_accepted(self):
        cfg = AttackConfig(kind="pgd", epsilon=0.1, rho=0.3, alpha=0.1, steps=5)
        assert cfg.rho == 0.3 and cfg.alpha == 0.1 and cfg.steps == 5

    def test_deterministic_report(self):
        model = trained_like_model(5)
        x = rand((15, 3), 9)
        y = rand((15, 1), 10)
        cfg = AttackConfig(kind="pgd")
        assert evaluate_robustness(model, x, y, cfg) == evaluate_robustness(model, x, y, cfg)

    def test_clip_flag_respected(self):
        model = trained_like_model(6)
        x = np.clip(rand((10, 3), 11), 0, 1)
        y = rand((10, 1), 12)
        adv = attack_inputs(model, x, y, AttackConfig(kind="pgd", clip_unit=True))
        assert adv.min() >= 0.0 and adv.max() <= 1.0

    def test_config_validation(self):
        with pytest.raises(ConfigError):
            AttackConfig(kind="ddos")
        with pytest.raises(ConfigError):
            AttackConfig(epsilon=-0.1)
        with pytest.raises(ConfigError):
            AttackConfig(steps=0)
