import numpy as np
import pytest

from backflow.channels import QuantumChannel, verify_cptp, intermediate_map
from backflow.dynamics import (
    DynamicalMapFamily,
    ProbabilityFunctions,
    RateFunctions,
    TimeGrid,
    adaptive_simpson,
    gamma_from_lambda,
    invertibility_scan,
    lambda_from_probs,
    lambda_from_rates,
    lambda_to_probs,
    pauli_channel,
    preset,
    probs_to_lambda,
)
from backflow.errors import (
    DomainError,
    IntegrationError,
    InterpolationError,
    ParameterError,
    SingularRateError,
)
from backflow.linalg import PAULIS, SIGMA_Z, DensityMatrix

EXAMPLE1_RATES = RateFunctions(lambda t: 1.0, lambda t: 1.0, np.sin)


class TestQuadrature:
    def test_polynomial(self):
        assert adaptive_simpson(lambda x: x**3, 0, 2) == pytest.approx(4.0, abs=1e-10)

    def test_sine_integral(self):
        assert adaptive_simpson(np.sin, 0, 3.0) == pytest.approx(1 - np.cos(3.0), abs=1e-10)

    def test_non_convergence(self):
        with pytest.raises(IntegrationError):
            adaptive_simpson(lambda x: np.sign(x - np.pi / 7), 0, 1.0, tol=1e-300, max_depth=3)


class TestLambdaFromRates:
    def test_example1_lambda3(self):
        lam = lambda_from_rates(EXAMPLE1_RATES, 1.0)
        assert lam[2] == pytest.approx(np.exp(-4.0), rel=1e-10)

    def test_example1_lambda1_closed_form(self):
        lam = lambda_from_rates(EXAMPLE1_RATES, 1.0)
        expected = np.exp(-2.0 * (1.0 + 1.0 - np.cos(1.0)))
        assert lam[0] == pytest.approx(expected, rel=1e-9)
        assert lam[1] == pytest.approx(expected, rel=1e-9)

    def test_zero_rates(self):
        lam = lambda_from_rates(RateFunctions(lambda t: 0, lambda t: 0, lambda t: 0), 2.0)
        np.testing.assert_allclose(lam, (1.0, 1.0, 1.0), atol=1e-12)

    def test_quadrature_matches_registered_integrals(self):
        plain = lambda_from_rates(EXAMPLE1_RATES, 2.5)
        registered = lambda_from_rates(preset("example1").rates, 2.5)
        np.testing.assert_allclose(plain, registered, rtol=1e-9)


class TestLambdaFromProbs:
    def test_example2_relations(self):
        r0 = lambda t: np.exp(-t)
        probs = ProbabilityFunctions(
            r0, lambda t: (1 - r0(t)) / 4, lambda t: (1 - r0(t)) / 4,
            lambda t: (1 - r0(t)) / 2)
        lam = lambda_from_probs(probs, 0.8)
        v = np.exp(-0.8)
        np.testing.assert_allclose(
            lam, (1.0, (3 * v - 1) / 2, (3 * v - 1) / 2, v), atol=1e-12)

    def test_identity_probabilities(self):
        probs = ProbabilityFunctions(lambda t: 1.0, lambda t: 0.0, lambda t: 0.0,
                                     lambda t: 0.0)
        np.testing.assert_allclose(lambda_from_probs(probs, 3.0), (1, 1, 1, 1), atol=1e-12)

    def test_lambda_zero_crossing_time(self):
        fam = preset("example2_exp")
        assert fam.lambda_at(np.log(3.0))[1] == pytest.approx(0.0, abs=1e-12)

    def test_probability_violation_rejected(self):
        probs = ProbabilityFunctions(lambda t: 1.2, lambda t: -0.2, lambda t: 0.0,
                                     lambda t: 0.0)
        with pytest.raises(DomainError):
            lambda_from_probs(probs, 1.0)

    def test_hadamard_inverse_relation(self):
        rng = np.random.default_rng(0)
        r = rng.dirichlet(np.ones(4))
        np.testing.assert_allclose(lambda_to_probs(probs_to_lambda(r)), r, atol=1e-10)


class TestGammaFromLambda:
    def test_round_trip_recovers_sin(self):
        fam = preset("example1")
        gam = gamma_from_lambda(fam.lambda_at, 2.0)
        assert gam[3] == pytest.approx(np.sin(2.0), abs=1e-6)
        assert gam[1] == pytest.approx(1.0, abs=1e-6)

    def test_static_dynamics(self):
        gam = gamma_from_lambda(lambda t: np.ones(4), 1.0)
        np.testing.assert_allclose(gam, (0, 0, 0, 0), atol=1e-12)

    def test_rates_sum_to_zero(self):
        fam = preset("example2_cos")
        gam = gamma_from_lambda(fam.lambda_at, 0.7, lams_dot=fam.lambda_dot_at)
        assert abs(sum(gam)) < 1e-8

    def test_singular_at_zero_crossing(self):
        fam = preset("example2_exp")
        with pytest.raises(SingularRateError):
            gamma_from_lambda(fam.lambda_at, np.log(3.0))


class TestChannelAt:
    def test_identity_at_time_zero(self):
        for name in ("example1", "example2_exp", "example2_cos"):
            ch = preset(name).channel_at(0.0)
            np.testing.assert_allclose(ch.superop, np.eye(4), atol=1e-9)

    def test_example2_cos_weights_at_pi(self):
        r = preset("example2_cos").probs_at(np.pi)
        np.testing.assert_allclose(r, [0.0, 0.25, 0.25, 0.5], atol=1e-12)

    def test_example1_bloch_contraction(self):
        ch = preset("example1").channel_at(1.0)
        out = ch.apply(DensityMatrix((np.eye(2) + SIGMA_Z) / 2))
        expected = (np.eye(2) + np.exp(-4.0) * SIGMA_Z) / 2
        np.testing.assert_allclose(out.matrix, expected, atol=1e-12)

    def test_pauli_eigenrelation(self):
        fam = preset("example2_cos")
        for t in np.linspace(0, 2 * np.pi, 7):
            lam = fam.lambda_at(t)
            ch = fam.channel_at(t)
            for k, sigma in enumerate(PAULIS):
                np.testing.assert_allclose(
                    ch.apply_matrix(sigma), lam[k] * sigma, atol=1e-9)

    def test_trace_preserving_on_grid(self):
        fam = preset("example2_cos")
        for t in np.linspace(0, 2 * np.pi, 9):
            v = verify_cptp(fam.channel_at(t))
            assert v.tp_residual <= 1e-9

    def test_negative_time_rejected(self):
        with pytest.raises(ParameterError):
            preset("example1").channel_at(-0.1)


class TestInvertibilityScan:
    def test_example1_no_flags(self):
        scan = invertibility_scan(preset("example1"), TimeGrid.linspace(10.0, 1000))
        assert not scan.flags.any()

    def test_example2_exp_flags_near_log3(self):
        scan = invertibility_scan(preset("example2_exp"), TimeGrid.linspace(10.0, 2000))
        assert any(abs(t - np.log(3.0)) < 0.01 for t in scan.flagged_times)

    def test_identity_dynamics_no_flags(self):
        fam = DynamicalMapFamily.from_probs(ProbabilityFunctions(
            lambda t: 1.0, lambda t: 0.0, lambda t: 0.0, lambda t: 0.0))
        scan = invertibility_scan(fam, TimeGrid.linspace(5.0, 100))
        assert not scan.flags.any()


class TestPresets:
    def test_example1_lambda3(self):
        assert preset("example1").lambda_at(2.0)[3] == pytest.approx(np.exp(-8.0), rel=1e-12)

    def test_example2_cos_at_pi(self):
        assert preset("example2_cos").lambda_at(np.pi)[3] == pytest.approx(0.0, abs=1e-12)

    def test_example2_exp_lambda3(self):
        assert preset("example2_exp").lambda_at(1.0)[3] == pytest.approx(np.exp(-1.0), rel=1e-12)

    def test_unknown_preset(self):
        with pytest.raises(ParameterError):
            preset("example3")


class TestRoundTrip:
    def test_rates_lambda_rates(self):
        rates = RateFunctions(
            lambda t: 0.5 + 0.2 * np.sin(t),
            lambda t: 0.8 + 0.1 * np.cos(2 * t),
            lambda t: 0.3,
        )
        fam = DynamicalMapFamily.from_rates(rates)
        for t in (0.5, 1.2, 2.7):
            gam = gamma_from_lambda(fam.lambda_at, t)
            assert gam[1] == pytest.approx(rates.gamma1(t), abs=1e-6)
            assert gam[2] == pytest.approx(rates.gamma2(t), abs=1e-6)
            assert gam[3] == pytest.approx(rates.gamma3(t), abs=1e-6)


class TestExample1Divisibility:
    def test_intermediate_map_not_cp_where_rate_negative(self):
        fam = preset("example1")
        v = intermediate_map(fam.channel_at(3.6), fam.channel_at(3.5))
        verdict = verify_cptp(v)
        assert not verdict.cp
        assert verdict.min_choi_eig < -1e-6


class TestTimeGrid:
    def test_validation(self):
        with pytest.raises(ParameterError):
            TimeGrid(np.array([0.0]))
        with pytest.raises(ParameterError):
            TimeGrid(np.array([0.5, 1.0]))
        with pytest.raises(ParameterError):
            TimeGrid(np.array([0.0, 1.0, 1.0]))

    def test_linspace(self):
        grid = TimeGrid.linspace(2.0, 5)
        assert len(grid) == 5
        assert grid.times[0] == 0.0


class TestChannelGrid:
    def test_off_grid_query_rejected(self):
        fam = DynamicalMapFamily.from_channel_grid(
            [0.0, 1.0], [QuantumChannel.identity(2), QuantumChannel.depolarizing(2)])
        with pytest.raises(InterpolationError):
            fam.channel_at(0.5)
        assert fam.channel_at(1.0) is not None

    def test_must_start_at_identity(self):
        with pytest.raises(DomainError):
            DynamicalMapFamily.from_channel_grid(
                [0.0, 1.0], [QuantumChannel.depolarizing(2), QuantumChannel.identity(2)])


class TestPauliChannel:
    def test_requires_unit_lambda0(self):
        with pytest.raises(DomainError):
            pauli_channel([0.9, 0.5, 0.5, 0.5])

    def test_non_cp_eigenvalues_detected(self):
        ch = pauli_channel([1.0, 1.2, 0.4, 0.4])
        assert ch.cp_verdict == "no"
        assert ch.tp_verdict == "yes"
