import numpy as np
import pytest

from backflow.channels import (
    QuantumChannel,
    compose,
    convert,
    extend_with_identity,
    intermediate_map,
    min_output_eigenvalue_sampled,
    random_cptp,
    unvec,
    vec,
    verify_cptp,
)
from backflow.errors import (
    DimensionError,
    InvertibilityError,
    ParameterError,
    RepresentationError,
)
from backflow.linalg import PAULIS, SIGMA_X, SIGMA_Z, DensityMatrix, random_hermitian, random_state, trace_norm

BELL = DensityMatrix.pure([1, 0, 0, 1]).matrix


def transpose_channel():
    p = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            e = np.zeros((2, 2), dtype=complex)
            e[i, j] = 1.0
            p[:, i + 2 * j] = vec(e.T)
    return QuantumChannel.from_superop(p)


def choi_assembly_oracle(apply_fn, d):
    j = np.zeros((d * d, d * d), dtype=complex)
    for i in range(d):
        for k in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[i, k] = 1.0
            j += np.kron(e, apply_fn(e))
    return j


class TestVec:
    def test_column_stacking(self):
        m = np.array([[1, 3], [2, 4]], dtype=complex)
        np.testing.assert_array_equal(vec(m), [1, 2, 3, 4])
        np.testing.assert_array_equal(unvec(vec(m)), m)


class TestConvert:
    def test_identity_choi_spectrum(self):
        ch = convert(QuantumChannel.identity(2), "choi")
        np.testing.assert_allclose(np.linalg.eigvalsh(ch.choi), [0, 0, 0, 2], atol=1e-12)

    def test_depolarizing_choi_matches_assembly_oracle(self):
        dep = QuantumChannel.depolarizing(2)
        oracle = choi_assembly_oracle(lambda e: np.eye(2) * np.trace(e) / 2, 2)
        np.testing.assert_allclose(dep.choi, oracle, atol=1e-12)
        np.testing.assert_allclose(np.linalg.eigvalsh(dep.choi), [0.5] * 4, atol=1e-12)

    def test_superop_matches_direct_application(self):
        ch = random_cptp(2, 4, seed=11)
        rho = random_state(2, 2, 3).matrix
        direct = sum(k @ rho @ k.conj().T for k in ch.kraus)
        np.testing.assert_allclose(unvec(ch.superop @ vec(rho)), direct, atol=1e-9)

    def test_round_trips(self):
        ch = random_cptp(2, 3, seed=5)
        rho = random_state(2, 2, 9).matrix
        for path in (("choi", "kraus"), ("superop", "choi"), ("kraus", "superop")):
            other = convert(convert(ch, path[0]), path[1])
            np.testing.assert_allclose(
                other.apply_matrix(rho), ch.apply_matrix(rho), atol=1e-8)

    def test_choi_consistency_after_caching(self):
        ch = random_cptp(3, 2, seed=2)
        np.testing.assert_allclose(
            ch.choi, choi_assembly_oracle(ch.apply_matrix, 3), atol=1e-8)

    def test_kraus_of_non_cp_channel_rejected(self):
        with pytest.raises(RepresentationError) as err:
            convert(transpose_channel(), "kraus")
        assert err.value.min_eigenvalue == pytest.approx(-1.0, abs=1e-9)

    def test_unknown_target(self):
        with pytest.raises(ParameterError):
            convert(QuantumChannel.identity(2), "bloch")


class TestApply:
    def test_identity(self):
        rho = random_state(2, 2, 1)
        np.testing.assert_allclose(
            QuantumChannel.identity(2).apply(rho).matrix, rho.matrix, atol=1e-12)

    def test_full_depolarizing(self):
        out = QuantumChannel.depolarizing(2).apply(DensityMatrix.pure([1, 0]))
        np.testing.assert_allclose(out.matrix, np.eye(2) / 2, atol=1e-12)

    def test_bit_flip_unitary(self):
        out = QuantumChannel.from_unitary(SIGMA_X).apply(DensityMatrix.pure([1, 0]))
        np.testing.assert_allclose(out.matrix, np.diag([0.0, 1.0]), atol=1e-12)

    def test_trace_preserved(self):
        ch = random_cptp(3, 2, seed=0)
        rho = random_state(3, 3, 1)
        assert np.trace(ch.apply(rho).matrix).real == pytest.approx(1.0, abs=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionError):
            QuantumChannel.identity(2).apply_matrix(np.eye(3))


class TestVerifyCptp:
    def test_unitary_channel(self):
        v = verify_cptp(QuantumChannel.from_unitary(SIGMA_X))
        assert v.cp and v.tp

    def test_transpose_map(self):
        v = verify_cptp(transpose_channel())
        assert not v.cp and v.tp
        assert v.min_choi_eig == pytest.approx(-1.0, abs=1e-9)

    def test_dephasing_kraus(self):
        ch = QuantumChannel.from_kraus(
            [np.sqrt(0.5) * np.eye(2), np.sqrt(0.5) * SIGMA_Z])
        v = verify_cptp(ch)
        assert v.cp and v.tp
        assert ch.cp_verdict == "yes" and ch.tp_verdict == "yes"


class TestIntermediateMap:
    def test_equal_channels_give_identity(self):
        ch = random_cptp(2, 3, seed=4)
        v = intermediate_map(ch, ch)
        np.testing.assert_allclose(v.superop, np.eye(4), atol=1e-9)

    def test_composition_reproduces_later(self):
        later = random_cptp(2, 4, seed=1)
        earlier = random_cptp(2, 2, seed=2)
        v = intermediate_map(later, earlier)
        np.testing.assert_allclose(
            compose(v, earlier).superop, later.superop, atol=1e-7)

    def test_singular_earlier_rejected(self):
        with pytest.raises(InvertibilityError) as err:
            intermediate_map(QuantumChannel.identity(2), QuantumChannel.depolarizing(2))
        assert err.value.smallest_singular_value < 1e-10


class TestExtendWithIdentity:
    def test_identity_extension(self):
        ext = extend_with_identity(QuantumChannel.identity(2), 3)
        np.testing.assert_allclose(ext.superop, np.eye(36), atol=1e-12)

    def test_unitary_on_bell(self):
        ext = extend_with_identity(QuantumChannel.from_unitary(SIGMA_X), 2)
        u = np.kron(SIGMA_X, np.eye(2))
        np.testing.assert_allclose(ext.apply_matrix(BELL), u @ BELL @ u.conj().T, atol=1e-12)

    def test_transpose_extension_on_bell(self):
        ext = extend_with_identity(transpose_channel(), 2)
        w = np.linalg.eigvalsh(ext.apply_matrix(BELL))
        assert w[0] == pytest.approx(-0.5, abs=1e-10)

    def test_product_input_factorizes(self):
        ch = random_cptp(2, 3, seed=6)
        rho = random_state(2, 2, 1).matrix
        sigma = random_state(3, 3, 2).matrix
        got = extend_with_identity(ch, 3).apply_matrix(np.kron(rho, sigma))
        np.testing.assert_allclose(got, np.kron(ch.apply_matrix(rho), sigma), atol=1e-9)

    def test_superop_path_matches_kraus_path(self):
        ch = random_cptp(2, 3, seed=8)
        as_superop = QuantumChannel.from_superop(ch.superop.copy())
        a = extend_with_identity(ch, 2).superop
        b = extend_with_identity(as_superop, 2).superop
        np.testing.assert_allclose(a, b, atol=1e-10)

    def test_preserves_verdicts(self):
        ch = random_cptp(2, 2, seed=9)
        ext = extend_with_identity(ch, 2)
        assert ext.cp_verdict == ch.cp_verdict
        assert ext.tp_residual == ch.tp_residual

    def test_bad_ancilla_dimension(self):
        with pytest.raises(ParameterError):
            extend_with_identity(QuantumChannel.identity(2), 0)


class TestRandomCptp:
    def test_single_kraus_is_unitary(self):
        ch = random_cptp(2, 1, seed=3)
        np.testing.assert_allclose(np.linalg.eigvalsh(ch.choi), [0, 0, 0, 2], atol=1e-10)

    def test_self_check(self):
        v = verify_cptp(random_cptp(2, 4, seed=3))
        assert v.cp and v.tp

    def test_deterministic(self):
        a = random_cptp(2, 3, seed=12)
        b = random_cptp(2, 3, seed=12)
        for ka, kb in zip(a.kraus, b.kraus):
            np.testing.assert_array_equal(ka, kb)

    def test_bad_kraus_count(self):
        with pytest.raises(ParameterError):
            random_cptp(2, 0, seed=0)


class TestContractionProperties:
    def test_trace_norm_contraction(self):
        # positive trace-preserving maps contract the trace norm on Hermitians
        rng = np.random.default_rng(123)
        for trial in range(100):
            t = random_cptp(2, int(rng.integers(1, 5)), rng)
            h = random_hermitian(2, rng)
            assert trace_norm(t.apply_matrix(h)) <= trace_norm(h) + 1e-9

    def test_cp_implies_positivity_sampling(self):
        for seed in range(5):
            ch = random_cptp(2, 3, seed=seed)
            assert min_output_eigenvalue_sampled(ch, 500, seed=seed) >= -1e-9

    def test_composition_associativity(self):
        a = random_cptp(2, 2, seed=1)
        b = random_cptp(2, 3, seed=2)
        c = random_cptp(2, 2, seed=3)
        np.testing.assert_allclose(
            compose(compose(a, b), c).superop, compose(a, compose(b, c)).superop,
            atol=1e-9)
