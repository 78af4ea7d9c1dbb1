import math

import numpy as np
import pytest

from cranlab.constants import Receiver, UplinkCompression
from cranlab.errors import CrossBlocksNotZero, DimensionMismatch, InvalidOrder, SingularQuantizer
from cranlab.scenario import ChannelRealization, ClusterConfig, QuantizationConfig, generate_channel
from cranlab.uplink import (
    UplinkStrategy,
    default_decoding_order,
    default_decompression_order,
    evaluate_uplink,
    ul_fronthaul_indep,
    ul_fronthaul_wyner_ziv,
    ul_rate_linear,
    ul_rate_sic,
    weighted_decoding_order,
)
from conftest import entropy_bits, random_instance, random_psd


def histogram_mi_bits(a, b, bins=100):
    joint, _, _ = np.histogram2d(a, b, bins=bins)
    p = joint / joint.sum()
    independent = p.sum(axis=1, keepdims=True) @ p.sum(axis=0, keepdims=True)
    nz = p > 0
    return float(np.sum(p[nz] * np.log2(p[nz] / independent[nz])))


def unit_channel(h):
    h = np.atleast_2d(np.asarray(h, dtype=complex))
    return ChannelRealization(h_ul=h, h_dl=h.T.copy(), seed=0, ru_antennas=1, ue_antennas=1)


class TestAgainstOracle:

    @pytest.mark.parametrize("seed", range(20))
    def test_linear(self, seed, oracle):
        cfg, ch, q, _ = random_instance(seed)
        assert np.allclose(ul_rate_linear(cfg, ch, q), oracle.ul_rate_linear(cfg, ch, q),
                           atol=1e-8)

    @pytest.mark.parametrize("seed", range(20))
    def test_sic(self, seed, oracle):
        cfg, ch, q, rng = random_instance(seed)
        order = list(rng.permutation(cfg.n_ue))
        assert np.allclose(ul_rate_sic(cfg, ch, q, order), oracle.ul_rate_sic(cfg, ch, q, order),
                           atol=1e-8)

    @pytest.mark.parametrize("seed", range(20))
    def test_fronthaul_indep(self, seed, oracle):
        cfg, ch, q, _ = random_instance(seed)
        assert np.allclose(ul_fronthaul_indep(cfg, ch, q), oracle.ul_fronthaul_indep(cfg, ch, q),
                           atol=1e-8)

    @pytest.mark.parametrize("seed", range(20))
    def test_fronthaul_wyner_ziv(self, seed, oracle):
        cfg, ch, q, rng = random_instance(seed)
        order = list(rng.permutation(cfg.n_ru))
        assert np.allclose(ul_fronthaul_wyner_ziv(cfg, ch, q, order),
                           oracle.ul_fronthaul_wyner_ziv(cfg, ch, q, order), atol=1e-8)


class TestRateProperties:

    @pytest.mark.parametrize("seed", range(10))
    def test_sic_sum_rate_does_not_depend_on_order(self, seed):
        cfg, ch, q, rng = random_instance(seed)
        natural = sum(ul_rate_sic(cfg, ch, q, range(cfg.n_ue)))
        shuffled = sum(ul_rate_sic(cfg, ch, q, rng.permutation(cfg.n_ue)))
        assert shuffled == pytest.approx(natural, abs=1e-9)

    @pytest.mark.parametrize("seed", range(10))
    def test_sic_beats_linear(self, seed):
        cfg, ch, q, _ = random_instance(seed)
        assert sum(ul_rate_sic(cfg, ch, q, range(cfg.n_ue))) >= \
            sum(ul_rate_linear(cfg, ch, q)) - 1e-9

    @pytest.mark.parametrize("seed", range(20))
    def test_coarser_quantization_never_helps(self, seed):
        cfg, ch, q, rng = random_instance(seed)
        coarser = QuantizationConfig.from_blocks(
            [q.diag_block(j) + random_psd(rng, cfg.ru_antennas, 0.5) for j in range(cfg.n_ru)])
        order = list(range(cfg.n_ue))
        pairs = [(ul_rate_linear(cfg, ch, q), ul_rate_linear(cfg, ch, coarser)),
                 (ul_rate_sic(cfg, ch, q, order), ul_rate_sic(cfg, ch, coarser, order)),
                 (ul_fronthaul_indep(cfg, ch, q), ul_fronthaul_indep(cfg, ch, coarser))]
        for fine_values, coarse_values in pairs:
            assert all(c <= f + 1e-9 for f, c in zip(fine_values, coarse_values))

    def test_last_decoded_ue_sees_no_interference(self):
        cfg = ClusterConfig(n_ue=2, n_ru=1, fronthaul_caps=(1.0,))
        ch = unit_channel([[1.0, 1.0]])
        q = QuantizationConfig.isotropic([1.0])
        rates = ul_rate_sic(cfg, ch, q, [0, 1])
        assert rates[1] == pytest.approx(math.log2(1.5))
        assert rates[0] == pytest.approx(math.log2(4 / 3))

    @pytest.mark.parametrize("seed", range(10))
    def test_wyner_ziv_never_costs_more(self, seed):
        cfg, ch, q, rng = random_instance(seed)
        wz = ul_fronthaul_wyner_ziv(cfg, ch, q, rng.permutation(cfg.n_ru))
        indep = ul_fronthaul_indep(cfg, ch, q)
        assert all(w <= c + 1e-9 for w, c in zip(wz, indep))

    def test_first_decompressed_ru_pays_independent_cost(self):
        cfg, ch, q, _ = random_instance(4, n_ru=3)
        wz = ul_fronthaul_wyner_ziv(cfg, ch, q, [2, 0, 1])
        assert wz[2] == pytest.approx(ul_fronthaul_indep(cfg, ch, q)[2], abs=1e-10)

    def test_single_ru_wyner_ziv_equals_independent(self):
        cfg, ch, q, _ = random_instance(11, n_ru=1)
        assert ul_fronthaul_wyner_ziv(cfg, ch, q, [0]) == \
            pytest.approx(ul_fronthaul_indep(cfg, ch, q), abs=1e-12)


class TestChainRules:

    @pytest.mark.parametrize("seed", range(200))
    def test_sums_equal_joint_information(self, seed, oracle):
        cfg, ch, q, rng = random_instance(seed)
        base = cfg.noise_var_ul * np.eye(cfg.ru_dim) + q.cov
        signal = oracle.ul_signal(cfg, ch, range(cfg.n_ue))
        joint_rate = entropy_bits(signal + base) - entropy_bits(base)
        received = signal + cfg.noise_var_ul * np.eye(cfg.ru_dim)
        joint_fronthaul = entropy_bits(received + q.cov) - entropy_bits(q.cov)

        rates = ul_rate_sic(cfg, ch, q, rng.permutation(cfg.n_ue))
        costs = ul_fronthaul_wyner_ziv(cfg, ch, q, rng.permutation(cfg.n_ru))
        assert sum(rates) == pytest.approx(joint_rate, rel=1e-9, abs=1e-9)
        assert sum(costs) == pytest.approx(joint_fronthaul, rel=1e-9, abs=1e-9)


class TestScalarExample:
    """One UE, one RU, unit channel, power and noise."""

    def test_rate_and_cost(self, scalar_cluster):
        ch = unit_channel([[1.0]])
        q = QuantizationConfig.isotropic([1.0])
        assert ul_rate_linear(scalar_cluster, ch, q)[0] == pytest.approx(math.log2(1.5))
        assert ul_fronthaul_indep(scalar_cluster, ch, q)[0] == pytest.approx(math.log2(3.0))

    def test_matches_simulated_variances(self):
        rng = np.random.default_rng(2024)
        n = 1_000_000
        cfg = ClusterConfig(n_ue=1, n_ru=2, fronthaul_caps=(2.0, 2.0))
        ch = generate_channel(cfg, 6)
        alphas = [0.5, 0.8]
        q = QuantizationConfig.isotropic(alphas)

        def cn(shape, var):
            return np.sqrt(var / 2) * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))

        x = cn((1, n), 1.0)
        noise = cn((2, n), 1.0) + np.vstack([cn((1, n), a) for a in alphas])
        y = ch.h_ul @ x + noise

        def logdet(samples):
            cov = samples @ samples.conj().T / n
            return np.sum(np.log2(np.linalg.eigvalsh(cov)))

        simulated = logdet(y) - logdet(noise)
        assert ul_rate_linear(cfg, ch, q)[0] == pytest.approx(simulated, rel=0.01)


    def test_matches_histogram_mutual_information(self):
        """I and Q carry independent halves of the rate; each half is estimated from a 2-D histogram."""
        rng = np.random.default_rng(7)
        n = 1_000_000
        cfg = ClusterConfig(n_ue=1, n_ru=1, fronthaul_caps=(2.0,), noise_var_ul=0.25)
        q = QuantizationConfig.isotropic([0.25])
        x = np.sqrt(0.5) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        noise = np.sqrt(0.25) * (rng.standard_normal(n) + 1j * rng.standard_normal(n))
        y = x + noise
        estimate = histogram_mi_bits(x.real, y.real) + histogram_mi_bits(x.imag, y.imag)
        rate = ul_rate_linear(cfg, unit_channel([[1.0]]), q)[0]
        assert rate == pytest.approx(math.log2(3.0))
        assert estimate == pytest.approx(rate, rel=0.02)


class TestValidation:

    def test_cross_blocks_rejected(self, small_cluster):
        ch = generate_channel(small_cluster, 0)
        cov = np.eye(6) + 0.1 * np.ones((6, 6))
        q = QuantizationConfig(cov, n_ru=3, ru_antennas=2)
        with pytest.raises(CrossBlocksNotZero):
            ul_rate_linear(small_cluster, ch, q)

    def test_singular_quantizer_in_fronthaul(self, small_cluster):
        ch = generate_channel(small_cluster, 0)
        q = QuantizationConfig(np.zeros((6, 6)), n_ru=3, ru_antennas=2)
        ul_rate_linear(small_cluster, ch, q)
        with pytest.raises(SingularQuantizer):
            ul_fronthaul_indep(small_cluster, ch, q)

    def test_wrong_quantizer_size(self, small_cluster):
        ch = generate_channel(small_cluster, 0)
        with pytest.raises(DimensionMismatch):
            ul_rate_linear(small_cluster, ch, QuantizationConfig.isotropic([1.0, 1.0], 2))

    def test_bad_order(self, small_cluster):
        ch = generate_channel(small_cluster, 0)
        q = QuantizationConfig.isotropic([1.0] * 3, 2)
        with pytest.raises(InvalidOrder):
            ul_rate_sic(small_cluster, ch, q, [0, 0])


class TestOrders:

    def test_weighted_order_decodes_lowest_weight_first(self):
        assert weighted_decoding_order([3.0, 1.0, 2.0]) == [1, 2, 0]
        assert weighted_decoding_order([1.0, 1.0]) == [0, 1]

    def test_default_orders_are_permutations(self, small_cluster):
        ch = generate_channel(small_cluster, 2)
        assert sorted(default_decoding_order(small_cluster, ch)) == [0, 1]
        assert sorted(default_decompression_order(small_cluster, ch)) == [0, 1, 2]

    def test_default_decoding_order_is_by_strength(self):
        cfg = ClusterConfig(n_ue=2, n_ru=1, fronthaul_caps=(1.0,))
        assert default_decoding_order(cfg, unit_channel([[0.5, 2.0]])) == [1, 0]


class TestEvaluateUplink:

    def test_report(self, small_cluster):
        ch = generate_channel(small_cluster, 3)
        q = QuantizationConfig.isotropic([0.5] * 3, 2)
        strategy = UplinkStrategy(Receiver.SIC, UplinkCompression.WYNER_ZIV)
        report = evaluate_uplink(small_cluster, ch, q, strategy)
        assert len(report.per_ue_rates) == 2
        assert sorted(report.orders["decoding_order"]) == [0, 1]
        assert sorted(report.orders["decompression_order"]) == [0, 1, 2]
        assert report.to_dict()["sum_rate"] == pytest.approx(report.sum_rate)

    def test_feasibility_follows_caps(self, small_cluster):
        ch = generate_channel(small_cluster, 3)
        q = QuantizationConfig.isotropic([1e-6] * 3, 2)
        assert not evaluate_uplink(small_cluster, ch, q).feasible
        loose = small_cluster.with_uniform_cap(math.inf)
        assert evaluate_uplink(loose, ch, q).feasible
