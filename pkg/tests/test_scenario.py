import json
import math

import numpy as np
import pytest

from cranlab.constants import ChannelMode
from cranlab.errors import (
    DimensionMismatch,
    InvalidConfig,
    InvalidOrder,
    NotPsd,
    ScenarioNotFound,
    SchemaError,
)
from cranlab.scenario import (
    ClusterConfig,
    QuantizationConfig,
    check_order,
    generate_channel,
    load_scenario,
    received_cov_ul,
    save_scenario,
)


class TestClusterConfig:

    def test_defaults(self):
        cfg = ClusterConfig(n_ue=2, n_ru=3, fronthaul_caps=(1, 2, 3), ue_antennas=2)
        assert cfg.ru_dim == 3
        assert cfg.ue_dim == 4
        assert np.allclose(cfg.ue_tx_cov[0], np.eye(2) / 2)
        assert cfg.pathloss_db.shape == (3, 2)

    def test_cap_count_mismatch(self):
        with pytest.raises(InvalidConfig):
            ClusterConfig(n_ue=1, n_ru=2, fronthaul_caps=(1.0,))

    def test_negative_cap(self):
        with pytest.raises(InvalidConfig):
            ClusterConfig(n_ue=1, n_ru=1, fronthaul_caps=(-1.0,))

    def test_infinite_cap_allowed(self):
        cfg = ClusterConfig(n_ue=1, n_ru=1, fronthaul_caps=(math.inf,))
        assert math.isinf(cfg.fronthaul_caps[0])

    def test_non_psd_ue_covariance(self):
        with pytest.raises(InvalidConfig):
            ClusterConfig(n_ue=1, n_ru=1, fronthaul_caps=(1.0,),
                          ue_tx_cov=(np.array([[-1.0]]),))

    def test_with_snr_db(self):
        cfg = ClusterConfig(n_ue=2, n_ru=1, fronthaul_caps=(1.0,)).with_snr_db(20)
        assert cfg.noise_var_ul == pytest.approx(0.01)
        assert cfg.noise_var_dl == 1.0

    def test_restricted_to_rus(self):
        cfg = ClusterConfig(n_ue=1, n_ru=3, fronthaul_caps=(1, 2, 3),
                            pathloss_db=[[0.0], [3.0], [6.0]])
        sub = cfg.restricted_to_rus([2, 0])
        assert sub.fronthaul_caps == (3.0, 1.0)
        assert sub.pathloss_db[:, 0].tolist() == [6.0, 0.0]

    def test_dict_round_trip_keeps_infinite_caps(self):
        cfg = ClusterConfig(n_ue=2, n_ru=2, fronthaul_caps=(2.0, math.inf), ru_antennas=2)
        data = json.loads(json.dumps(cfg.to_dict()))
        assert data["fronthaul_caps"][1] == "inf"
        back = ClusterConfig.from_dict(data)
        assert back.fronthaul_caps == cfg.fronthaul_caps
        assert back.ru_antennas == 2

    def test_tx_power_shortcut(self):
        cfg = ClusterConfig.from_dict({"schema_version": 1, "n_ue": 2, "n_ru": 1,
                                       "fronthaul_caps": [1.0], "ue_tx_power": [1.0, 4.0]})
        assert np.real(cfg.ue_tx_cov[1][0, 0]) == pytest.approx(4.0)

    def test_bad_schema_version(self):
        with pytest.raises(SchemaError):
            ClusterConfig.from_dict({"schema_version": 99, "n_ue": 1, "n_ru": 1,
                                     "fronthaul_caps": [1.0]})

    def test_missing_field(self):
        with pytest.raises(SchemaError):
            ClusterConfig.from_dict({"schema_version": 1, "n_ue": 1})


class TestScenarioFiles:

    def test_save_and_load(self, tmp_path):
        cfg = ClusterConfig(n_ue=2, n_ru=2, fronthaul_caps=(1.5, 2.5), noise_var_ul=0.3)
        path = tmp_path / "scenario.json"
        save_scenario(cfg, path)
        back = load_scenario(path)
        assert back.fronthaul_caps == (1.5, 2.5)
        assert back.noise_var_ul == 0.3

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioNotFound):
            load_scenario(tmp_path / "nope.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{not json")
        with pytest.raises(SchemaError):
            load_scenario(path)


class TestGenerateChannel:

    def test_same_seed_same_channel(self, small_cluster):
        a = generate_channel(small_cluster, 7)
        b = generate_channel(small_cluster, 7)
        assert np.array_equal(a.h_ul, b.h_ul)

    def test_different_frames_differ(self, small_cluster):
        a = generate_channel(small_cluster, 7, frame=0)
        b = generate_channel(small_cluster, 7, frame=1)
        assert not np.array_equal(a.h_ul, b.h_ul)

    def test_tdd_reciprocity(self, small_cluster):
        ch = generate_channel(small_cluster, 3)
        assert np.array_equal(ch.h_dl, ch.h_ul.T)

    def test_independent_downlink(self, small_cluster):
        ch = generate_channel(small_cluster, 3, mode=ChannelMode.INDEPENDENT)
        assert not np.allclose(ch.h_dl, ch.h_ul.T)

    def test_adding_an_ru_keeps_existing_blocks(self):
        small = ClusterConfig(n_ue=2, n_ru=2, fronthaul_caps=(1, 1))
        large = ClusterConfig(n_ue=2, n_ru=3, fronthaul_caps=(1, 1, 1))
        a = generate_channel(small, 5)
        b = generate_channel(large, 5)
        assert np.array_equal(a.h_ul, b.h_ul[:2, :])

    def test_pathloss_scales_blocks(self):
        flat = ClusterConfig(n_ue=1, n_ru=2, fronthaul_caps=(1, 1))
        lossy = ClusterConfig(n_ue=1, n_ru=2, fronthaul_caps=(1, 1), pathloss_db=[[0.0], [20.0]])
        a = generate_channel(flat, 9)
        b = generate_channel(lossy, 9)
        assert np.allclose(b.ul_block(1, 0), 0.1 * a.ul_block(1, 0))
        assert np.array_equal(b.ul_block(0, 0), a.ul_block(0, 0))

    def test_unit_variance_on_average(self):
        cfg = ClusterConfig(n_ue=8, n_ru=8, fronthaul_caps=(1,) * 8, ru_antennas=8)
        ch = generate_channel(cfg, 0)
        assert np.mean(np.abs(ch.h_ul) ** 2) == pytest.approx(1.0, rel=0.15)

    def test_negative_seed(self, small_cluster):
        with pytest.raises(InvalidConfig):
            generate_channel(small_cluster, -1)

    def test_received_covariance_is_psd(self, small_cluster):
        cov = received_cov_ul(small_cluster, generate_channel(small_cluster, 1))
        assert np.min(np.linalg.eigvalsh(cov)) >= small_cluster.noise_var_ul * (1 - 1e-9)


class TestQuantizationConfig:

    def test_isotropic(self):
        q = QuantizationConfig.isotropic([0.5, 2.0], ru_antennas=2)
        assert np.allclose(q.diag_block(1), 2.0 * np.eye(2))
        assert q.is_block_diagonal()

    def test_cross_blocks_detected(self):
        cov = np.array([[1.0, 0.5], [0.5, 1.0]])
        q = QuantizationConfig(cov, n_ru=2)
        assert not q.is_block_diagonal()
        assert not q.cross_blocks_zero(0, [1])
        assert q.cross_blocks_zero(0, [])

    def test_zero_matrix_allowed(self):
        q = QuantizationConfig(np.zeros((2, 2)), n_ru=2)
        assert q.is_block_diagonal()

    def test_rejects_non_psd(self):
        with pytest.raises(NotPsd):
            QuantizationConfig(np.diag([1.0, -1.0]), n_ru=2)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            QuantizationConfig(np.eye(3), n_ru=2)

    def test_restricted_to_rus(self):
        q = QuantizationConfig.isotropic([1.0, 2.0, 3.0])
        assert np.real(np.diag(q.restricted_to_rus([2, 0]).cov)).tolist() == [3.0, 1.0]


def test_check_order():
    assert check_order([2, 0, 1], 3) == (2, 0, 1)
    with pytest.raises(InvalidOrder):
        check_order([0, 0, 1], 3)
    with pytest.raises(InvalidOrder):
        check_order([0, 1], 3)


def test_scalar_channel_power_over_many_draws():
    cfg = ClusterConfig(n_ue=1, n_ru=1, fronthaul_caps=(1.0,))
    gains = [abs(generate_channel(cfg, seed).h_ul[0, 0]) ** 2 for seed in range(10_000)]
    assert np.mean(gains) == pytest.approx(1.0, rel=0.05)
