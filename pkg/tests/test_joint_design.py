import numpy as np
import pytest

from cranlab.constants import FronthaulLink, Precoder
from cranlab.downlink import (
    DownlinkStrategy,
    dl_fronthaul_multivariate,
    dl_rate_linear,
    zero_forcing_plan,
)
from cranlab.errors import InvalidConfig
from cranlab.joint_design import design_multivariate_q, optimize_downlink
from cranlab.quantizer import fit_quantizers
from cranlab.scenario import ClusterConfig, generate_channel


@pytest.fixture
def wide_cluster():
    # more RU antennas than UE antennas: the downlink channel has a null space
    return ClusterConfig(n_ue=1, n_ru=3, fronthaul_caps=(2.0, 2.0, 2.0), noise_var_dl=0.1)


class TestMultivariateDesign:

    @pytest.mark.parametrize("seed", range(4))
    def test_never_worse_than_independent(self, wide_cluster, seed):
        ch = generate_channel(wide_cluster, seed)
        plan = zero_forcing_plan(wide_cluster, ch)
        indep = fit_quantizers(wide_cluster, ch, link=FronthaulLink.DL_INDEP, plan=plan)
        design = design_multivariate_q(wide_cluster, ch, plan)
        assert design.sum_rate >= sum(dl_rate_linear(wide_cluster, ch, plan, indep)) - 1e-9

    def test_meets_every_cap(self, wide_cluster):
        ch = generate_channel(wide_cluster, 2)
        plan = zero_forcing_plan(wide_cluster, ch)
        design = design_multivariate_q(wide_cluster, ch, plan)
        costs = dl_fronthaul_multivariate(plan, design.q, [0, 1, 2])
        assert all(c <= 2.0 + 1e-6 for c in costs)
        assert np.allclose(costs, design.per_ru_fronthaul)

    def test_square_channel_keeps_independent_fit(self):
        cfg = ClusterConfig(n_ue=2, n_ru=2, fronthaul_caps=(2.0, 2.0))
        ch = generate_channel(cfg, 1)
        plan = zero_forcing_plan(cfg, ch)
        design = design_multivariate_q(cfg, ch, plan, precoder=Precoder.DPC)
        indep = fit_quantizers(cfg, ch, link=FronthaulLink.DL_INDEP, plan=plan)
        assert design.null_mix == 0.0
        assert np.allclose(design.q.cov, indep.cov)

    def test_zero_mix_only(self, wide_cluster):
        ch = generate_channel(wide_cluster, 0)
        plan = zero_forcing_plan(wide_cluster, ch)
        assert design_multivariate_q(wide_cluster, ch, plan, null_mix=(0.0,)).null_mix == 0.0

    @pytest.mark.parametrize("mix", [1.0, -0.1])
    def test_mix_range(self, wide_cluster, mix):
        ch = generate_channel(wide_cluster, 0)
        plan = zero_forcing_plan(wide_cluster, ch)
        with pytest.raises(InvalidConfig):
            design_multivariate_q(wide_cluster, ch, plan, null_mix=(0.0, mix))


class TestOptimizeDownlink:

    @pytest.fixture
    def cluster(self):
        return ClusterConfig(n_ue=2, n_ru=3, fronthaul_caps=(3.0, 3.0, 3.0), noise_var_dl=0.1)

    def test_history_never_decreases(self, cluster):
        ch = generate_channel(cluster, 6)
        design = optimize_downlink(cluster, ch, max_rounds=3)
        assert all(b >= a for a, b in zip(design.history, design.history[1:]))
        assert design.objective == design.history[-1]
        assert design.objective == pytest.approx(design.report.sum_rate)
        design.plan.check_power(cluster)

    def test_weights_steer_the_search(self, cluster):
        ch = generate_channel(cluster, 6)
        design = optimize_downlink(cluster, ch, weights=[1.0, 0.0], max_rounds=3)
        assert design.objective == pytest.approx(design.report.per_ue_rates[0])

    def test_no_rounds(self, cluster):
        ch = generate_channel(cluster, 6)
        design = optimize_downlink(cluster, ch, max_rounds=0)
        assert len(design.history) == 1
        assert design.ue_power_weights == [1.0, 1.0]

    def test_dpc_strategy(self, cluster):
        ch = generate_channel(cluster, 3)
        design = optimize_downlink(cluster, ch, strategy=DownlinkStrategy(Precoder.DPC),
                                   max_rounds=1)
        assert design.report.sum_rate > 0

    def test_weight_count(self, cluster):
        ch = generate_channel(cluster, 6)
        with pytest.raises(InvalidConfig):
            optimize_downlink(cluster, ch, weights=[1.0])
