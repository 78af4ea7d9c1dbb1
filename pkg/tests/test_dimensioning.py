import pytest

from cranlab.constants import SplitId
from cranlab.dimensioning import (
    CpriProfile,
    compressed_line_rate,
    cpri_line_rate,
    cpri_option_for,
    exceeds_cpri_ceiling,
    harq_budget_check,
    max_one_way_latency_ms,
    split_c_bandwidth,
)
from cranlab.errors import InvalidConfig, InvalidRange
from cranlab.splits import all_splits, get_split_option


class TestCpri:

    def test_two_antenna_20mhz(self):
        rate = cpri_line_rate(CpriProfile(30.72e6, 15, 2))
        assert rate == pytest.approx(2.4576e9)
        assert cpri_option_for(rate) == 3

    def test_eight_antennas_hit_the_ceiling(self):
        rate = cpri_line_rate(CpriProfile(30.72e6, 15, 8))
        assert rate == pytest.approx(9.8304e9)
        assert cpri_option_for(rate) == 7
        assert not exceeds_cpri_ceiling(rate)

    def test_beyond_option_seven(self):
        rate = cpri_line_rate(CpriProfile(30.72e6, 15, 16))
        assert cpri_option_for(rate) is None
        assert exceeds_cpri_ceiling(rate)

    def test_single_antenna_option(self):
        assert cpri_option_for(cpri_line_rate(CpriProfile(30.72e6, 15, 1))) == 2

    def test_compression(self):
        profile = CpriProfile(30.72e6, 15, 8)
        assert compressed_line_rate(profile, 3.0) == pytest.approx(9.8304e9 / 3)
        with pytest.raises(InvalidRange):
            compressed_line_rate(profile, 0.5)

    @pytest.mark.parametrize("bits", [7, 21])
    def test_bit_width_range(self, bits):
        with pytest.raises(InvalidConfig):
            CpriProfile(30.72e6, bits, 1)

    def test_no_antennas(self):
        with pytest.raises(InvalidConfig):
            CpriProfile(30.72e6, 15, 0)


class TestHarqBudget:

    def test_just_inside_split_a(self):
        verdicts = harq_budget_check(0.9, 1.0)
        assert verdicts[SplitId.L2_A].feasible
        assert verdicts[SplitId.L2_A].remainder_ms == pytest.approx(0.2)
        assert not verdicts[SplitId.L2_B].feasible

    @pytest.mark.parametrize("latency, feasible", [
        (0.05, {"L2_A", "L2_B", "L2_C", "L2_D"}),
        (0.5, {"L2_A", "L2_C", "L2_D"}),
        (5.0, {"L2_C", "L2_D"}),
        (30.0, set()),
    ])
    def test_split_table(self, latency, feasible):
        verdicts = harq_budget_check(latency, 1.0)
        assert {s.value for s, v in verdicts.items() if v.feasible} == feasible

    def test_budget_is_strict(self):
        verdicts = harq_budget_check(1.0, 1.0)
        assert not verdicts[SplitId.L2_A].feasible
        assert verdicts[SplitId.L2_A].remainder_ms == pytest.approx(0.0)

    def test_asynchronous_splits_have_no_remainder(self):
        verdicts = harq_budget_check(0.5, 1.0)
        assert verdicts[SplitId.L2_C].remainder_ms is None
        assert verdicts[SplitId.L2_C].to_dict()["split"] == "L2_C"

    def test_negative_latency(self):
        with pytest.raises(InvalidRange):
            harq_budget_check(-0.1, 1.0)

    def test_max_one_way_latency(self):
        assert max_one_way_latency_ms(1.0) == pytest.approx(1.0)
        assert max_one_way_latency_ms(4.0) == 0.0


class TestSplitC:

    def test_control_overhead(self):
        assert split_c_bandwidth(100e6) == pytest.approx(110e6)
        assert split_c_bandwidth(136.4e6) == pytest.approx(150e6, rel=0.01)

    def test_positive_peak(self):
        with pytest.raises(InvalidRange):
            split_c_bandwidth(0.0)


class TestSplitOptions:

    def test_lookup_by_name(self):
        assert get_split_option("A").id is SplitId.L2_A
        assert get_split_option("l2_c").id is SplitId.L2_C
        assert get_split_option(SplitId.L2_D).display_name.startswith("Split D")

    def test_unknown_split(self):
        with pytest.raises(InvalidConfig):
            get_split_option("E")

    def test_timing_classes(self):
        synchronous = [s.id for s in all_splits() if s.synchronous]
        assert synchronous == [SplitId.L2_A, SplitId.L2_B]
