import math

import pytest
from hypothesis import given, strategies as st

from greenkeep.carbon import (
    CarbonBreakdown,
    CarbonDataError,
    CarbonTimeline,
    EnergyProfile,
    cold_energy,
    exec_energy,
    idle_energy,
    load_profile,
    to_carbon,
)

from conftest import EXAMPLE_PROFILE

MS_H = 3_600_000


class TestExecEnergy:
    def test_zero_duration(self):
        assert exec_energy(EXAMPLE_PROFILE, 100, 1, 0.0) == 0.0

    def test_hand_evaluation(self):
        # (0.001*100 + 3*1) * 2 s
        assert exec_energy(EXAMPLE_PROFILE, 100, 1, 2.0) == pytest.approx(6.2)

    def test_linear_in_duration(self):
        one = exec_energy(EXAMPLE_PROFILE, 64, 0.5, 3.0)
        two = exec_energy(EXAMPLE_PROFILE, 64, 0.5, 6.0)
        assert two == pytest.approx(2 * one)

    def test_negative_duration_rejected(self):
        with pytest.raises(ValueError):
            exec_energy(EXAMPLE_PROFILE, 100, 1, -1.0)

    @given(
        mem=st.floats(1, 1000), cpu=st.floats(0.1, 8), t=st.floats(0, 1000),
        scale=st.floats(0.1, 10),
    )
    def test_linearity_properties(self, mem, cpu, t, scale):
        base = exec_energy(EXAMPLE_PROFILE, mem, cpu, t)
        assert exec_energy(EXAMPLE_PROFILE, mem, cpu, t * scale) == pytest.approx(base * scale)
        # linearity in each resource holds for the underlying power sum
        p = EXAMPLE_PROFILE
        expected = (p.j_dram_mb_w * mem + p.j_cpu_core_w * cpu) * t
        assert base == pytest.approx(expected)


class TestIdleEnergy:
    def test_hand_evaluation(self):
        assert idle_energy(EXAMPLE_PROFILE, 100, 1, 60.0) == pytest.approx(37.2)

    def test_zero_duration(self):
        assert idle_energy(EXAMPLE_PROFILE, 100, 1, 0.0) == 0.0

    def test_idle_is_scaled_exec(self):
        # lambda_idle = 0.2: idle power is exactly 0.2x exec power
        for mem, cpu, t in [(100, 1, 60), (35, 2, 7), (512, 0.25, 3.5)]:
            assert idle_energy(EXAMPLE_PROFILE, mem, cpu, t) == pytest.approx(
                0.2 * exec_energy(EXAMPLE_PROFILE, mem, cpu, t))

    @given(mem=st.floats(1, 1000), cpu=st.floats(0.1, 8), t=st.floats(0, 1000))
    def test_idle_never_exceeds_exec(self, mem, cpu, t):
        assert idle_energy(EXAMPLE_PROFILE, mem, cpu, t) <= exec_energy(
            EXAMPLE_PROFILE, mem, cpu, t) + 1e-12

    def test_negative_duration_rejected(self):
        with pytest.raises(ValueError):
            idle_energy(EXAMPLE_PROFILE, 100, 1, -0.1)


class TestColdEnergy:
    def test_zero_duration(self):
        assert cold_energy(EXAMPLE_PROFILE, 1, 0.0) == 0.0

    def test_bench_figure(self):
        # 6.37 W/core for 112.2 ms
        assert cold_energy(EXAMPLE_PROFILE, 1, 0.1122) == pytest.approx(0.7147, abs=1e-4)

    def test_monotone_in_duration(self):
        values = [cold_energy(EXAMPLE_PROFILE, 1, t) for t in (0.1, 0.5, 1.0, 5.0)]
        assert values == sorted(values)
        assert len(set(values)) == len(values)


class TestToCarbon:
    def test_one_kwh(self):
        assert to_carbon(3.6e6, 100) == pytest.approx(100.0)

    def test_zero_energy(self):
        assert to_carbon(0.0, 500) == 0.0

    def test_zero_intensity(self):
        assert to_carbon(1e9, 0.0) == 0.0

    def test_negative_inputs_rejected(self):
        with pytest.raises(ValueError):
            to_carbon(-1.0, 100)
        with pytest.raises(ValueError):
            to_carbon(1.0, -100)


class TestEnergyProfile:
    def test_validation(self):
        with pytest.raises(ValueError):
            EnergyProfile(j_cpu_core_w=0, j_dram_mb_w=0.001)
        with pytest.raises(ValueError):
            EnergyProfile(j_cpu_core_w=3, j_dram_mb_w=0.001, lambda_idle=0.0)
        with pytest.raises(ValueError):
            EnergyProfile(j_cpu_core_w=3, j_dram_mb_w=0.001, lambda_idle=1.5)

    def test_presets_load(self):
        prof = load_profile("m5-xeon")
        assert prof.lambda_idle == 0.2
        assert prof.j_cpu_core_w == 5.0
        per_fn = load_profile("table2/float_operations")
        assert per_fn.j_cpu_core_w == pytest.approx(6.37)
        assert per_fn.lambda_idle == pytest.approx(0.5)

    def test_unknown_preset(self):
        with pytest.raises(KeyError):
            load_profile("nope")
        with pytest.raises(KeyError):
            load_profile("table2/nope")


class TestCarbonBreakdown:
    def test_total_is_component_sum(self):
        b = CarbonBreakdown(exec_g=1.5, idle_g=0.25, cold_g=0.05)
        assert b.total_g == pytest.approx(1.8)

    def test_addition(self):
        a = CarbonBreakdown(1, 2, 3)
        b = CarbonBreakdown(0.5, 0.5, 0.5)
        s = a + b
        assert (s.exec_g, s.idle_g, s.cold_g) == (1.5, 2.5, 3.5)


class TestTimeline:
    def test_step_lookup(self):
        tl = CarbonTimeline([(0, 100), (MS_H, 300)])
        assert tl.ci_at(MS_H // 2) == 100
        assert tl.ci_at(MS_H) == 300  # right-continuous at the boundary
        assert tl.ci_at(MS_H + 1) == 300

    def test_before_first_sample(self):
        tl = CarbonTimeline([(0, 100)])
        with pytest.raises(CarbonDataError):
            tl.ci_at(-1)

    def test_piecewise_constant_within_hour(self):
        tl = CarbonTimeline.hourly([50, 800, 120])
        for t1, t2 in [(10, MS_H - 1), (MS_H, 2 * MS_H - 1)]:
            assert tl.ci_at(t1) == tl.ci_at(t2)

    def test_validation(self):
        with pytest.raises(CarbonDataError):
            CarbonTimeline([])
        with pytest.raises(CarbonDataError):
            CarbonTimeline([(0, 100), (0, 200)])
        with pytest.raises(CarbonDataError):
            CarbonTimeline([(0, -5)])

    def test_alternating_builder(self):
        tl = CarbonTimeline.alternating(50, 800, hours=4)
        assert [ci for _, ci in tl.samples] == [50, 800, 50, 800]

    def test_span_carbon_default_uses_span_start(self):
        tl = CarbonTimeline.hourly([100, 1000])
        # span starts in hour 0 but crosses into hour 1
        g = tl.span_carbon(3.6e6, start_ms=MS_H - 1000, duration_s=10.0)
        assert g == pytest.approx(100.0)

    def test_span_carbon_split_integrates_exactly(self):
        tl = CarbonTimeline.hourly([100, 1000])
        # 10 s span: 1 s in hour 0, 9 s in hour 1, uniform power
        g = tl.span_carbon(3.6e6, start_ms=MS_H - 1000, duration_s=10.0, split_hours=True)
        assert g == pytest.approx(0.1 * 100 + 0.9 * 1000)

    def test_span_carbon_split_matches_default_within_hour(self):
        tl = CarbonTimeline.hourly([100, 1000])
        a = tl.span_carbon(1000.0, start_ms=500, duration_s=10.0)
        b = tl.span_carbon(1000.0, start_ms=500, duration_s=10.0, split_hours=True)
        assert a == pytest.approx(b)

    def test_csv_round_trip(self, tmp_path):
        path = tmp_path / "ci.csv"
        path.write_text(
            "hour_start_iso8601,ci_g_per_kwh\n"
            "2024-06-01T00:00:00Z,120.5\n"
            "2024-06-01T01:00:00Z,80.25\n"
        )
        tl = CarbonTimeline.from_csv(path)
        assert len(tl.samples) == 2
        assert tl.samples[1][0] - tl.samples[0][0] == MS_H
        assert tl.ci_at(tl.samples[0][0]) == 120.5

    def test_csv_bad_header(self, tmp_path):
        path = tmp_path / "ci.csv"
        path.write_text("time,ci\n2024-06-01T00:00:00Z,120\n")
        with pytest.raises(CarbonDataError):
            CarbonTimeline.from_csv(path)

    def test_csv_bad_value(self, tmp_path):
        path = tmp_path / "ci.csv"
        path.write_text("hour_start_iso8601,ci_g_per_kwh\n2024-06-01T00:00:00Z,abc\n")
        with pytest.raises(CarbonDataError):
            CarbonTimeline.from_csv(path)
