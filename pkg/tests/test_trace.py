import dataclasses

import pytest

from greenkeep.trace import (
    Bimodal,
    ColdStartTable,
    Deterministic,
    Poisson,
    SyntheticSpec,
    TraceError,
    build_cold_table,
    generate_trace,
    load_trace,
    split_by_pod,
    synthetic_cold_table,
    write_cold_log,
    write_trace,
)

from conftest import make_inv

HEADER = "ts_ms,function_id,pod_id,cpu_cores,mem_mb,exec_ms,runtime_tag,trigger_tag\n"


def write_rows(tmp_path, rows, name="trace.csv"):
    path = tmp_path / name
    path.write_text(HEADER + "".join(rows))
    return path


def simple_table():
    return ColdStartTable({("python", "http"): 250.0}, fallback_ms=800.0)


class TestLoadTrace:
    def test_well_formed_sorted(self, tmp_path):
        path = write_rows(tmp_path, [
            "3000,f1,p1,1.0,128,20,python,http\n",
            "1000,f1,p1,1.0,128,30,python,http\n",
            "2000,f2,p2,0.5,64,10,custom,timer\n",
        ])
        invs = load_trace(path, simple_table())
        assert [i.ts_ms for i in invs] == [1000, 2000, 3000]
        assert invs[0].cold_ms == 250.0        # table hit
        assert invs[1].cold_ms == 800.0        # fallback for (custom, timer)

    def test_negative_exec_names_row_and_field(self, tmp_path):
        path = write_rows(tmp_path, [
            "1000,f1,p1,1.0,128,30,python,http\n",
            "2000,f1,p1,1.0,128,-5,python,http\n",
        ])
        with pytest.raises(TraceError, match="row 3.*exec_ms"):
            load_trace(path, simple_table())

    def test_non_numeric_field(self, tmp_path):
        path = write_rows(tmp_path, ["1000,f1,p1,abc,128,30,python,http\n"])
        with pytest.raises(TraceError, match="row 2.*cpu_cores"):
            load_trace(path, simple_table())

    def test_pod_bound_to_two_functions(self, tmp_path):
        path = write_rows(tmp_path, [
            "1000,f1,p1,1.0,128,30,python,http\n",
            "2000,f2,p1,1.0,128,30,python,http\n",
        ])
        with pytest.raises(TraceError, match="bound to two functions"):
            load_trace(path, simple_table())

    def test_missing_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("ts_ms,function_id,pod_id\n1,f1,p1\n")
        with pytest.raises(TraceError, match="missing required columns"):
            load_trace(path, simple_table())

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_trace(tmp_path / "nope.csv", simple_table())

    def test_round_trip_identity(self, tmp_path):
        spec = SyntheticSpec(2, 2, 120, Poisson(0.5), seed=5)
        original = generate_trace(spec)
        path = tmp_path / "rt.csv"
        write_trace(original, path)
        loaded = load_trace(path, synthetic_cold_table(spec))
        key = lambda i: (i.ts_ms, i.function_id, i.pod_id, i.cpu_cores,
                         i.mem_mb, i.exec_ms, i.runtime_tag, i.trigger_tag)
        assert [key(i) for i in loaded] == [key(i) for i in original]
        # the synthetic cold table reproduces the in-memory annotation
        assert [i.cold_ms for i in loaded] == [i.cold_ms for i in original]


class TestColdTable:
    def test_mean_aggregation(self, tmp_path):
        log = tmp_path / "cold.csv"
        log.write_text(
            "runtime_tag,trigger_tag,cold_ms\n"
            "python,http,100\n"
            "python,http,300\n"
        )
        table = build_cold_table([], log)
        assert table.lookup("python", "http") == pytest.approx(200.0)

    def test_empty_logs_fallback_only(self):
        table = build_cold_table([], None, default_cold_ms=1000.0)
        assert len(table) == 0
        assert table.lookup("go", "timer") == 1000.0

    def test_unseen_key_gets_fallback(self, tmp_path):
        log = tmp_path / "cold.csv"
        log.write_text(
            "runtime_tag,trigger_tag,cold_ms\n"
            "python,http,100\npython,http,300\ncustom,timer,800\n"
        )
        table = build_cold_table([], log)
        # global mean of all records
        assert table.lookup("go", "timer") == pytest.approx((100 + 300 + 800) / 3)

    def test_median_statistic(self, tmp_path):
        log = tmp_path / "cold.csv"
        log.write_text(
            "runtime_tag,trigger_tag,cold_ms\n"
            "python,http,100\npython,http,200\npython,http,900\n"
        )
        table = build_cold_table([], log, statistic="median")
        assert table.lookup("python", "http") == 200.0

    def test_missing_training_keys_reported(self, tmp_path):
        log = tmp_path / "cold.csv"
        log.write_text("runtime_tag,trigger_tag,cold_ms\npython,http,100\n")
        training = [make_inv(0, runtime="custom", trigger="timer")]
        table = build_cold_table(training, log)
        assert ("custom", "timer") in table.missing_keys

    def test_invalid_values_rejected(self, tmp_path):
        log = tmp_path / "cold.csv"
        log.write_text("runtime_tag,trigger_tag,cold_ms\npython,http,-3\n")
        with pytest.raises(TraceError):
            build_cold_table([], log)

    def test_cold_log_round_trip(self, tmp_path):
        table = ColdStartTable(
            {("python", "http"): 120.5, ("custom", "timer"): 980.0}, 550.25)
        path = tmp_path / "log.csv"
        write_cold_log(table, path)
        rebuilt = build_cold_table([], path)
        assert rebuilt.lookup("python", "http") == 120.5
        assert rebuilt.lookup("custom", "timer") == 980.0


class TestSplitByPod:
    def make_trace(self, n_pods, per_pod=3):
        invs = []
        for p in range(n_pods):
            for j in range(per_pod):
                invs.append(make_inv(1000 * (p + j * n_pods), pod=f"pod{p}",
                                     function=f"fn{p}"))
        return sorted(invs, key=lambda i: i.ts_ms)

    def test_counts_8_1_1(self):
        split = split_by_pod(self.make_trace(10), (0.8, 0.1, 0.1), seed=7)
        pods = lambda part: {i.pod_id for i in part}
        assert len(pods(split.train)) == 8
        assert len(pods(split.validation)) == 1
        assert len(pods(split.test)) == 1

    def test_deterministic(self):
        trace = self.make_trace(10)
        a = split_by_pod(trace, (0.8, 0.1, 0.1), seed=7)
        b = split_by_pod(trace, (0.8, 0.1, 0.1), seed=7)
        assert a == b
        c = split_by_pod(trace, (0.8, 0.1, 0.1), seed=8)
        assert c != a  # different shuffle with overwhelming probability

    def test_pods_never_straddle_partitions(self):
        split = split_by_pod(self.make_trace(13), (0.8, 0.1, 0.1), seed=3)
        seen = {}
        for name, part in [("train", split.train), ("val", split.validation),
                           ("test", split.test)]:
            for inv in part:
                assert seen.setdefault(inv.pod_id, name) == name

    def test_partitions_keep_time_order(self):
        split = split_by_pod(self.make_trace(9), (0.8, 0.1, 0.1), seed=1)
        for part in (split.train, split.validation, split.test):
            times = [i.ts_ms for i in part]
            assert times == sorted(times)

    def test_bad_ratios(self):
        trace = self.make_trace(4)
        with pytest.raises(TraceError, match="sum to 1"):
            split_by_pod(trace, (0.5, 0.5, 0.5), seed=0)
        with pytest.raises(TraceError):
            split_by_pod(trace, (1.0, 0.0, 0.0), seed=0)

    def test_empty_trace(self):
        with pytest.raises(TraceError, match="empty"):
            split_by_pod([], (0.8, 0.1, 0.1), seed=0)


class TestGenerateTrace:
    def test_deterministic_model_times(self):
        spec = SyntheticSpec(1, 1, 60, Deterministic(10), seed=1)
        invs = generate_trace(spec)
        assert [i.ts_ms for i in invs] == [0, 10000, 20000, 30000, 40000, 50000]

    def test_poisson_count_within_4_sigma(self):
        spec = SyntheticSpec(1, 1, 3600, Poisson(1.0), seed=42)
        invs = generate_trace(spec)
        assert 3600 - 4 * 60 <= len(invs) <= 3600 + 4 * 60

    def test_seed_determinism(self):
        spec = SyntheticSpec(2, 3, 300, Poisson(0.5), seed=1)
        assert generate_trace(spec) == generate_trace(spec)
        other = dataclasses.replace(spec, seed=2)
        assert generate_trace(other) != generate_trace(spec)

    def test_ranges_respected(self):
        spec = SyntheticSpec(4, 2, 200, Poisson(1.0),
                             cold_latency_range_ms=(100, 200),
                             cpu_range=(0.5, 1.0), mem_range_mb=(64, 128),
                             exec_range_ms=(10, 50), seed=9)
        invs = generate_trace(spec)
        assert invs
        for inv in invs:
            assert 100 <= inv.cold_ms <= 200
            assert 0.5 <= inv.cpu_cores <= 1.0
            assert 64 <= inv.mem_mb <= 128
            assert 10 <= inv.exec_ms <= 50

    def test_bimodal_has_bursts_and_lulls(self):
        spec = SyntheticSpec(1, 1, 1200, Bimodal(2.0, 0.02, 600), seed=11)
        invs = generate_trace(spec)
        burst = sum(1 for i in invs if (i.ts_ms // 1000) % 600 < 300)
        lull = len(invs) - burst
        assert burst > 10 * max(lull, 1)

    def test_pod_bound_to_one_function(self):
        spec = SyntheticSpec(3, 2, 300, Poisson(0.8), seed=4)
        binding = {}
        for inv in generate_trace(spec):
            assert binding.setdefault(inv.pod_id, inv.function_id) == inv.function_id

    def test_spec_validation(self):
        with pytest.raises(TraceError):
            SyntheticSpec(0, 1, 60, Poisson(1.0))
        with pytest.raises(TraceError):
            SyntheticSpec(1, 1, 0, Poisson(1.0))
        with pytest.raises(TraceError):
            SyntheticSpec(1, 1, 60, Poisson(1.0), cpu_range=(2.0, 1.0))
