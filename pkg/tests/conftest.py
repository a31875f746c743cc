import pytest

from greenkeep.carbon import CarbonTimeline, EnergyProfile
from greenkeep.engine import SimConfig
from greenkeep.trace import Invocation


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """One PASS/FAIL line per acceptance criterion."""
    lines = []
    for status in ("passed", "failed", "error"):
        for report in terminalreporter.stats.get(status, []):
            nodeid = getattr(report, "nodeid", "")
            if "test_acceptance.py" in nodeid and getattr(report, "when", "call") == "call":
                verdict = "PASS" if status == "passed" else "FAIL"
                lines.append((nodeid.split("::")[-1], verdict))
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for name, verdict in sorted(lines):
            terminalreporter.write_line(f"{verdict} {name}")

# the worked-example profile used throughout the docs:
# 3 W/core, 0.001 W/MB, idle scale 0.2
EXAMPLE_PROFILE = EnergyProfile(j_cpu_core_w=3.0, j_dram_mb_w=0.001,
                                lambda_idle=0.2, p_cold_w_per_core=6.37,
                                name="example")


def make_inv(ts_ms, pod="p1", function=None, cpu=1.0, mem=100.0, exec_ms=0,
             runtime="python", trigger="http", cold_ms=0.001):
    """Invocation with negligible cold/exec so gaps are round numbers."""
    return Invocation(
        ts_ms=ts_ms,
        function_id=function or pod.split("-")[0],
        pod_id=pod,
        cpu_cores=cpu,
        mem_mb=mem,
        exec_ms=exec_ms,
        runtime_tag=runtime,
        trigger_tag=trigger,
        cold_ms=cold_ms,
    )


@pytest.fixture
def flat_timeline():
    return CarbonTimeline.constant(300.0)


@pytest.fixture
def sim_cfg(flat_timeline):
    return SimConfig(
        action_set_s=(1, 5, 10, 30, 60),
        profile=EXAMPLE_PROFILE,
        timeline=flat_timeline,
        network_const_ms=0.0,
        lambda_carbon=0.5,
        window_w=32,
        seed=7,
    )
