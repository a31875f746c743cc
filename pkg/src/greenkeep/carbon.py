"""Grid carbon-intensity timeline and phase-level energy/carbon accounting.

Energy is split into three pod phases: execution, idle keep-alive
(scaled by lambda_idle) and cold start. Carbon is energy weighted by the
grid carbon intensity of the span it occurred in, with the span-start
intensity applied throughout by default.
"""

from __future__ import annotations

import bisect
import csv
import json
from dataclasses import dataclass
from datetime import datetime, timezone
from importlib import resources

JOULES_PER_KWH = 3.6e6
MS_PER_HOUR = 3_600_000


class CarbonDataError(ValueError):
    """Raised for malformed carbon timelines or out-of-range lookups."""


@dataclass(frozen=True)
class EnergyProfile:
    """Power coefficients of the simulated hardware.

    j_cpu_core_w / j_dram_mb_w: active power per CPU core and per MB of
    resident memory. lambda_idle scales active power down for pods that
    are warm but idle. p_cold_w_per_core is the power draw while a pod
    is initializing.
    """

    j_cpu_core_w: float
    j_dram_mb_w: float
    lambda_idle: float = 0.2
    p_cold_w_per_core: float = 6.37
    name: str = "custom"

    def __post_init__(self):
        if self.j_cpu_core_w <= 0 or self.j_dram_mb_w <= 0:
            raise ValueError("power coefficients must be > 0")
        if not 0 < self.lambda_idle <= 1:
            raise ValueError(f"lambda_idle must be in (0, 1], got {self.lambda_idle}")
        if self.p_cold_w_per_core <= 0:
            raise ValueError("p_cold_w_per_core must be > 0")

    def active_power_w(self, mem_mb: float, cpu_cores: float) -> float:
        return self.j_dram_mb_w * mem_mb + self.j_cpu_core_w * cpu_cores

    def idle_power_w(self, mem_mb: float, cpu_cores: float) -> float:
        return self.lambda_idle * self.active_power_w(mem_mb, cpu_cores)


def exec_energy(profile: EnergyProfile, mem_mb: float, cpu_cores: float, t_exec_s: float) -> float:
    """Energy (J) of one execution: (j_dram*mem + j_cpu*cpu) * t_exec."""
    if t_exec_s < 0:
        raise ValueError(f"negative execution duration: {t_exec_s}")
    return profile.active_power_w(mem_mb, cpu_cores) * t_exec_s


def idle_energy(profile: EnergyProfile, mem_mb: float, cpu_cores: float, t_idle_s: float) -> float:
    """Energy (J) of keeping a warm pod idle, scaled by lambda_idle."""
    if t_idle_s < 0:
        raise ValueError(f"negative idle duration: {t_idle_s}")
    return profile.idle_power_w(mem_mb, cpu_cores) * t_idle_s


def cold_energy(profile: EnergyProfile, cpu_cores: float, t_cold_s: float) -> float:
    """Energy (J) of a pod cold start: p_cold * cores * t_cold."""
    if t_cold_s < 0:
        raise ValueError(f"negative cold-start duration: {t_cold_s}")
    return profile.p_cold_w_per_core * cpu_cores * t_cold_s


def to_carbon(energy_j: float, ci_g_per_kwh: float) -> float:
    """Convert joules to gCO2 at the given grid intensity (g/kWh)."""
    if energy_j < 0:
        raise ValueError(f"negative energy: {energy_j}")
    if ci_g_per_kwh < 0:
        raise ValueError(f"negative carbon intensity: {ci_g_per_kwh}")
    return energy_j / JOULES_PER_KWH * ci_g_per_kwh


@dataclass(frozen=True)
class CarbonBreakdown:
    """Per-step or per-run carbon split by pod phase (gCO2)."""

    exec_g: float = 0.0
    idle_g: float = 0.0
    cold_g: float = 0.0

    @property
    def total_g(self) -> float:
        return self.exec_g + self.idle_g + self.cold_g

    def __add__(self, other: "CarbonBreakdown") -> "CarbonBreakdown":
        return CarbonBreakdown(
            self.exec_g + other.exec_g,
            self.idle_g + other.idle_g,
            self.cold_g + other.cold_g,
        )


class CarbonTimeline:
    """Step function of grid carbon intensity over wall-clock time.

    Lookup is right-continuous: CI(t) is the value of the latest sample
    with hour_start_ms <= t.
    """

    def __init__(self, samples):
        samples = [(int(t), float(ci)) for t, ci in samples]
        if not samples:
            raise CarbonDataError("timeline needs at least one sample")
        for (t0, ci0), (t1, _) in zip(samples, samples[1:]):
            if t1 <= t0:
                raise CarbonDataError("sample times must be strictly increasing")
        for t, ci in samples:
            if ci < 0:
                raise CarbonDataError(f"negative carbon intensity at t={t}")
        self.samples = samples
        self._times = [t for t, _ in samples]
        self._values = [ci for _, ci in samples]

    @property
    def start_ms(self) -> int:
        return self._times[0]

    def ci_at(self, t_ms: int) -> float:
        """Carbon intensity (g/kWh) in effect at t_ms."""
        if t_ms < self._times[0]:
            raise CarbonDataError(
                f"query t={t_ms} ms precedes first sample at {self._times[0]} ms"
            )
        idx = bisect.bisect_right(self._times, t_ms) - 1
        return self._values[idx]

    def span_carbon(self, energy_j: float, start_ms: int, duration_s: float,
                    split_hours: bool = False) -> float:
        """Carbon (g) for energy spent uniformly over [start, start+duration].

        By default the whole span is billed at the intensity of its
        start. With split_hours the span is integrated exactly across
        intensity steps.
        """
        if not split_hours or duration_s <= 0:
            return to_carbon(energy_j, self.ci_at(start_ms))
        end_ms = start_ms + duration_s * 1000.0
        power_j_per_ms = energy_j / (duration_s * 1000.0)
        idx = bisect.bisect_right(self._times, start_ms) - 1
        if idx < 0:
            raise CarbonDataError(
                f"query t={start_ms} ms precedes first sample at {self._times[0]} ms"
            )
        total = 0.0
        cursor = float(start_ms)
        while cursor < end_ms:
            nxt = self._times[idx + 1] if idx + 1 < len(self._times) else end_ms
            seg_end = min(float(nxt), end_ms)
            total += to_carbon(power_j_per_ms * (seg_end - cursor), self._values[idx])
            cursor = seg_end
            idx += 1
        return total

    @classmethod
    def constant(cls, ci_g_per_kwh: float, start_ms: int = 0) -> "CarbonTimeline":
        return cls([(start_ms, ci_g_per_kwh)])

    @classmethod
    def hourly(cls, values, start_ms: int = 0) -> "CarbonTimeline":
        """One sample per hour from a list of intensities."""
        return cls([(start_ms + i * MS_PER_HOUR, v) for i, v in enumerate(values)])

    @classmethod
    def alternating(cls, low: float, high: float, hours: int, start_ms: int = 0) -> "CarbonTimeline":
        """Hourly timeline alternating low/high, starting low."""
        return cls.hourly([low if h % 2 == 0 else high for h in range(hours)], start_ms)

    @classmethod
    def from_csv(cls, path) -> "CarbonTimeline":
        """Load `hour_start_iso8601,ci_g_per_kwh` rows (UTC)."""
        samples = []
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            required = {"hour_start_iso8601", "ci_g_per_kwh"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise CarbonDataError(f"carbon CSV must have columns {sorted(required)}")
            for lineno, row in enumerate(reader, start=2):
                try:
                    t_ms = _parse_iso8601_ms(row["hour_start_iso8601"])
                    ci = float(row["ci_g_per_kwh"])
                except ValueError as exc:
                    raise CarbonDataError(f"row {lineno}: {exc}") from exc
                samples.append((t_ms, ci))
        return cls(samples)


def _parse_iso8601_ms(text: str) -> int:
    text = text.strip().replace("Z", "+00:00")
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp() * 1000)


def load_profile(preset: str) -> EnergyProfile:
    """Load a named energy profile from the bundled calibration data.

    `m5-xeon` is the cluster-level default; per-function presets are
    addressed as `table2/<function name>`.
    """
    data = _preset_data()
    if preset in data["profiles"]:
        entry = data["profiles"][preset]
    elif preset.startswith("table2/"):
        name = preset.split("/", 1)[1]
        funcs = data["per_function"]
        if name not in funcs:
            raise KeyError(f"unknown per-function preset {name!r}; have {sorted(funcs)}")
        entry = funcs[name]
    else:
        raise KeyError(f"unknown energy profile preset {preset!r}")
    return EnergyProfile(
        j_cpu_core_w=entry["j_cpu_core_w"],
        j_dram_mb_w=entry["j_dram_mb_w"],
        lambda_idle=entry["lambda_idle"],
        p_cold_w_per_core=entry["p_cold_w_per_core"],
        name=preset,
    )


def _preset_data() -> dict:
    with resources.files("greenkeep.data").joinpath("energy_profiles.json").open("rb") as f:
        return json.load(f)
