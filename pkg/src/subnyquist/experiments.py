"""Seeded Monte Carlo harness: rate sweeps, minimum-rate search, noisy FM, noise law.

Every trial derives its randomness from a counter-based seed, so a result
depends only on the sweep spec and the trial's grid position, never on worker
count or execution order. The worker count comes from the environment
variable ``SUBNYQ_WORKERS`` (default: all CPUs).
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DivergenceError, SubNyquistError
from .metrics import PERFECT_DB, snr_db
from .recovery import ALGORITHMS, RecoveryConfig, preset_config, recover
from .sampling import NoiseStats, apply_mask, comb_spectrum_stats, gen_mask, sampling_noise_stats
from .siggen import (
    RfSignalSpec, add_awgn, gen_fm_multiband, gen_multiband, measure_landau, random_band_plan,
)

log = logging.getLogger(__name__)

WORKERS_ENV = "SUBNYQ_WORKERS"
RATE_RESOLUTION = 0.005
FIG6_INPUT_SNR_DB = 14.0
FIG6_LANDAU_ENERGY = 0.99

# four FM carriers; 99%-energy Landau fraction about 0.04 at L = 4096
DEFAULT_FIG6_SPEC = RfSignalSpec(tuple((c, 1, 9.0, 1.0) for c in (300, 700, 1200, 1700)))
# the decaying schedule admits noise bins, so noisy recovery keeps the adaptive one
FIG6_CONFIG = RecoveryConfig(gamma=0.7)

_SWEEP_STREAM = 0
_MINRATE_STREAM = 1
_FIG6_STREAM = 2


def worker_count() -> int:
    raw = os.environ.get(WORKERS_ENV)
    if raw is None:
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ConfigError(f"{WORKERS_ENV} must be a positive integer, got {raw!r}")
    return n


class _Pool:
    """Process pool that degrades to an in-process map for one worker."""

    def __init__(self):
        self.workers = worker_count()
        self._ex = None

    def __enter__(self):
        if self.workers > 1:
            self._ex = ProcessPoolExecutor(max_workers=self.workers)
        return self

    def __exit__(self, *exc):
        if self._ex is not None:
            self._ex.shutdown()

    def map(self, fn, items):
        items = list(items)
        if self._ex is None or len(items) <= 1:
            return [fn(it) for it in items]
        return list(self._ex.map(fn, items))


def trial_seed(base_seed: int, *counters: int) -> int:
    """Stable 63-bit seed for one grid position."""
    seq = np.random.SeedSequence(int(base_seed), spawn_key=tuple(int(c) for c in counters))
    hi, lo = seq.generate_state(2)
    return (int(hi) << 31) ^ int(lo)


def _substreams(seed: int, n: int) -> list[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(n)]


@dataclass(frozen=True)
class SweepSpec:
    landau_fractions: tuple[float, ...]
    algorithm: str
    rates: tuple[float, ...] | None = None
    L: int = 4096
    trials_per_point: int = 20
    success_fraction: float = 0.9
    config: RecoveryConfig | None = None
    base_seed: int = 0
    input_snr_db: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "landau_fractions", tuple(float(f) for f in self.landau_fractions))
        if self.rates is not None:
            object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; expected one of {', '.join(ALGORITHMS)}")
        if self.L < 2 or self.L % 2:
            raise ConfigError(f"L must be even and >= 2, got {self.L}")
        if not self.landau_fractions or not all(0 < f < 1 for f in self.landau_fractions):
            raise ConfigError("landau_fractions must be a non-empty list inside (0, 1)")
        if self.rates is not None and not all(0 < r <= 1 for r in self.rates):
            raise ConfigError("rates must lie in (0, 1]")
        if self.trials_per_point < 1:
            raise ConfigError(f"trials_per_point must be >= 1, got {self.trials_per_point}")
        if not 0 < self.success_fraction <= 1:
            raise ConfigError(f"success_fraction must lie in (0, 1], got {self.success_fraction}")

    @property
    def recovery_config(self) -> RecoveryConfig:
        return self.config if self.config is not None else preset_config(self.algorithm)


@dataclass(frozen=True)
class SweepRow:
    landau_fraction: float
    rate: float
    trial: int
    seed: int
    snr_db: float
    iterations_used: int
    perfect: bool


@dataclass(frozen=True)
class SummaryRow:
    landau_fraction: float
    rate: float
    success_rate: float
    mean_snr_db: float


@dataclass
class SweepResult:
    rows: list[SweepRow] = field(default_factory=list)

    def summary(self) -> list[SummaryRow]:
        groups: dict[tuple[float, float], list[SweepRow]] = {}
        for r in self.rows:
            groups.setdefault((r.landau_fraction, r.rate), []).append(r)
        out = []
        for (landau, rate), rows in groups.items():
            snrs = [r.snr_db for r in rows if math.isfinite(r.snr_db)]
            mean = float(np.mean(snrs)) if snrs else math.nan
            out.append(SummaryRow(landau, rate, sum(r.perfect for r in rows) / len(rows), mean))
        return out

    def sweep_csv(self) -> str:
        lines = ["landau_fraction,rate,trial,seed,snr_db,iterations_used,perfect"]
        for r in self.rows:
            lines.append(
                f"{r.landau_fraction!r},{r.rate!r},{r.trial},{r.seed},{r.snr_db!r},"
                f"{r.iterations_used},{int(r.perfect)}"
            )
        return "\n".join(lines) + "\n"

    def summary_csv(self) -> str:
        lines = ["landau_fraction,rate,success_rate,mean_snr_db"]
        for s in self.summary():
            lines.append(f"{s.landau_fraction!r},{s.rate!r},{s.success_rate!r},{s.mean_snr_db!r}")
        return "\n".join(lines) + "\n"

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(self.sweep_csv())
        (out / "summary.csv").write_text(self.summary_csv())


def _rate_to_m(rate: float, L: int) -> int:
    return max(1, min(L, int(round(rate * L))))


@dataclass(frozen=True)
class _Trial:
    """Everything one worker needs to run and score one recovery."""

    algorithm: str
    config: RecoveryConfig
    L: int
    landau_fraction: float
    rate: float
    trial: int
    seed: int
    input_snr_db: float | None


def _run_trial(t: _Trial) -> SweepRow:
    s_bands, s_plan, s_signal, s_noise, s_mask = _substreams(t.seed, 5)
    iterations = 0
    try:
        n_bands = int(np.random.default_rng(s_bands).integers(1, 4))
        plan = random_band_plan(t.L, t.landau_fraction, n_bands, s_plan)
        x, support = gen_multiband(t.L, plan, s_signal)
        received = x if t.input_snr_db is None else add_awgn(x, t.input_snr_db, s_noise)
        mask = gen_mask(t.L, _rate_to_m(t.rate, t.L), s_mask)
        est, trace = recover(t.algorithm, apply_mask(received, mask), mask, t.config, support=support)
        iterations = len(trace)
        snr = snr_db(x, est)
    except DivergenceError as exc:
        snr, iterations = math.nan, len(exc.trace)
    except SubNyquistError as exc:
        log.warning("trial %s at landau %g rate %g failed: %s", t.trial, t.landau_fraction, t.rate, exc)
        snr = math.nan
    return SweepRow(t.landau_fraction, t.rate, t.trial, t.seed, snr, iterations, snr >= PERFECT_DB)


def run_sweep(spec: SweepSpec) -> SweepResult:
    if spec.rates is None:
        raise ConfigError("run_sweep needs explicit rates; use min_rate_search for auto-search")
    config = spec.recovery_config
    trials = [
        _Trial(spec.algorithm, config, spec.L, landau, rate, t,
               trial_seed(spec.base_seed, _SWEEP_STREAM, li, ri, t), spec.input_snr_db)
        for li, landau in enumerate(spec.landau_fractions)
        for ri, rate in enumerate(spec.rates)
        for t in range(spec.trials_per_point)
    ]
    with _Pool() as pool:
        rows = pool.map(_run_trial, trials)
    order = {(tr.landau_fraction, tr.rate, tr.trial): i for i, tr in enumerate(trials)}
    rows.sort(key=lambda r: order[(r.landau_fraction, r.rate, r.trial)])
    return SweepResult(rows)


@dataclass(frozen=True)
class RateProbe:
    rate: float
    successes: int
    evaluated: int
    passed: bool


@dataclass(frozen=True)
class MinRateResult:
    """``min_rate`` is 1.0 with ``saturated`` set when even full-rate sampling fails."""

    landau_fraction: float
    min_rate: float
    saturated: bool
    probes: tuple[RateProbe, ...]
    anomalies: tuple[tuple[float, float], ...]

    @property
    def ratio(self) -> float:
        return math.inf if self.saturated else self.min_rate / self.landau_fraction


def min_rate_search(spec: SweepSpec, landau_fraction: float) -> MinRateResult:
    """Bisection over ``[landau_fraction, 1]`` for the smallest passing rate.

    Every probed rate reuses the same per-trial signals and mask seeds; the
    masks are nested in the rate, so success is monotone up to recovery
    effects. A probe stops early once its pass/fail outcome is decided.
    """
    if not 0 < landau_fraction < 1:
        raise ConfigError(f"landau_fraction must lie in (0, 1), got {landau_fraction}")
    config = spec.recovery_config
    n = spec.trials_per_point
    need = math.ceil(spec.success_fraction * n - 1e-12)
    key = int(round(landau_fraction * 1e9))
    seeds = [trial_seed(spec.base_seed, _MINRATE_STREAM, key, t) for t in range(n)]
    probes: dict[float, RateProbe] = {}

    with _Pool() as pool:
        def probe(rate: float) -> bool:
            ok = done = 0
            while done < n:
                batch = range(done, min(n, done + pool.workers))
                rows = pool.map(_run_trial, [
                    _Trial(spec.algorithm, config, spec.L, landau_fraction, rate, t, seeds[t], spec.input_snr_db)
                    for t in batch
                ])
                ok += sum(r.perfect for r in rows)
                done += len(rows)
                if ok >= need or ok + (n - done) < need:
                    break
            probes[rate] = RateProbe(rate, ok, done, ok >= need)
            return ok >= need

        if not probe(1.0):
            return MinRateResult(landau_fraction, 1.0, True, tuple(probes.values()), ())
        lo, hi = landau_fraction, 1.0
        if probe(lo):
            hi = lo
        while hi - lo > RATE_RESOLUTION:
            mid = (lo + hi) / 2
            if probe(mid):
                hi = mid
            else:
                lo = mid

    ordered = sorted(probes.values(), key=lambda p: p.rate)
    anomalies = tuple(
        (a.rate, b.rate) for i, a in enumerate(ordered) for b in ordered[i + 1:] if a.passed and not b.passed
    )
    for a, b in anomalies:
        log.warning("non-monotone success at landau %g: rate %g passes but %g fails", landau_fraction, a, b)
    return MinRateResult(landau_fraction, hi, False, tuple(ordered), anomalies)


def minrate_csv(results: list[MinRateResult]) -> str:
    lines = ["landau_fraction,min_rate,ratio"]
    for r in results:
        lines.append(f"{r.landau_fraction!r},{r.min_rate!r},{r.ratio!r}")
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class _Fig6Trial:
    spec: RfSignalSpec
    L: int
    config: RecoveryConfig
    landau_fraction: float
    rate: float
    trial: int
    seed: int
    input_snr_db: float


def _run_fig6_trial(t: _Fig6Trial) -> SweepRow:
    s_noise, s_mask = _substreams(t.seed, 2)
    x = gen_fm_multiband(t.L, t.spec)
    iterations = 0
    try:
        received = add_awgn(x, t.input_snr_db, s_noise)
        mask = gen_mask(t.L, _rate_to_m(t.rate, t.L), s_mask)
        est, trace = recover("hybrid", apply_mask(received, mask), mask, t.config)
        iterations = len(trace)
        snr = snr_db(x, est)
    except DivergenceError as exc:
        snr, iterations = math.nan, len(exc.trace)
    return SweepRow(t.landau_fraction, t.rate, t.trial, t.seed, snr, iterations, snr >= PERFECT_DB)


def fig6_landau(spec: RfSignalSpec = DEFAULT_FIG6_SPEC, L: int = 4096) -> float:
    return measure_landau(gen_fm_multiband(L, spec), FIG6_LANDAU_ENERGY)


def run_fig6(
    spec: RfSignalSpec,
    rates,
    trials: int,
    base_seed: int,
    config: RecoveryConfig | None = None,
    L: int = 4096,
    input_snr_db: float = FIG6_INPUT_SNR_DB,
) -> SweepResult:
    """Hybrid IMAT on the noisy FM frame; SNR is scored against the clean frame."""
    if not all(0 < r <= 1 for r in rates):
        raise ConfigError("rates must lie in (0, 1]")
    if trials < 1:
        raise ConfigError(f"trials must be >= 1, got {trials}")
    config = config if config is not None else FIG6_CONFIG
    landau = fig6_landau(spec, L)
    jobs = [
        _Fig6Trial(spec, L, config, landau, float(rate), t, trial_seed(base_seed, _FIG6_STREAM, ri, t), input_snr_db)
        for ri, rate in enumerate(rates)
        for t in range(trials)
    ]
    with _Pool() as pool:
        rows = pool.map(_run_fig6_trial, jobs)
    return SweepResult(rows)


def run_noise_verification(L: int, landau_fraction: float, rates, trials: int, base_seed: int) -> list[NoiseStats]:
    """Signal-noise and comb statistics per rate, in rate order (signal first)."""
    s_plan, s_signal = _substreams(trial_seed(base_seed, 3), 2)
    plan = random_band_plan(L, landau_fraction, 2, s_plan)
    x, _ = gen_multiband(L, plan, s_signal)
    out = []
    for ri, rate in enumerate(rates):
        if not 0 < rate <= 1:
            raise ConfigError(f"rates must lie in (0, 1], got {rate}")
        m = int(round(rate * L))
        s_noise, s_comb = _substreams(trial_seed(base_seed, 3, ri), 2)
        out.append(sampling_noise_stats(x, m, trials, s_noise))
        out.append(comb_spectrum_stats(L, m, trials, s_comb))
    return out
