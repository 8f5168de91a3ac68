"""Iterative reconstruction from random samples.

All three algorithms share one accumulator loop. For residual spectrum S
and accumulated spectrum R (both start from S = FFT(sampled), R = 0):

    E = S with rejected bins zeroed, scaled by gamma / lam
    R += E
    S -= FFT(mask * IFFT(E))

and the output is IFFT(R). They differ only in which bins of S survive:
known support keeps the given SupportSet, IMAT keeps |S| >= thr, Hybrid
IMAT additionally keeps every bin already present in R.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, DivergenceError, MaskError
from .frames import SupportSet, as_frame, mirror_index
from .metrics import snr_db
from .sampling import Mask

ALGORITHMS = ("imat", "known-support", "hybrid")

DIVERGENCE_FACTOR = 1e6
# below this fraction of the initial residual power the iteration is at round-off
NUMERICAL_FLOOR = 1e-30


@dataclass(frozen=True)
class Adaptive:
    pass


@dataclass(frozen=True)
class Exponential:
    """``thr0 * decay**(iter - 1)``; ``thr0=None`` seeds thr0 from the first adaptive threshold."""

    thr0: float | None
    decay: float


@dataclass(frozen=True)
class RecoveryConfig:
    alpha: float = 2.5
    max_iters: int = 500
    gamma: float = 1.0
    schedule: Adaptive | Exponential = field(default_factory=Adaptive)
    overwrite_samples: bool = False
    stop_rel_residual: float = 1e-12

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigError(f"alpha must be > 0, got {self.alpha}")
        if int(self.max_iters) != self.max_iters or self.max_iters < 1:
            raise ConfigError(f"max_iters must be an integer >= 1, got {self.max_iters}")
        if not 0 < self.gamma <= 2:
            raise ConfigError(f"gamma must lie in (0, 2], got {self.gamma}")
        if not self.stop_rel_residual >= 0:
            raise ConfigError(f"stop_rel_residual must be >= 0, got {self.stop_rel_residual}")
        if isinstance(self.schedule, Exponential):
            if not 0 < self.schedule.decay < 1:
                raise ConfigError(f"schedule.decay must lie in (0, 1), got {self.schedule.decay}")
            if self.schedule.thr0 is not None and not self.schedule.thr0 >= 0:
                raise ConfigError(f"schedule.thr0 must be >= 0, got {self.schedule.thr0}")
        elif not isinstance(self.schedule, Adaptive):
            raise ConfigError(f"unknown schedule {self.schedule!r}")

    def to_dict(self) -> dict:
        data = asdict(self)
        if isinstance(self.schedule, Adaptive):
            data["schedule"] = {"kind": "adaptive"}
        else:
            data["schedule"] = {"kind": "exponential", **asdict(self.schedule)}
        return data

    @classmethod
    def from_dict(cls, data: dict) -> RecoveryConfig:
        data = dict(data)
        unknown = set(data) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ConfigError(f"unknown RecoveryConfig field(s): {', '.join(sorted(unknown))}")
        if "schedule" in data:
            data["schedule"] = schedule_from_dict(data["schedule"])
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> RecoveryConfig:
        return cls.from_dict(json.loads(text))


def schedule_from_dict(data) -> Adaptive | Exponential:
    if isinstance(data, (Adaptive, Exponential)):
        return data
    if not isinstance(data, dict) or "kind" not in data:
        raise ConfigError("schedule must be an object with a 'kind' field")
    kind = data["kind"]
    rest = {k: v for k, v in data.items() if k != "kind"}
    if kind == "adaptive":
        if rest:
            raise ConfigError(f"adaptive schedule takes no parameters, got {sorted(rest)}")
        return Adaptive()
    if kind == "exponential":
        unknown = set(rest) - {"thr0", "decay"}
        if unknown or "decay" not in rest:
            raise ConfigError("exponential schedule needs 'decay' and optional 'thr0' only")
        return Exponential(thr0=rest.get("thr0"), decay=rest["decay"])
    raise ConfigError(f"unknown schedule kind {kind!r}")


def preset_config(algorithm: str) -> RecoveryConfig:
    """Tuned defaults per algorithm used by the experiments and the CLI."""
    if algorithm == "imat":
        return RecoveryConfig(gamma=1.2)
    if algorithm == "known-support":
        return RecoveryConfig(gamma=0.6)
    if algorithm == "hybrid":
        return RecoveryConfig(gamma=0.6, schedule=Exponential(thr0=None, decay=0.97))
    raise ConfigError(f"unknown algorithm {algorithm!r}; expected one of {', '.join(ALGORITHMS)}")


@dataclass(frozen=True)
class TraceRecord:
    iter: int
    threshold: float
    residual_power: float
    support_size: int
    snr_db: float | None = None


@dataclass
class RecoveryTrace:
    records: list[TraceRecord] = field(default_factory=list)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def residual_powers(self) -> np.ndarray:
        return np.array([r.residual_power for r in self.records])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iter", "threshold", "residual_power", "support_size", "snr_db"])
        for r in self.records:
            writer.writerow([
                r.iter, repr(r.threshold), repr(r.residual_power), r.support_size,
                "" if r.snr_db is None else repr(r.snr_db),
            ])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> RecoveryTrace:
        rows = list(csv.DictReader(io.StringIO(text)))
        return cls([
            TraceRecord(
                int(r["iter"]), float(r["threshold"]), float(r["residual_power"]),
                int(r["support_size"]), float(r["snr_db"]) if r["snr_db"] else None,
            )
            for r in rows
        ])


def compute_adaptive_threshold(residual_spectrum, alpha: float) -> float:
    """``alpha * ||S||_2 / sqrt(L / 2)``."""
    S = np.asarray(residual_spectrum)
    return float(alpha * np.linalg.norm(S) / math.sqrt(S.size / 2))


def _admitted(S, thr: float, mirror) -> np.ndarray:
    # conjugate magnitudes agree only up to round-off; averaging them admits
    # a bin and its mirror together
    mag = np.abs(S)
    return (mag + mag[mirror]) >= 2 * thr


def hard_threshold(spectrum, thr: float) -> np.ndarray:
    """Zero bins with ``|X[k]| < thr``; ties are kept."""
    if thr < 0:
        raise ValueError(f"threshold must be >= 0, got {thr}")
    X = np.asarray(spectrum, dtype=np.complex128)
    return np.where(_admitted(X, thr, mirror_index(X.size)), X, 0)


def threshold_schedule_value(schedule, iter: int, residual_spectrum, alpha: float) -> float:
    if iter < 1:
        raise ValueError(f"iterations count from 1, got {iter}")
    if isinstance(schedule, Adaptive):
        return compute_adaptive_threshold(residual_spectrum, alpha)
    if schedule.thr0 is None:
        raise ConfigError("exponential schedule with thr0=None must be seeded before use")
    return schedule.thr0 * schedule.decay ** (iter - 1)


def recovery_step(S, R, mask_indicator, lam: float, gamma: float, keep):
    """One accumulator update; returns the new ``(S, R)``."""
    E = np.where(keep, S, 0) * (gamma / lam)
    e = np.fft.ifft(E).real
    e[~mask_indicator] = 0.0
    return S - np.fft.fft(e), R + E


def _check_inputs(sampled, mask: Mask) -> np.ndarray:
    y = as_frame(sampled)
    if y.size != mask.L:
        raise MaskError(f"frame length {y.size} does not match mask length {mask.L}")
    if mask.m == 0:
        raise MaskError("cannot recover from an empty mask")
    if np.any(y[~mask.indicator] != 0):
        raise MaskError("sampled frame must be zero off the mask")
    return y


def _run(y, mask: Mask, config: RecoveryConfig, rule: str, support=None, reference=None):
    L = y.size
    ind = mask.indicator
    lam = mask.m / L
    mirror = mirror_index(L)
    S = np.fft.fft(y)
    R = np.zeros(L, dtype=np.complex128)
    p_init = float(np.mean(y * y))
    schedule = config.schedule
    if isinstance(schedule, Exponential) and schedule.thr0 is None:
        schedule = Exponential(compute_adaptive_threshold(S, config.alpha), schedule.decay)
    decaying = isinstance(schedule, Exponential)
    trace = RecoveryTrace()
    prev = None
    for i in range(1, config.max_iters + 1):
        if rule == "known-support":
            thr = math.nan
            keep = support
        else:
            thr = threshold_schedule_value(schedule, i, S, config.alpha)
            keep = _admitted(S, thr, mirror)
            if rule == "hybrid":
                keep |= R != 0
        if __debug__:
            assert np.array_equal(keep, keep[mirror]), "bin selection lost conjugate symmetry"
        S, R = recovery_step(S, R, ind, lam, config.gamma, keep)
        p = float(np.vdot(S, S).real) / (L * L)
        snr = snr_db(reference, np.fft.ifft(R).real) if reference is not None else None
        trace.records.append(TraceRecord(i, thr, p, int(np.count_nonzero(R)), snr))
        if not math.isfinite(p) or p > DIVERGENCE_FACTOR * p_init:
            raise DivergenceError(
                f"residual power {p:.3g} exceeded {DIVERGENCE_FACTOR:g} x initial at iteration {i}",
                trace,
            )
        if p <= NUMERICAL_FLOOR * p_init:
            break
        if decaying:
            # a falling threshold can still admit bins after a quiet stretch
            continue
        if not keep.any():
            break
        if prev is not None and abs(prev - p) < config.stop_rel_residual * prev:
            break
        prev = p
    x = np.fft.ifft(R).real
    if config.overwrite_samples:
        x[ind] = y[ind]
    return as_frame(x), trace


def imat_recover(sampled, mask: Mask, config: RecoveryConfig, reference=None):
    y = _check_inputs(sampled, mask)
    return _run(y, mask, config, "imat", reference=reference)


def hybrid_imat_recover(sampled, mask: Mask, config: RecoveryConfig, reference=None):
    y = _check_inputs(sampled, mask)
    return _run(y, mask, config, "hybrid", reference=reference)


def known_support_recover(sampled, mask: Mask, support: SupportSet, config: RecoveryConfig, reference=None):
    y = _check_inputs(sampled, mask)
    if len(support) == 0:
        raise ConfigError("known-support recovery needs a non-empty support")
    if support.L != y.size:
        raise ConfigError(f"support grid {support.L} does not match frame length {y.size}")
    return _run(y, mask, config, "known-support", support=support.indicator, reference=reference)


def recover(algorithm: str, sampled, mask: Mask, config: RecoveryConfig, support=None, reference=None):
    if algorithm == "imat":
        return imat_recover(sampled, mask, config, reference=reference)
    if algorithm == "hybrid":
        return hybrid_imat_recover(sampled, mask, config, reference=reference)
    if algorithm == "known-support":
        if support is None:
            raise ConfigError("known-support recovery needs the true support")
        return known_support_recover(sampled, mask, support, config, reference=reference)
    raise ConfigError(f"unknown algorithm {algorithm!r}; expected one of {', '.join(ALGORITHMS)}")
