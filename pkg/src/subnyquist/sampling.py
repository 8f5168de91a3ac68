"""Random sampling masks and Monte Carlo checks of the sampling-noise law.

Variance conventions: with the unnormalized DFT, a frame of mean-square
power P has sum_n x[n]^2 = L * P. Sampling m of L indices without
replacement gives, for every bin k,

    Var(X_s[k]) = lam (1 - lam) L / (L - 1) * (sum_n x[n]^2 - |X[k]|^2 / L)

with lam = m / L. Off the signal support this is the "discrete" prediction.
The continuous-limit prediction lam * P scales to lam * P * L here; the
thinned value lam (1 - lam) P L drops only the without-replacement factor.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy import stats

from .errors import MaskError
from .frames import as_frame, forward_transform

FLATNESS_GROUPS = 16


@dataclass(frozen=True)
class Mask:
    """Sampling mask: ``indices`` are the m distinct sampled grid positions."""

    L: int
    indices: tuple[int, ...]

    def __post_init__(self):
        idx = tuple(sorted(int(i) for i in self.indices))
        if len(set(idx)) != len(idx):
            raise MaskError("mask indices must be distinct")
        if idx and (idx[0] < 0 or idx[-1] >= self.L):
            raise MaskError(f"mask indices must lie in [0, {self.L})")
        object.__setattr__(self, "indices", idx)

    @classmethod
    def from_indicator(cls, indicator) -> Mask:
        indicator = np.asarray(indicator)
        if not np.all((indicator == 0) | (indicator == 1)):
            raise MaskError("mask indicator must be binary")
        return cls(indicator.size, tuple(np.flatnonzero(indicator).tolist()))

    @property
    def indicator(self) -> np.ndarray:
        out = np.zeros(self.L, dtype=bool)
        out[list(self.indices)] = True
        return out

    @property
    def m(self) -> int:
        return len(self.indices)

    @property
    def rate(self) -> float:
        return self.m / self.L

    def to_text(self) -> str:
        return f"{self.L} {self.m}\n{' '.join(map(str, self.indices))}\n"

    @classmethod
    def from_text(cls, text: str) -> Mask:
        lines = text.splitlines()
        try:
            L, m = map(int, lines[0].split())
            indices = tuple(map(int, lines[1].split())) if len(lines) > 1 else ()
        except (IndexError, ValueError):
            raise MaskError("mask text must be 'L m' followed by the sampled indices") from None
        if len(indices) != m:
            raise MaskError(f"mask header says m={m} but lists {len(indices)} indices")
        return cls(L, indices)


def write_mask(path, mask: Mask) -> None:
    Path(path).write_text(mask.to_text())


def read_mask(path) -> Mask:
    return Mask.from_text(Path(path).read_text())


@dataclass(frozen=True)
class NoiseStats:
    """Empirical and predicted per-bin sampling-noise statistics.

    ``variance_flatness`` is the largest relative deviation of a group of
    adjacent bins' mean variance from the pooled mean. For comb statistics
    ``dc_value`` holds Psi[0]; the signal's power is then 1 by convention.
    """

    kind: str
    L: int
    m: int
    trials: int
    empirical_mean_bias: float
    mean_stderr: float
    empirical_noise_variance: float
    predicted_variance_continuous: float
    predicted_variance_discrete: float
    predicted_variance_thinned: float
    variance_flatness: float
    skewness: float
    excess_kurtosis: float
    dc_value: float | None = None

    @property
    def rate(self) -> float:
        return self.m / self.L

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> NoiseStats:
        return cls(**json.loads(text))


def gen_mask(L: int, m: int, seed: int) -> Mask:
    """First m entries of a seeded permutation.

    The same seed therefore gives nested masks for increasing m.
    """
    if not 0 <= m <= L:
        raise MaskError(f"need 0 <= m <= L, got m={m}, L={L}")
    perm = np.random.default_rng(seed).permutation(L)
    return Mask(L, tuple(perm[:m].tolist()))


def apply_mask(frame, mask: Mask) -> np.ndarray:
    x = as_frame(frame)
    if x.size != mask.L:
        raise MaskError(f"frame length {x.size} does not match mask length {mask.L}")
    return as_frame(np.where(mask.indicator, x, 0.0))


def discrete_noise_variance(frame, m: int) -> np.ndarray:
    """Exact per-bin variance of X_s[k] under sampling without replacement."""
    x = np.asarray(frame, dtype=np.float64)
    L = x.size
    lam = m / L
    X = np.fft.fft(x)
    energy = float(np.sum(x * x))
    return lam * (1 - lam) * L / (L - 1) * (energy - np.abs(X) ** 2 / L)


def _flatness(per_bin_var: np.ndarray) -> float:
    mean = per_bin_var.mean()
    if mean == 0 or per_bin_var.size < FLATNESS_GROUPS:
        return 0.0
    groups = np.array([g.mean() for g in np.array_split(per_bin_var, FLATNESS_GROUPS)])
    return float(np.max(np.abs(groups / mean - 1)))


def _moments(samples: np.ndarray) -> tuple[float, float]:
    std = samples.std()
    if samples.size < 3 or std == 0:
        return 0.0, 0.0
    return float(stats.skew(samples)), float(stats.kurtosis(samples))


def _trial_masks(L: int, m: int, trials: int, seed: int):
    for seq in np.random.SeedSequence(seed).spawn(trials):
        perm = np.random.default_rng(seq).permutation(L)
        ind = np.zeros(L, dtype=bool)
        ind[perm[:m]] = True
        yield ind


def _noise_summary(kind, L, m, trials, noise, pred_cont, pred_disc, pred_thin, dc=None):
    """Pool per-bin statistics of ``noise`` (trials x bins, zero-mean in theory)."""
    per_bin_var = np.mean(np.abs(noise) ** 2, axis=0)
    bin_mean = noise.mean(axis=0)
    scale = np.sqrt(per_bin_var.mean() / trials)
    parts = np.concatenate([noise.real.ravel(), noise.imag.ravel()])
    std = parts.std()
    skew, kurt = _moments(parts / std) if std > 0 else (0.0, 0.0)
    return NoiseStats(
        kind=kind,
        L=L,
        m=m,
        trials=trials,
        empirical_mean_bias=float(np.mean(np.abs(bin_mean))),
        mean_stderr=float(scale),
        empirical_noise_variance=float(per_bin_var.mean()),
        predicted_variance_continuous=float(pred_cont),
        predicted_variance_discrete=float(pred_disc),
        predicted_variance_thinned=float(pred_thin),
        variance_flatness=_flatness(per_bin_var),
        skewness=skew,
        excess_kurtosis=kurt,
        dc_value=dc,
    )


def comb_spectrum_stats(L: int, m: int, trials: int, seed: int) -> NoiseStats:
    """Statistics of the mask spectrum Psi over the non-DC positive-half bins."""
    if trials < 10:
        raise ValueError(f"comb statistics need >= 10 trials, got {trials}")
    if not 0 <= m <= L:
        raise MaskError(f"need 0 <= m <= L, got m={m}, L={L}")
    bins = np.arange(1, L // 2)
    psi = np.empty((trials, bins.size), dtype=np.complex128)
    dc = []
    for t, ind in enumerate(_trial_masks(L, m, trials, seed)):
        spec = np.fft.fft(ind.astype(np.float64))
        dc.append(spec[0].real)
        psi[t] = spec[bins]
    lam = m / L
    # the comb is the sampled all-ones frame: P = 1, sum x^2 = L, X[k != 0] = 0
    return _noise_summary(
        "comb", L, m, trials, psi,
        pred_cont=lam * L,
        pred_disc=lam * (1 - lam) * L * L / (L - 1),
        pred_thin=lam * (1 - lam) * L,
        dc=float(np.mean(dc)),
    )


def _off_support_bins(X: np.ndarray) -> np.ndarray:
    L = X.size
    half = np.arange(1, L // 2)
    mag = np.abs(X[half])
    scale = mag.max()
    off = half[mag <= 1e-9 * scale] if scale > 0 else half
    # a (nearly) dense spectrum leaves too few quiet bins: use them all
    return off if off.size >= FLATNESS_GROUPS else half


def sampling_noise_stats(frame, m: int, trials: int, seed: int) -> NoiseStats:
    """Monte Carlo statistics of N[k] = X_s[k] - (m/L) X[k] off the support."""
    if trials < 10:
        raise ValueError(f"noise statistics need >= 10 trials, got {trials}")
    x = as_frame(frame)
    L = x.size
    if not 0 <= m <= L:
        raise MaskError(f"need 0 <= m <= L, got m={m}, L={L}")
    lam = m / L
    X = np.fft.fft(x)
    bins = _off_support_bins(X)
    noise = np.empty((trials, bins.size), dtype=np.complex128)
    for t, ind in enumerate(_trial_masks(L, m, trials, seed)):
        # FFT((b - lam) x) == X_s - lam X, exact zero when m in {0, L}
        noise[t] = np.fft.fft((ind - lam) * x)[bins]
    energy = float(np.sum(x * x))
    return _noise_summary(
        "signal", L, m, trials, noise,
        pred_cont=lam * energy,
        pred_disc=float(np.mean(discrete_noise_variance(x, m)[bins])),
        pred_thin=lam * (1 - lam) * energy,
    )


def ergodicity_check(frame, m: int, seed: int, ensemble_trials: int = 200) -> float:
    """Relative gap between a single-mask frequency average and the ensemble variance."""
    x = as_frame(frame)
    L = x.size
    lam = m / L
    bins = _off_support_bins(np.fft.fft(x))
    seq_one, seq_ens = np.random.SeedSequence(seed).spawn(2)
    ind = next(_trial_masks(L, m, 1, int(seq_one.generate_state(1)[0])))
    freq_avg = float(np.mean(np.abs(np.fft.fft((ind - lam) * x)[bins]) ** 2))
    ens = sampling_noise_stats(x, m, ensemble_trials, int(seq_ens.generate_state(1)[0]))
    if ens.empirical_noise_variance == 0:
        return 0.0 if freq_avg == 0 else float("inf")
    return abs(freq_avg - ens.empirical_noise_variance) / ens.empirical_noise_variance


def circular_convolution(a, b) -> np.ndarray:
    """Direct O(L^2) circular convolution scaled by 1/L (spectral masking identity)."""
    a = np.asarray(a, dtype=np.complex128)
    b = np.asarray(b, dtype=np.complex128)
    L = a.size
    idx = (np.arange(L)[:, None] - np.arange(L)[None, :]) % L
    return (a[None, :] * b[idx]).sum(axis=1) / L


def sampled_spectrum(frame, mask: Mask) -> np.ndarray:
    return forward_transform(apply_mask(frame, mask))

