"""Test-signal synthesis: random multiband frames, FM multi-carrier frames, AWGN."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import BandPlanError, FrameError, PackingError
from .frames import SupportSet, as_frame, forward_transform, frame_power


@dataclass(frozen=True)
class BandPlan:
    """Bands ``(start_bin, width_bins)`` on the positive half ``[1, L/2)``."""

    bands: tuple[tuple[int, int], ...]

    def __post_init__(self):
        bands = tuple(sorted((int(s), int(w)) for s, w in self.bands))
        object.__setattr__(self, "bands", bands)

    def validate(self, L: int) -> None:
        if L < 2 or L % 2:
            raise BandPlanError(f"frame length must be even and >= 2, got {L}")
        prev_end = 1
        for start, width in self.bands:
            if width < 1:
                raise BandPlanError(f"band at {start} has width {width} < 1")
            if start < prev_end:
                raise BandPlanError(f"band at {start} overlaps a previous band or bin 0")
            if start + width > L // 2:
                raise BandPlanError(f"band ({start}, {width}) crosses bin L/2 = {L // 2}")
            prev_end = start + width

    def positive_bins(self) -> np.ndarray:
        if not self.bands:
            return np.zeros(0, dtype=int)
        return np.concatenate([np.arange(s, s + w) for s, w in self.bands])

    def support(self, L: int) -> SupportSet:
        self.validate(L)
        pos = self.positive_bins()
        return SupportSet(L, tuple(pos.tolist()) + tuple((L - pos).tolist()))

    def landau_fraction(self, L: int) -> float:
        return 2 * int(sum(w for _, w in self.bands)) / L

    def to_json(self) -> str:
        return json.dumps({"bands": [list(b) for b in self.bands]})

    @classmethod
    def from_json(cls, text: str) -> BandPlan:
        data = json.loads(text)
        if set(data) != {"bands"}:
            raise BandPlanError(f"band plan JSON must have exactly the key 'bands', got {sorted(data)}")
        try:
            return cls(tuple((s, w) for s, w in data["bands"]))
        except (TypeError, ValueError):
            raise BandPlanError("'bands' must be a list of [start, width] pairs") from None


@dataclass(frozen=True)
class Carrier:
    carrier_bin: int
    message_bin: int
    modulation_index: float
    amplitude: float = 1.0


@dataclass(frozen=True)
class RfSignalSpec:
    carriers: tuple[Carrier, ...]

    def __post_init__(self):
        carriers = tuple(c if isinstance(c, Carrier) else Carrier(*c) for c in self.carriers)
        object.__setattr__(self, "carriers", carriers)

    def validate(self, L: int) -> None:
        if not self.carriers:
            raise BandPlanError("RF signal spec has no carriers")
        bins = [c.carrier_bin for c in self.carriers]
        if len(set(bins)) != len(bins):
            raise BandPlanError(f"carrier bins must be distinct, got {bins}")
        for c in self.carriers:
            if c.message_bin < 0 or c.modulation_index < 0:
                raise BandPlanError(f"carrier {c.carrier_bin}: negative message bin or index")
            # Carson footprint: (index + 1) message bins either side of the carrier
            half = (c.modulation_index + 1) * c.message_bin
            if c.carrier_bin - half < 1 or c.carrier_bin + half >= L // 2:
                raise BandPlanError(f"carrier {c.carrier_bin}: sideband footprint leaves [1, L/2)")

    def to_json(self) -> str:
        rows = [[c.carrier_bin, c.message_bin, c.modulation_index, c.amplitude] for c in self.carriers]
        return json.dumps({"carriers": rows})

    @classmethod
    def from_json(cls, text: str) -> RfSignalSpec:
        data = json.loads(text)
        if set(data) != {"carriers"}:
            raise BandPlanError(f"RF spec JSON must have exactly the key 'carriers', got {sorted(data)}")
        try:
            return cls(tuple(Carrier(int(a), int(b), float(c), float(d)) for a, b, c, d in data["carriers"]))
        except (TypeError, ValueError):
            raise BandPlanError("'carriers' must be a list of [carrier, message, index, amplitude]") from None


def gen_multiband(L: int, plan: BandPlan, seed: int) -> tuple[np.ndarray, SupportSet]:
    """Unit-power real frame with i.i.d. complex Gaussian in-band coefficients."""
    support = plan.support(L)
    if len(support) == 0:
        raise BandPlanError("empty band plan: cannot normalize a zero signal")
    rng = np.random.default_rng(seed)
    pos = plan.positive_bins()
    coeffs = np.zeros(L, dtype=np.complex128)
    coeffs[pos] = rng.standard_normal(pos.size) + 1j * rng.standard_normal(pos.size)
    coeffs[L - pos] = np.conj(coeffs[pos])
    x = np.fft.ifft(coeffs).real
    x /= np.sqrt(frame_power(x))
    return as_frame(x), support


def random_band_plan(L: int, landau_fraction: float, n_bands: int, seed: int) -> BandPlan:
    """Near-equal bands totalling ``round(landau_fraction * L / 2)`` positive bins.

    Placement is uniform over all arrangements with at least one free bin
    between neighbouring bands (for a shuffled order of widths).
    """
    if not 0 < landau_fraction < 1:
        raise BandPlanError(f"landau_fraction must lie in (0, 1), got {landau_fraction}")
    if n_bands < 1:
        raise BandPlanError(f"n_bands must be >= 1, got {n_bands}")
    total = int(round(landau_fraction * L / 2))
    if total < n_bands:
        raise PackingError(f"{total} positive bins cannot form {n_bands} bands")
    slots = L // 2 - 1  # bins 1 .. L/2 - 1
    free = slots - total - (n_bands - 1)
    if free < 0:
        raise PackingError(f"{n_bands} bands of {total} bins with gaps do not fit in {slots} bins")
    rng = np.random.default_rng(seed)
    widths = np.full(n_bands, total // n_bands)
    widths[: total % n_bands] += 1
    widths = rng.permutation(widths)
    # stars and bars: spread the free bins over n_bands + 1 gaps uniformly
    cuts = np.sort(rng.choice(free + n_bands, size=n_bands, replace=False))
    extra = np.diff(np.concatenate(([-1], cuts))) - 1
    bands = []
    pos = 1
    for i in range(n_bands):
        pos += int(extra[i])
        bands.append((pos, int(widths[i])))
        pos += int(widths[i]) + 1
    return BandPlan(tuple(bands))


def gen_fm_multiband(L: int, spec: RfSignalSpec) -> np.ndarray:
    spec.validate(L)
    n = np.arange(L)
    x = np.zeros(L)
    for c in spec.carriers:
        phase = 2 * np.pi * c.carrier_bin * n / L
        phase += c.modulation_index * np.sin(2 * np.pi * c.message_bin * n / L)
        x += c.amplitude * np.cos(phase)
    power = frame_power(x)
    if power == 0:
        raise BandPlanError("RF signal spec produces a zero frame")
    return as_frame(x / np.sqrt(power))


def add_awgn(frame, snr_db: float, seed: int) -> np.ndarray:
    x = as_frame(frame)
    power = frame_power(x)
    if power == 0:
        raise FrameError("cannot set an SNR relative to a zero-power frame")
    sigma = np.sqrt(power / 10 ** (snr_db / 10))
    rng = np.random.default_rng(seed)
    return as_frame(x + sigma * rng.standard_normal(x.size))


def _energy_order(frame, energy_fraction: float):
    if not 0 < energy_fraction < 1:
        raise FrameError(f"energy_fraction must lie in (0, 1), got {energy_fraction}")
    energy = np.abs(forward_transform(frame)) ** 2
    total = energy.sum()
    if total == 0:
        raise FrameError("cannot measure the bandwidth of a zero frame")
    order = np.argsort(energy, kind="stable")[::-1]
    cum = np.cumsum(energy[order])
    count = int(np.searchsorted(cum, energy_fraction * total)) + 1
    return order[: min(count, energy.size)]


def measure_landau(frame, energy_fraction: float) -> float:
    """Fraction of bins needed, largest first, to hold ``energy_fraction`` of the energy."""
    return len(_energy_order(frame, energy_fraction)) / len(frame)


def occupied_bandwidth(frame, energy_fraction: float) -> int:
    """Two-sided span in bins of the energetic bins on the positive half.

    Counts gaps inside the occupied band, which matches Carson-rule
    bandwidth for a single FM carrier.
    """
    L = len(frame)
    bins = _energy_order(frame, energy_fraction)
    pos = bins[(bins >= 1) & (bins < L // 2)]
    if pos.size == 0:
        return 0
    return 2 * int(pos.max() - pos.min() + 1)
