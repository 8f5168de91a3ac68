"""Frames, spectra and support sets on a periodic grid of length L.

Frames are plain 1-D float64 arrays. The forward transform is the
unnormalized DFT ``X[k] = sum_n x[n] exp(-2j pi n k / L)``, the inverse
carries the 1/L factor, so masking a fraction lambda of samples scales the
expected spectrum by exactly lambda.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FrameError, SymmetryError

HERMITIAN_RTOL = 1e-9


def as_frame(samples) -> np.ndarray:
    """Validate and return ``samples`` as a read-only float64 frame."""
    x = np.array(samples, dtype=np.float64)
    if x.ndim != 1:
        raise FrameError(f"frame must be one-dimensional, got shape {x.shape}")
    if x.size < 2 or x.size % 2:
        raise FrameError(f"frame length must be even and >= 2, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise FrameError("frame contains non-finite samples")
    x.setflags(write=False)
    return x


def mirror_index(L: int) -> np.ndarray:
    """Index of the conjugate partner of each bin, ``(L - k) mod L``."""
    return (-np.arange(L)) % L


def hermitian_error(coeffs: np.ndarray) -> float:
    """Largest conjugate mismatch relative to the largest coefficient."""
    coeffs = np.asarray(coeffs)
    scale = np.max(np.abs(coeffs)) if coeffs.size else 0.0
    if scale == 0.0:
        return 0.0
    dev = np.abs(coeffs - np.conj(coeffs[mirror_index(coeffs.size)]))
    return float(np.max(dev) / scale)


def forward_transform(frame) -> np.ndarray:
    return np.fft.fft(as_frame(frame))


def inverse_transform(spectrum) -> np.ndarray:
    """Real frame whose forward transform is ``spectrum``.

    Raises SymmetryError when the spectrum is not Hermitian within 1e-9
    relative; the remaining imaginary residue is discarded.
    """
    coeffs = np.asarray(spectrum, dtype=np.complex128)
    if coeffs.ndim != 1 or coeffs.size < 2 or coeffs.size % 2:
        raise FrameError(f"spectrum length must be even and >= 2, got {coeffs.shape}")
    err = hermitian_error(coeffs)
    if err > HERMITIAN_RTOL:
        raise SymmetryError(f"spectrum is not Hermitian (relative mismatch {err:.3g})")
    return as_frame(np.fft.ifft(coeffs).real)


def frame_power(frame) -> float:
    x = np.asarray(frame, dtype=np.float64)
    return float(np.mean(x * x))


@dataclass(frozen=True)
class SupportSet:
    """Conjugate-closed set of frequency bins on a grid of length L."""

    L: int
    bins: tuple[int, ...]

    def __post_init__(self):
        if self.L < 2 or self.L % 2:
            raise FrameError(f"support grid length must be even and >= 2, got {self.L}")
        bins = tuple(sorted({int(k) for k in self.bins}))
        if bins and (bins[0] < 0 or bins[-1] >= self.L):
            raise FrameError(f"support bins must lie in [0, {self.L})")
        members = set(bins)
        for k in bins:
            if (self.L - k) % self.L not in members:
                raise FrameError(f"support is not conjugate-closed at bin {k}")
        object.__setattr__(self, "bins", bins)

    @classmethod
    def from_indicator(cls, indicator) -> SupportSet:
        indicator = np.asarray(indicator, dtype=bool)
        return cls(indicator.size, tuple(np.flatnonzero(indicator).tolist()))

    @property
    def indicator(self) -> np.ndarray:
        out = np.zeros(self.L, dtype=bool)
        out[list(self.bins)] = True
        return out

    @property
    def landau_fraction(self) -> float:
        return len(self.bins) / self.L

    def __len__(self):
        return len(self.bins)

    def __contains__(self, k):
        return int(k) in set(self.bins)

    def __iter__(self):
        return iter(self.bins)


def support_of(spectrum, tol: float) -> SupportSet:
    """Bins with ``|X[k]| > tol`` (strict)."""
    if tol < 0:
        raise FrameError(f"support tolerance must be >= 0, got {tol}")
    coeffs = np.asarray(spectrum)
    keep = np.abs(coeffs) > tol
    # magnitudes of conjugate bins can differ by an ulp; close the set
    keep |= keep[mirror_index(coeffs.size)]
    return SupportSet.from_indicator(keep)


def write_frame_csv(path, frame) -> None:
    x = as_frame(frame)
    Path(path).write_text("".join(f"{v!r}\n" for v in x.tolist()))


def read_frame_csv(path) -> np.ndarray:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    try:
        values = [float(ln) for ln in lines]
    except ValueError as exc:
        raise FrameError(f"{path}: malformed frame CSV ({exc})") from None
    return as_frame(values)


def write_frame_f64(path, frame) -> None:
    x = as_frame(frame)
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Q", x.size))
        fh.write(x.astype("<f8").tobytes())


def read_frame_f64(path) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) < 8:
        raise FrameError(f"{path}: missing length header")
    (n,) = struct.unpack("<Q", data[:8])
    if len(data) != 8 + 8 * n:
        raise FrameError(f"{path}: header says {n} samples, payload has {(len(data) - 8) / 8:g}")
    return as_frame(np.frombuffer(data[8:], dtype="<f8"))
