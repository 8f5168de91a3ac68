"""Reconstruction quality: SNR, the 100 dB perfect predicate, support scores."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np

from .errors import FrameError
from .frames import SupportSet, forward_transform, frame_power, support_of

SNR_CAP_DB = 300.0
PERFECT_DB = 100.0


@dataclass(frozen=True)
class EvalReport:
    snr_db: float
    perfect: bool
    support_precision: float
    support_recall: float
    residual_power: float

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def csv_row(self) -> str:
        return (
            f"{self.snr_db!r},{str(self.perfect).lower()},{self.support_precision!r},"
            f"{self.support_recall!r},{self.residual_power!r}"
        )

    CSV_HEADER = "snr_db,perfect,precision,recall,residual_power"


def snr_db(reference, estimate) -> float:
    """``10 log10(P_ref / P_err)`` in dB, capped at 300 dB."""
    ref = np.asarray(reference, dtype=np.float64)
    est = np.asarray(estimate, dtype=np.float64)
    if ref.shape != est.shape:
        raise FrameError(f"reference {ref.shape} and estimate {est.shape} differ in length")
    p_ref = frame_power(ref)
    if p_ref == 0:
        raise FrameError("SNR is undefined for a zero-power reference")
    p_err = frame_power(ref - est)
    if p_err == 0:
        return SNR_CAP_DB
    return float(min(10 * np.log10(p_ref / p_err), SNR_CAP_DB))


def evaluate(reference, true_support: SupportSet, estimate, support_tol: float | None = None) -> EvalReport:
    """Full report; ``support_tol`` defaults to 1e-6 of the largest reference bin."""
    snr = snr_db(reference, estimate)
    if support_tol is None:
        support_tol = 1e-6 * float(np.max(np.abs(forward_transform(reference))))
    est = set(support_of(forward_transform(estimate), support_tol))
    true = set(true_support)
    hit = len(est & true)
    precision = hit / len(est) if est else 1.0
    recall = hit / len(true) if true else 1.0
    err = np.asarray(reference, dtype=np.float64) - np.asarray(estimate, dtype=np.float64)
    return EvalReport(snr, snr >= PERFECT_DB, precision, recall, frame_power(err))
