"""Transmit/receive chains and exhaustive ML detection.

Two observation models are provided.  The ideal model works on the scalar
that remains after perfectly orthogonal beams collapse the array
processing: y = sqrt(rho) * (beta_k1 * x_re + j * beta_k2 * x_im) + n with
unit-variance complex noise, rho being the SNR.  The physical model runs
the full array pipeline (transmit superposition, channel matrix,
per-element noise, phase-shift combining toward all L monitored
directions) and detects jointly on the L beam outputs.

A single-beam baseline chain (SSM) with the same scalar idealisation ships
for rate-matched comparisons.  All detectors break metric ties toward the
lowest label so that runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import log2

import numpy as np

from .channel import ChannelRealization, steering_bank
from .modem import Constellation, QssmSymbol, SymbolBook


@dataclass(frozen=True)
class IdealObservation:
    """One scalar receive sample plus the linear SNR it was produced at."""

    y_r: complex
    snr: float


@dataclass(frozen=True)
class PhysicalObservation:
    """Phase-shift-network outputs, one complex sample per monitored beam."""

    z: np.ndarray


@dataclass(frozen=True)
class DetectionResult:
    """Winning QSSM hypothesis: scatterer indices, signal point, metric, label."""

    k1_hat: int
    k2_hat: int
    x_hat: complex
    metric: float
    label_hat: str


@dataclass(frozen=True)
class SsmDetectionResult:
    """Winning single-beam hypothesis."""

    k_hat: int
    x_hat: complex
    metric: float
    label_hat: str


def _complex_noise(rng: np.random.Generator | None, shape=()) -> np.ndarray | complex:
    """Unit-variance circularly symmetric complex Gaussian; zero when rng is None."""
    if rng is None:
        return np.zeros(shape, dtype=complex) if shape else 0.0 + 0.0j
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) / np.sqrt(2.0)


def qssm_observe_ideal(
    symbol: QssmSymbol,
    gains: np.ndarray,
    rho: float,
    rng: np.random.Generator | None,
) -> IdealObservation:
    """Scalar observation y = sqrt(rho)*(beta_k1*x_re + j*beta_k2*x_im) + n."""
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    L = len(gains)
    if not (1 <= symbol.k1 <= L and 1 <= symbol.k2 <= L):
        raise ValueError(f"scatterer indices out of range 1..{L}")
    signal = gains[symbol.k1 - 1] * symbol.x_re + 1j * gains[symbol.k2 - 1] * symbol.x_im
    y = np.sqrt(rho) * signal + _complex_noise(rng)
    return IdealObservation(y_r=complex(y), snr=float(rho))


def qssm_observe_physical(
    symbol: QssmSymbol,
    realization: ChannelRealization,
    rho: float,
    rng: np.random.Generator | None,
) -> PhysicalObservation:
    """Full array chain: superposed beams through H, per-element noise, combining."""
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    L = realization.n_paths
    if not (1 <= symbol.k1 <= L and 1 <= symbol.k2 <= L):
        raise ValueError(f"scatterer indices out of range 1..{L}")
    a_t = steering_bank(realization.tx_geometry, realization.aod)
    a_r = steering_bank(realization.rx_geometry, realization.aoa)
    s = a_t[:, symbol.k1 - 1] * symbol.x_re + 1j * a_t[:, symbol.k2 - 1] * symbol.x_im
    h_s = (a_r * realization.gains[None, :]) @ (a_t.conj().T @ s)
    noise = _complex_noise(rng, (realization.rx_geometry.n_elements,))
    y = np.sqrt(rho) * h_s + noise
    return PhysicalObservation(z=a_r.conj().T @ y)


def _qssm_hypotheses(gains: np.ndarray, book: SymbolBook, rho: float) -> np.ndarray:
    return np.sqrt(rho) * (
        gains[book.k1_idx] * book.x_re + 1j * gains[book.k2_idx] * book.x_im
    )


def ml_detect_ideal(
    observation: IdealObservation,
    gains: np.ndarray,
    book: SymbolBook,
    rho: float,
) -> DetectionResult:
    """Exhaustive minimum-distance search over all L^2 * M scalar hypotheses."""
    if len(book) == 0:
        raise ValueError("symbol book is empty")
    metrics = np.abs(observation.y_r - _qssm_hypotheses(gains, book, rho)) ** 2
    v = int(np.argmin(metrics))  # first minimum = lowest label on ties
    s = book.symbols[v]
    return DetectionResult(
        k1_hat=s.k1, k2_hat=s.k2, x_hat=s.x, metric=float(metrics[v]), label_hat=s.label
    )


def qssm_beam_profile(book: SymbolBook, L: int) -> np.ndarray:
    """Per-beam hypothesis pattern E[v, l] = 1[l=k1]*x_re + j*1[l=k2]*x_im (S x L)."""
    size = len(book)
    profile = np.zeros((size, L), dtype=complex)
    rows = np.arange(size)
    profile[rows, book.k1_idx] += book.x_re
    profile[rows, book.k2_idx] += 1j * book.x_im
    return profile


def ml_detect_physical(
    observation: PhysicalObservation,
    realization: ChannelRealization,
    book: SymbolBook,
    rho: float,
) -> DetectionResult:
    """Joint search on the L beam outputs under the orthogonal-beam signal model."""
    if len(book) == 0:
        raise ValueError("symbol book is empty")
    z = np.asarray(observation.z)
    if len(z) != realization.n_paths:
        raise ValueError(
            f"observation has {len(z)} beams, realization has {realization.n_paths}"
        )
    profile = qssm_beam_profile(book, realization.n_paths)
    model = np.sqrt(rho) * realization.gains[None, :] * profile
    metrics = np.sum(np.abs(z[None, :] - model) ** 2, axis=1)
    v = int(np.argmin(metrics))
    s = book.symbols[v]
    return DetectionResult(
        k1_hat=s.k1, k2_hat=s.k2, x_hat=s.x, metric=float(metrics[v]), label_hat=s.label
    )


# ---------------------------------------------------------------------------
# single-beam baseline (SSM)
# ---------------------------------------------------------------------------

def ssm_hypotheses(n_scatterers: int, constellation: Constellation):
    """Label-ordered (k index, point) arrays for the L * M single-beam hypotheses."""
    size = n_scatterers * constellation.order
    values = np.arange(size)
    k_idx = values >> constellation.bits
    x = constellation.points[values & (constellation.order - 1)]
    return k_idx, x


def ssm_observe_ideal(
    k: int,
    x: complex,
    gains: np.ndarray,
    rho: float,
    rng: np.random.Generator | None,
) -> IdealObservation:
    """Single-beam scalar observation y = sqrt(rho) * beta_k * x + n."""
    if rho < 0:
        raise ValueError(f"rho must be >= 0, got {rho}")
    if not 1 <= k <= len(gains):
        raise ValueError(f"scatterer index out of range 1..{len(gains)}")
    y = np.sqrt(rho) * gains[k - 1] * x + _complex_noise(rng)
    return IdealObservation(y_r=complex(y), snr=float(rho))


def ssm_detect_ideal(
    observation: IdealObservation,
    gains: np.ndarray,
    constellation: Constellation,
    n_scatterers: int,
    rho: float,
) -> SsmDetectionResult:
    """Exhaustive search over the L * M single-beam hypotheses."""
    k_idx, x = ssm_hypotheses(n_scatterers, constellation)
    metrics = np.abs(observation.y_r - np.sqrt(rho) * gains[k_idx] * x) ** 2
    v = int(np.argmin(metrics))
    bits = int(log2(n_scatterers)) + constellation.bits
    return SsmDetectionResult(
        k_hat=int(k_idx[v]) + 1,
        x_hat=complex(x[v]),
        metric=float(metrics[v]),
        label_hat=format(v, f"0{bits}b"),
    )
