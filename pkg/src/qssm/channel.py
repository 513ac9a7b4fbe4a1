"""Geometric scattering channel: array responses, sampling, diagnostics.

The channel is a sum of L rank-one scatterer contributions with i.i.d.
circularly symmetric unit-variance complex gains.  Angles can be drawn on
the DFT sine grid, which makes the steering vectors of distinct scatterers
exactly orthogonal, or uniformly with a minimum sine separation of 2/N,
which only approximates that orthogonality.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DFT_GRID = "dft_grid"
MIN_SEP = "min_sep"

_ANGLE_MODES = (DFT_GRID, MIN_SEP)
_MAX_REJECTION_ROUNDS = 100_000


@dataclass(frozen=True)
class ArrayGeometry:
    """Uniform linear array: element count and spacing in wavelengths."""

    n_elements: int
    spacing_over_lambda: float = 0.5

    def __post_init__(self) -> None:
        if self.n_elements < 1:
            raise ValueError(f"n_elements must be >= 1, got {self.n_elements}")
        if not self.spacing_over_lambda > 0:
            raise ValueError(
                f"spacing_over_lambda must be > 0, got {self.spacing_over_lambda}"
            )


@dataclass(frozen=True)
class ChannelRealization:
    """One draw of L scatterers: complex gains plus departure/arrival angles."""

    gains: np.ndarray
    aod: np.ndarray
    aoa: np.ndarray
    tx_geometry: ArrayGeometry
    rx_geometry: ArrayGeometry

    def __post_init__(self) -> None:
        if not (len(self.gains) == len(self.aod) == len(self.aoa)):
            raise ValueError("gains, aod and aoa must have equal length")

    @property
    def n_paths(self) -> int:
        return len(self.gains)


def array_response(geometry: ArrayGeometry, theta: float) -> np.ndarray:
    """Unit-norm steering vector: entry n is exp(j*2*pi*(d/lambda)*sin(theta)*n)/sqrt(N)."""
    if not np.isfinite(theta):
        raise ValueError(f"theta must be finite, got {theta}")
    n = np.arange(geometry.n_elements)
    phase = 2j * np.pi * geometry.spacing_over_lambda * np.sin(theta) * n
    return np.exp(phase) / np.sqrt(geometry.n_elements)


def dft_grid_sines(n_elements: int) -> np.ndarray:
    """The N sine-domain grid points (2i - N)/N whose beams are mutually orthogonal."""
    return (2.0 * np.arange(n_elements) - n_elements) / n_elements


def _angles_from_sines(sines: np.ndarray) -> np.ndarray:
    return np.mod(np.arcsin(sines), 2.0 * np.pi)


def sine_separation_ok(sines: np.ndarray, geometry: ArrayGeometry) -> bool:
    """True when all pairwise sine gaps are at least one DFT null spacing.

    Gaps are measured on the circle of period 1/(d/lambda), the array's
    alias period: at half-wavelength spacing sin(theta) = -1 and +1 steer
    the same beam, so plain |sin差| alone would admit duplicate beams.
    """
    if len(sines) < 2:
        return True
    period = 1.0 / geometry.spacing_over_lambda
    min_gap = period / geometry.n_elements
    s = np.sort(np.mod(sines, period))
    gaps = np.diff(s, append=s[0] + period)
    return bool(np.min(gaps) >= min_gap)


def _sample_side_angles(
    L: int, geometry: ArrayGeometry, rng: np.random.Generator, angle_mode: str
) -> np.ndarray:
    n = geometry.n_elements
    if angle_mode == DFT_GRID:
        if L > n:
            raise ValueError(
                f"cannot place {L} scatterers on a {n}-point DFT grid"
            )
        picks = rng.choice(n, size=L, replace=False)
        return _angles_from_sines(dft_grid_sines(n)[picks])
    # uniform angles, whole-set rejection until the sine gaps are large enough
    if L > n:
        raise ValueError(
            f"min-separation sampling infeasible: {L} scatterers exceed the "
            f"{n}-point sine grid capacity"
        )
    for _ in range(_MAX_REJECTION_ROUNDS):
        theta = rng.uniform(0.0, 2.0 * np.pi, size=L)
        if sine_separation_ok(np.sin(theta), geometry):
            return theta
    raise RuntimeError(
        f"min-separation sampling did not converge for L={L}, N={n}"
    )


def sample_channel(
    L: int,
    tx_geometry: ArrayGeometry,
    rx_geometry: ArrayGeometry,
    rng: np.random.Generator,
    angle_mode: str = DFT_GRID,
) -> ChannelRealization:
    """Draw L i.i.d. CN(0,1) gains and per-side angles under the given mode."""
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    if angle_mode not in _ANGLE_MODES:
        raise ValueError(f"angle_mode must be one of {_ANGLE_MODES}, got {angle_mode!r}")
    aod = _sample_side_angles(L, tx_geometry, rng, angle_mode)
    aoa = _sample_side_angles(L, rx_geometry, rng, angle_mode)
    gains = (rng.standard_normal(L) + 1j * rng.standard_normal(L)) / np.sqrt(2.0)
    return ChannelRealization(
        gains=gains, aod=aod, aoa=aoa, tx_geometry=tx_geometry, rx_geometry=rx_geometry
    )


def steering_bank(geometry: ArrayGeometry, angles: np.ndarray) -> np.ndarray:
    """Stack of steering vectors, one column per angle (N x L)."""
    n = np.arange(geometry.n_elements)[:, None]
    phase = 2j * np.pi * geometry.spacing_over_lambda * np.sin(angles)[None, :] * n
    return np.exp(phase) / np.sqrt(geometry.n_elements)


def orthogonality_defect(realization: ChannelRealization) -> float:
    """Largest cross-correlation |a^H(theta_l) a(theta_l')| over l != l', both arrays.

    Zero means the beams are exactly orthogonal (the regime the error-rate
    analysis assumes); one means two scatterers share a beam.
    """
    if realization.n_paths < 2:
        raise ValueError("orthogonality defect needs at least two paths")
    worst = 0.0
    for geometry, angles in (
        (realization.tx_geometry, realization.aod),
        (realization.rx_geometry, realization.aoa),
    ):
        bank = steering_bank(geometry, angles)
        gram = np.abs(bank.conj().T @ bank)
        np.fill_diagonal(gram, 0.0)
        worst = max(worst, float(gram.max()))
    return worst


def channel_matrix(realization: ChannelRealization) -> np.ndarray:
    """H = sum_l beta_l a_r(theta_l^r) a_t^H(theta_l^t), shape (N_r, N_t)."""
    a_t = steering_bank(realization.tx_geometry, realization.aod)
    a_r = steering_bank(realization.rx_geometry, realization.aoa)
    return (a_r * realization.gains[None, :]) @ a_t.conj().T


def realization_to_json(realization: ChannelRealization) -> dict:
    """JSON-serialisable record (gains as re/im pairs, angles in radians)."""
    return {
        "gains": [[float(g.real), float(g.imag)] for g in realization.gains],
        "aod": [float(a) for a in realization.aod],
        "aoa": [float(a) for a in realization.aoa],
        "tx_geometry": {
            "n_elements": realization.tx_geometry.n_elements,
            "spacing_over_lambda": realization.tx_geometry.spacing_over_lambda,
        },
        "rx_geometry": {
            "n_elements": realization.rx_geometry.n_elements,
            "spacing_over_lambda": realization.rx_geometry.spacing_over_lambda,
        },
    }


def realization_from_json(record: dict) -> ChannelRealization:
    """Rebuild a realization previously serialised by :func:`realization_to_json`."""
    gains = np.array([complex(re, im) for re, im in record["gains"]])
    return ChannelRealization(
        gains=gains,
        aod=np.asarray(record["aod"], dtype=float),
        aoa=np.asarray(record["aoa"], dtype=float),
        tx_geometry=ArrayGeometry(**record["tx_geometry"]),
        rx_geometry=ArrayGeometry(**record["rx_geometry"]),
    )
