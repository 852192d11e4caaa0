"""Image quality and convergence metrics.

PSNR uses the standard mean-squared-error form on the 0-255 intensity
scale, 20 log10(255 / RMSE_255); for images on [0, 1] this equals
20 log10(1 / RMSE).  Identical images (RMSE 0, infinite ratio) report the
sentinel 99 dB, which also caps near-identical pairs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .energy import dual_energy, primal_energy
from .grid_ops import ImageGrid, VectorField

PSNR_CAP_DB = 99.0

_GAP_FLOOR = 1e-12


@dataclass(frozen=True)
class MetricRecord:
    """One row of solver diagnostics.

    ``gap_is_absolute`` marks gaps reported as a plain primal-dual
    difference because the dual value was too close to zero for a ratio.
    """

    psnr_db: float
    mean_error: float
    duality_gap: float
    iteration: int
    gap_is_absolute: bool = False

    def __post_init__(self):
        if self.mean_error < 0:
            raise ValueError("mean_error must be nonnegative")
        if self.duality_gap < -1e-10:
            raise ValueError("duality_gap below the weak-duality floor")


def _check_same_shape(u: ImageGrid, reference: ImageGrid) -> None:
    if u.shape != reference.shape:
        raise ValueError(f"image dimensions differ: {u.shape} vs {reference.shape}")


def psnr(u: ImageGrid, reference: ImageGrid) -> float:
    """Peak signal-to-noise ratio in decibels, capped at 99 dB."""
    _check_same_shape(u, reference)
    mse = float(np.mean((u.data - reference.data) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    value = 20.0 * np.log10(1.0 / np.sqrt(mse))
    return float(min(value, PSNR_CAP_DB))


def mean_error(u: ImageGrid, reference: ImageGrid) -> float:
    """Mean absolute pixel difference."""
    _check_same_shape(u, reference)
    return float(np.mean(np.abs(u.data - reference.data)))


def relative_duality_gap(u: ImageGrid, b: VectorField, u0: ImageGrid,
                         weight: ImageGrid, lam: float) -> tuple[float, bool]:
    """Relative primal-dual gap (E_P - E_D) / E_D for the TV objective.

    When the dual value is at or below 1e-12 the ratio would blow up, so
    the absolute difference E_P - E_D is returned instead; the second
    element reports whether that fallback was taken.
    """
    ep = primal_energy(u, u0, weight, lam)
    ed = dual_energy(b, u0, weight, lam)
    if ed <= _GAP_FLOOR:
        return ep - ed, True
    return (ep - ed) / ed, False
