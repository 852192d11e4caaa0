"""Grid-refinement studies on the unit square.

The study follows standard numerical-analysis practice for empirical rate
checks: a fixed continuum datum is restricted to a ladder of lattices, each
level is solved to tolerance, the discrete minimizers are lifted to the
continuum by piecewise-linear interpolation, and their L2 distances to a
fine-grid surrogate of the continuum minimizer are fitted on a log-log
scale.

To keep the datum fixed across levels, the test image (and any noise) is
realized once at the surrogate resolution -- four times the finest study
level -- and restricted downward by block averaging, which commutes exactly
with cell-average sampling.  The edge-weight field is built once at the
surrogate resolution and restricted the same way, so every level
discretizes the same weighted functional.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace

import numpy as np

from .energy import discrete_energy
from .grid_ops import ImageGrid, l2_distance, linear_interpolant, sample_cell_averages
from .regularizers import (EdgeWeightParams, RegularizerSpec, adaptive_lambda,
                           edge_indicator)
from .solvers import SolverConfig, split_bregman

_BUMP_WIDTH = 0.15


class ImageKind(enum.Enum):
    """Closed-form test images on the unit square."""

    STEP = "step"
    RAMP = "ramp"
    SMOOTH_BUMP = "smooth_bump"


def _analytic(kind: ImageKind):
    if kind is ImageKind.STEP:
        return lambda x, y: np.where(x < 0.5, 0.25, 0.75)
    if kind is ImageKind.RAMP:
        return lambda x, y: 0.1 + 0.8 * x
    return lambda x, y: 0.1 + 0.8 * np.exp(
        -((x - 0.5) ** 2 + (y - 0.5) ** 2) / (2.0 * _BUMP_WIDTH ** 2))


def synthesize_test_image(kind: ImageKind, n: int) -> ImageGrid:
    """Cell-average sampling of a closed-form image onto an n x n lattice."""
    if n < 8:
        raise ValueError("test images need n >= 8")
    return sample_cell_averages(_analytic(kind), n)


def block_mean(u: ImageGrid, factor: int) -> ImageGrid:
    """Restrict to a lattice coarser by ``factor``, averaging each block.

    Block means of cell averages are exactly the coarser cell averages, so
    this is the natural restriction of the underlying continuum datum.
    """
    H, W = u.shape
    if factor < 1 or H % factor or W % factor:
        raise ValueError("factor must divide both image dimensions")
    data = u.data.reshape(H // factor, factor, W // factor, factor).mean(axis=(1, 3))
    return ImageGrid(data, u.spacing * factor)


@dataclass(frozen=True)
class RefinementStudy:
    """Per-level errors and energies of one refinement ladder.

    ``monotone`` flags whether the L2 errors decreased strictly at every
    halving; a non-monotone ladder is reported, not rejected.
    """

    levels: tuple[tuple[float, int], ...]
    errors_l2: tuple[float, ...]
    energies: tuple[float, ...]
    fitted_rate: float
    monotone: bool

    def __post_init__(self):
        if len(self.errors_l2) != len(self.levels) or len(self.energies) != len(self.levels):
            raise ValueError("per-level sequences must align with levels")
        hs = [h for h, _ in self.levels]
        if any(b >= a for a, b in zip(hs, hs[1:])):
            raise ValueError("levels must be strictly decreasing in h")


def _final_energy(report, u0, weight, spec, cfg) -> float:
    if cfg.adaptive_lambda:
        lam = adaptive_lambda(report.restored, cfg.epsilon_sq, cfg.adaptive_normalized)
    else:
        lam = cfg.mu if cfg.mu is not None else cfg.lam
    return discrete_energy(report.restored, u0, weight, spec, lam).total


def refinement_study(kind: ImageKind,
                     noise_sigma: float = 0.0,
                     seed: int = 0,
                     levels: tuple[int, ...] = (16, 32, 64, 128),
                     spec: RegularizerSpec | None = None,
                     cfg: SolverConfig | None = None,
                     edge_params: EdgeWeightParams | None = None,
                     surrogate_factor: int = 4,
                     surrogate_gap_tol: float = 1e-8) -> RefinementStudy:
    """Solve one denoising problem across a ladder of lattice resolutions.

    ``noise_sigma`` is the Gaussian noise level on the 0-255 scale, applied
    once at the surrogate resolution.  Every level must divide the
    surrogate resolution ``surrogate_factor * max(levels)``.
    """
    if spec is None:
        spec = RegularizerSpec()
    if cfg is None:
        cfg = SolverConfig()
    if edge_params is None:
        edge_params = EdgeWeightParams()
    if len(levels) < 2 or any(b <= a for a, b in zip(levels, levels[1:])):
        raise ValueError("levels must be a strictly increasing ladder")
    if min(levels) < 8:
        raise ValueError("levels must be >= 8")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")
    n_ref = surrogate_factor * max(levels)
    if any(n_ref % n for n in levels):
        raise ValueError("every level must divide the surrogate resolution")

    clean_ref = synthesize_test_image(kind, n_ref)
    if noise_sigma > 0:
        rng = np.random.default_rng(seed)
        noisy = clean_ref.data + rng.normal(0.0, noise_sigma / 255.0, clean_ref.shape)
        u0_ref = clean_ref.with_data(noisy)
    else:
        u0_ref = clean_ref
    w_ref = edge_indicator(u0_ref, edge_params)

    ref_cfg = replace(cfg, gap_tol=min(cfg.gap_tol, surrogate_gap_tol))
    ref_report = split_bregman(u0_ref, w_ref, ref_cfg, spec)
    ref_interp = linear_interpolant(ref_report.restored)

    rows = []
    errors = []
    energies = []
    for n in levels:
        factor = n_ref // n
        u0 = block_mean(u0_ref, factor)
        w = block_mean(w_ref, factor)
        report = split_bregman(u0, w, cfg, spec)
        err = l2_distance(linear_interpolant(report.restored), ref_interp)
        rows.append((1.0 / n, n))
        errors.append(err)
        energies.append(_final_energy(report, u0, w, spec, cfg))

    hs = np.array([h for h, _ in rows])
    safe = np.maximum(np.array(errors), 1e-300)
    rate = float(np.polyfit(np.log(hs), np.log(safe), 1)[0])
    monotone = all(b < a for a, b in zip(errors, errors[1:]))
    return RefinementStudy(tuple(rows), tuple(errors), tuple(energies),
                           rate, monotone)
