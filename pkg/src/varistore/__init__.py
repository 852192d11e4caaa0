"""varistore: edge-weighted variational image denoising.

Core pieces: lattice calculus and continuum bridges (``grid_ops``),
gradient penalties and edge weights (``regularizers``), discrete and dual
energies (``energy``), five convex solvers plus an explicit diffusion
integrator (``solvers``), quality metrics (``metrics``), refinement-rate
studies (``refinement``), and a PGM/PPM command-line front end
(``pnm``/``cli``).
"""
from .cli import NoiseModel, RunConfig, add_noise, main
from .energy import (EnergyBreakdown, discrete_energy, dual_energy,
                     lemma1_check, primal_energy)
from .grid_ops import (ImageGrid, LinearInterpolant, VectorField, divergence,
                       forward_gradient, gaussian_convolve, inner_product,
                       l2_distance, laplacian, linear_interpolant,
                       modulus_of_continuity, sample_cell_averages)
from .metrics import MetricRecord, mean_error, psnr, relative_duality_gap
from .pnm import PnmError, read_image, write_image
from .refinement import (ImageKind, RefinementStudy, block_mean,
                         refinement_study, synthesize_test_image)
from .regularizers import (EdgeWeightParams, RegKind, RegularizerSpec,
                           adaptive_lambda, diffusivity, edge_indicator,
                           mad_scale, mad_threshold, phi, phi_prime)
from .solvers import (NumericsError, SolveReport, SolverConfig, admm,
                      explicit_diffusion, fgp, pdhg, proj_grad, shrink,
                      split_bregman)

__version__ = "0.1.0"

__all__ = [
    "EdgeWeightParams", "EnergyBreakdown", "ImageGrid", "ImageKind",
    "LinearInterpolant", "MetricRecord", "NoiseModel", "NumericsError",
    "PnmError", "RefinementStudy", "RegKind", "RegularizerSpec",
    "RunConfig", "SolveReport", "SolverConfig", "VectorField",
    "adaptive_lambda", "add_noise", "admm", "block_mean", "discrete_energy",
    "diffusivity", "divergence", "dual_energy", "edge_indicator",
    "explicit_diffusion", "fgp", "forward_gradient", "gaussian_convolve",
    "inner_product", "l2_distance", "laplacian", "lemma1_check",
    "linear_interpolant", "mad_scale", "mad_threshold", "main", "mean_error",
    "modulus_of_continuity", "pdhg", "phi", "phi_prime", "primal_energy",
    "proj_grad", "psnr", "read_image", "refinement_study",
    "relative_duality_gap", "sample_cell_averages", "shrink",
    "split_bregman", "synthesize_test_image", "write_image",
]
