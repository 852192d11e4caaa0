"""Discrete energies: the lattice objective, its TV primal/dual pair, and a
stability bound linking energy differences to L2 distance.

Two closely related objectives appear throughout:

* ``discrete_energy`` -- the reporting functional.  Its regularization term
  symmetrises the forward and backward difference magnitudes,

      sum_ij  W_ij * h^2/2 * [branch(m+_ij) + branch(m-_ij)],

  where the branch of a two-piece penalty is chosen once per pixel from
  s = max(m+, m-) so both magnitudes land on the same piece.

* ``primal_energy`` -- the canonical edge-weighted TV objective that the
  five solvers minimise for benchmark comparisons,

      h^2 * sum_ij W_ij |(grad u)_ij|  +  h^2 * lam/2 * sum_ij (u - u0)^2_ij,

  with ``dual_energy`` its Fenchel dual evaluated at a weight-capped field.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_ops import (ImageGrid, VectorField, backward_gradient, divergence,
                       forward_gradient)
from .regularizers import RegKind, RegularizerSpec

_TINY = 1e-300


@dataclass(frozen=True)
class EnergyBreakdown:
    """Regularization / fidelity split of an energy value."""

    regularization: float
    fidelity: float

    @property
    def total(self) -> float:
        return self.regularization + self.fidelity


def _lam_array(lam, shape) -> np.ndarray:
    if isinstance(lam, ImageGrid):
        if lam.shape != shape:
            raise ValueError("fidelity weight shape mismatch")
        arr = lam.data
    else:
        arr = np.asarray(lam, dtype=np.float64)
        if arr.ndim == 0:
            arr = np.full(shape, float(arr))
        elif arr.shape != shape:
            raise ValueError("fidelity weight shape mismatch")
    if np.any(arr < 0):
        raise ValueError("fidelity weight must be nonnegative")
    return arr


def _check_grids(*grids: ImageGrid) -> None:
    ref = grids[0]
    for g in grids[1:]:
        if g.shape != ref.shape or abs(g.spacing - ref.spacing) > 1e-12 * ref.spacing:
            raise ValueError("grids must share shape and spacing")


def _pair_term(spec: RegularizerSpec, mp: np.ndarray, mm: np.ndarray) -> np.ndarray:
    """branch(m+) + branch(m-) with the branch picked from max(m+, m-)."""
    k = spec.k
    if spec.kind is RegKind.TIKHONOV:
        return mp * mp + mm * mm
    if spec.kind is RegKind.TV:
        return mp + mm
    s = np.maximum(mp, mm)
    inside = s < k
    if spec.kind is RegKind.HUBER:
        inner = 0.5 * (mp * mp + mm * mm)
        outer = k * (mp - 0.5 * k) + k * (mm - 0.5 * k)
    elif spec.kind is RegKind.TUKEY:
        kk = k * k / 6.0

        def bw(m):
            r = np.clip(1.0 - (m / k) ** 2, 0.0, None)
            return kk * (1.0 - r ** 3)

        inner = bw(mp) + bw(mm)
        outer = np.full_like(mp, 2.0 * kk)
    else:  # adaptive
        inner = spec.a * (mp * mp + mm * mm)
        outer = (spec.b * (mp * mp + mm * mm)
                 + spec.c * (mp + mm) + 2.0 * spec.d)
    return np.where(inside, inner, outer)


def discrete_energy(u: ImageGrid, u0: ImageGrid, weight: ImageGrid,
                    spec: RegularizerSpec, lam) -> EnergyBreakdown:
    """Lattice energy of ``u`` given data ``u0``, edge weight, and penalty."""
    _check_grids(u, u0, weight)
    h = u.spacing
    mp = forward_gradient(u).magnitude()
    mm = backward_gradient(u).magnitude()
    lam_arr = _lam_array(lam, u.shape)
    reg = float(0.5 * h * h * np.sum(weight.data * _pair_term(spec, mp, mm)))
    resid = u.data - u0.data
    fid = float(0.5 * h * h * np.sum(lam_arr * resid * resid))
    return EnergyBreakdown(reg, fid)


def primal_energy(u: ImageGrid, u0: ImageGrid, weight: ImageGrid, lam) -> float:
    """Edge-weighted TV objective (forward differences only)."""
    _check_grids(u, u0, weight)
    h = u.spacing
    mag = forward_gradient(u).magnitude()
    lam_arr = _lam_array(lam, u.shape)
    resid = u.data - u0.data
    return float(h * h * (np.sum(weight.data * mag)
                          + 0.5 * np.sum(lam_arr * resid * resid)))


def dual_energy(b: VectorField, u0: ImageGrid, weight: ImageGrid,
                lam: float, feas_tol: float = 1e-6) -> float:
    """Dual value of the edge-weighted TV objective at a feasible field.

    Feasibility means |b_ij| <= W_ij pixelwise.  Fields violating the cap by
    at most ``feas_tol`` (relative) are radially projected back; grossly
    infeasible fields raise.  Weak duality guarantees the result never
    exceeds ``primal_energy`` at any image.
    """
    if b.shape != u0.shape:
        raise ValueError("dual field shape mismatch")
    _check_grids(u0, weight)
    if not lam > 0:
        raise ValueError("lam must be positive")
    mag = b.magnitude()
    W = weight.data
    if np.any(mag > W * (1.0 + feas_tol) + feas_tol):
        raise ValueError("dual field is infeasible beyond the projection tolerance")
    scale = np.minimum(1.0, W / np.maximum(mag, _TINY))
    proj = VectorField(b.x * scale, b.y * scale, b.spacing)
    div = divergence(proj).data
    h = u0.spacing
    return float(h * h * (np.sum(u0.data * div) - np.sum(div * div) / (2.0 * lam)))


def lemma1_check(u_tilde: ImageGrid, u_star: ImageGrid, u0: ImageGrid,
                 weight: ImageGrid, spec: RegularizerSpec, lam: float) -> bool:
    """Stability bound: ||u~ - u*||^2 <= (2/lam) |E(u~) - E(u*)|.

    Holds whenever ``u_tilde`` minimises the (lam-strongly-convex) energy;
    the norm carries the h^2 cell weight matching the fidelity term.
    """
    _check_grids(u_tilde, u_star, u0, weight)
    if not lam > 0:
        raise ValueError("lam must be positive")
    h = u_tilde.spacing
    diff = u_tilde.data - u_star.data
    lhs = float(h * h * np.sum(diff * diff))
    e1 = discrete_energy(u_tilde, u0, weight, spec, lam).total
    e2 = discrete_energy(u_star, u0, weight, spec, lam).total
    rhs = (2.0 / lam) * abs(e1 - e2)
    return lhs <= rhs + 1e-12 * max(1.0, abs(rhs))
