"""Regularizer penalty family and the data-driven weights that steer it.

Five penalty kinds phi(s) of the gradient magnitude s are supported:

* ``tikhonov``  s^2                       (quadratic, smooths everywhere)
* ``tv``        |s|                       (total variation)
* ``huber``     s^2/2 below k, linear above
* ``tukey``     saturating biweight, constant k^2/6 above k (non-convex)
* ``adaptive``  a*s^2 below k, b*s^2 + c|s| + d above, with c and d fixed
                so the two branches join with matching value and slope

plus the helpers that adapt the model to the data: an edge indicator built
from a smoothed input gradient, a robust MAD-based threshold for k, and a
gradient-driven pixelwise fidelity weight.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .grid_ops import ImageGrid, forward_gradient, gaussian_convolve

_TINY = 1e-300


class RegKind(str, Enum):
    TIKHONOV = "tikhonov"
    TV = "tv"
    HUBER = "huber"
    TUKEY = "tukey"
    ADAPTIVE = "adaptive"


@dataclass(frozen=True)
class RegularizerSpec:
    """Penalty kind plus its shape parameters.

    ``k`` is the transition threshold (ignored by tikhonov/tv); ``a`` and
    ``b`` are the inner/outer quadratic coefficients of the adaptive kind.
    The adaptive linear coefficient ``c = 2(a-b)k`` and offset
    ``d = -(a-b)k^2`` are derived, not free: they are the unique values that
    make the composite branch continuously differentiable at |s| = k.
    """

    kind: RegKind = RegKind.ADAPTIVE
    k: float = 1.0
    a: float = 1.0
    b: float = 0.05

    def __post_init__(self):
        object.__setattr__(self, "kind", RegKind(self.kind))
        if not self.k > 0:
            raise ValueError("threshold k must be positive")
        if self.kind is RegKind.ADAPTIVE:
            if not (self.a > self.b > 0):
                raise ValueError("adaptive kind requires a > b > 0")
            if not self.b < 1:
                raise ValueError("adaptive outer slope b must be below 1")

    @property
    def c(self) -> float:
        return 2.0 * (self.a - self.b) * self.k

    @property
    def d(self) -> float:
        return -(self.a - self.b) * self.k ** 2


def phi(spec: RegularizerSpec, s):
    """Penalty value phi(s); vectorised over ``s``."""
    s = np.asarray(s, dtype=np.float64)
    m = np.abs(s)
    k = spec.k
    if spec.kind is RegKind.TIKHONOV:
        out = s * s
    elif spec.kind is RegKind.TV:
        out = m
    elif spec.kind is RegKind.HUBER:
        out = np.where(m < k, 0.5 * s * s, k * (m - 0.5 * k))
    elif spec.kind is RegKind.TUKEY:
        r = np.clip(1.0 - (s / k) ** 2, 0.0, None)
        out = (k * k / 6.0) * (1.0 - r ** 3)
    else:
        out = np.where(m < k,
                       spec.a * s * s,
                       spec.b * s * s + spec.c * m + spec.d)
    return out if out.ndim else float(out)


def phi_prime(spec: RegularizerSpec, s):
    """Derivative phi'(s); vectorised over ``s``."""
    s = np.asarray(s, dtype=np.float64)
    m = np.abs(s)
    sign = np.sign(s)
    k = spec.k
    if spec.kind is RegKind.TIKHONOV:
        out = 2.0 * s
    elif spec.kind is RegKind.TV:
        out = sign
    elif spec.kind is RegKind.HUBER:
        out = np.where(m < k, s, k * sign)
    elif spec.kind is RegKind.TUKEY:
        r = np.clip(1.0 - (s / k) ** 2, 0.0, None)
        out = s * r * r
    else:
        out = np.where(m < k,
                       2.0 * spec.a * s,
                       sign * (2.0 * spec.b * m + spec.c))
    return out if out.ndim else float(out)


def diffusivity(spec: RegularizerSpec, s):
    """Diffusion coefficient g(s) = phi'(s) / (2 s), continued to s = 0.

    The TV coefficient is smoothed with |s|_eps = sqrt(s^2 + 1e-12) so the
    diffusion flow stays defined on flat regions (capped at 1 / (2e-6)).
    """
    s = np.asarray(s, dtype=np.float64)
    m = np.abs(s)
    safe = np.maximum(m, _TINY)
    k = spec.k
    if spec.kind is RegKind.TIKHONOV:
        out = np.ones_like(s)
    elif spec.kind is RegKind.TV:
        out = 0.5 / np.sqrt(s * s + 1e-12)
    elif spec.kind is RegKind.HUBER:
        out = np.where(m < k, 0.5, 0.5 * k / safe)
    elif spec.kind is RegKind.TUKEY:
        r = np.clip(1.0 - (s / k) ** 2, 0.0, None)
        out = 0.5 * r * r
    else:
        out = np.where(m < k, spec.a, spec.b + 0.5 * spec.c / safe)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class EdgeWeightParams:
    """Contrast sensitivity K and pre-smoothing width rho (in pixels)."""

    K: float = 10.0
    rho: float = 2.0

    def __post_init__(self):
        if not self.K > 0:
            raise ValueError("contrast sensitivity K must be positive")
        if not self.rho > 0:
            raise ValueError("smoothing width rho must be positive")


def edge_indicator(u0: ImageGrid, params: EdgeWeightParams = EdgeWeightParams()) -> ImageGrid:
    """Edge-stopping weight W = 1 / (1 + K * |smoothed gradient|^2), in (0, 1].

    Each forward-gradient component of the input is Gaussian-smoothed with
    std ``rho`` before the squared magnitude is formed, so the weight reacts
    to coherent structure rather than pixel noise.
    """
    g = forward_gradient(u0)
    sx = gaussian_convolve(u0.with_data(g.x), params.rho).data
    sy = gaussian_convolve(u0.with_data(g.y), params.rho).data
    w = 1.0 / (1.0 + params.K * (sx * sx + sy * sy))
    return u0.with_data(w)


def mad_scale(values: np.ndarray) -> float:
    """1.4826 * median absolute deviation of a sample."""
    v = np.asarray(values, dtype=np.float64).ravel()
    med = np.median(v)
    return float(1.4826 * np.median(np.abs(v - med)))


def mad_threshold(u: ImageGrid, floor: float = 1e-3) -> float:
    """Robust gradient threshold k from the forward-gradient magnitudes.

    Constant (or near-constant) images collapse the MAD to zero, so the
    result is clamped below by ``floor``.
    """
    mags = forward_gradient(u).magnitude()
    return max(mad_scale(mags), floor)


def adaptive_lambda(u_prev: ImageGrid, epsilon_sq: float = 1e-6,
                    normalized: bool = True) -> ImageGrid:
    """Pixelwise fidelity weight 1 / (eps^2 + local gradient magnitude).

    The local magnitude uses raw forward differences of the previous iterate
    (no division by the lattice spacing) with the Neumann closure.  With
    ``normalized`` the field is scaled by eps^2 so its range is (0, 1];
    otherwise flat regions saturate at 1/eps^2.
    """
    if not epsilon_sq > 0:
        raise ValueError("epsilon_sq must be positive")
    u = u_prev.data
    dx = np.zeros_like(u)
    dy = np.zeros_like(u)
    dx[:, :-1] = u[:, 1:] - u[:, :-1]
    dy[:-1, :] = u[1:, :] - u[:-1, :]
    lam = 1.0 / (epsilon_sq + np.hypot(dx, dy))
    if normalized:
        lam = lam * epsilon_sq
    return u_prev.with_data(lam)
