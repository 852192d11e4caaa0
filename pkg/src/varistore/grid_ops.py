"""Uniform-lattice operators: difference stencils, smoothing, interpolation.

Images live on a square lattice with spacing ``spacing``; pixel (r, c) sits at
the physical point ((c + 1/2) * spacing, (r + 1/2) * spacing), so a height-H,
width-W grid covers the closed box [0, W*spacing] x [0, H*spacing].  The x
direction runs along columns (axis 1) and y along rows (axis 0).

The forward gradient uses one-sided differences that vanish on the last
column/row (homogeneous Neumann closure); ``divergence`` is built as the exact
negative adjoint of ``forward_gradient`` under the cell-weighted inner
product, which makes ``laplacian`` the usual 5-point Neumann stencil.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.ndimage import convolve1d


@dataclass(frozen=True)
class ImageGrid:
    """2-D scalar field on a uniform lattice.

    Parameters
    ----------
    data : ndarray, shape (height, width)
        One real value per pixel, row-major.
    spacing : float
        Lattice spacing h > 0 shared by both axes.
    """

    data: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2 or arr.size == 0:
            raise ValueError("ImageGrid expects a nonempty 2-D array")
        if not (float(self.spacing) > 0.0):
            raise ValueError("grid spacing must be positive")
        object.__setattr__(self, "data", arr)
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def with_data(self, data: np.ndarray) -> "ImageGrid":
        """Same lattice, new values."""
        return ImageGrid(data, self.spacing)

    @classmethod
    def constant(cls, height: int, width: int, value: float = 0.0,
                 spacing: float = 1.0) -> "ImageGrid":
        return cls(np.full((height, width), float(value)), spacing)


@dataclass(frozen=True)
class VectorField:
    """Per-pixel 2-vector field (x, y components) on the same lattice."""

    x: np.ndarray
    y: np.ndarray
    spacing: float = 1.0

    def __post_init__(self):
        vx = np.asarray(self.x, dtype=np.float64)
        vy = np.asarray(self.y, dtype=np.float64)
        if vx.ndim != 2 or vx.shape != vy.shape or vx.size == 0:
            raise ValueError("VectorField components must share a nonempty 2-D shape")
        if not (float(self.spacing) > 0.0):
            raise ValueError("grid spacing must be positive")
        object.__setattr__(self, "x", vx)
        object.__setattr__(self, "y", vy)
        object.__setattr__(self, "spacing", float(self.spacing))

    @property
    def shape(self) -> tuple[int, int]:
        return self.x.shape

    def magnitude(self) -> np.ndarray:
        return np.hypot(self.x, self.y)


def inner_product(a, b) -> float:
    """Cell-weighted (h^2) inner product of two grids or two vector fields."""
    if isinstance(a, ImageGrid) and isinstance(b, ImageGrid):
        if a.shape != b.shape:
            raise ValueError("shape mismatch in inner_product")
        return float(a.spacing ** 2 * np.sum(a.data * b.data))
    if isinstance(a, VectorField) and isinstance(b, VectorField):
        if a.shape != b.shape:
            raise ValueError("shape mismatch in inner_product")
        return float(a.spacing ** 2 * np.sum(a.x * b.x + a.y * b.y))
    raise TypeError("inner_product expects two ImageGrid or two VectorField values")


# ---------------------------------------------------------------------------
# difference stencils


def _grad_arrays(u: np.ndarray, h: float) -> tuple[np.ndarray, np.ndarray]:
    gx = np.zeros_like(u)
    gy = np.zeros_like(u)
    gx[:, :-1] = (u[:, 1:] - u[:, :-1]) / h
    gy[:-1, :] = (u[1:, :] - u[:-1, :]) / h
    return gx, gy


def _div_arrays(px: np.ndarray, py: np.ndarray, h: float) -> np.ndarray:
    d = np.zeros_like(px)
    # x part: transpose of the forward column difference
    d[:, 0] += px[:, 0]
    d[:, 1:-1] += px[:, 1:-1] - px[:, :-2]
    d[:, -1] += -px[:, -2] if px.shape[1] > 1 else 0.0
    # y part
    d[0, :] += py[0, :]
    d[1:-1, :] += py[1:-1, :] - py[:-2, :]
    d[-1, :] += -py[-2, :] if py.shape[0] > 1 else 0.0
    return d / h


def forward_gradient(u: ImageGrid) -> VectorField:
    """One-sided forward differences; zero on the last column (x) / row (y)."""
    gx, gy = _grad_arrays(u.data, u.spacing)
    return VectorField(gx, gy, u.spacing)


def backward_gradient(u: ImageGrid) -> VectorField:
    """One-sided backward differences; zero on the first column (x) / row (y)."""
    h = u.spacing
    bx = np.zeros_like(u.data)
    by = np.zeros_like(u.data)
    bx[:, 1:] = (u.data[:, 1:] - u.data[:, :-1]) / h
    by[1:, :] = (u.data[1:, :] - u.data[:-1, :]) / h
    return VectorField(bx, by, h)


def divergence(p: VectorField) -> ImageGrid:
    """Negative adjoint of ``forward_gradient``:

    <forward_gradient(u), p> == -<u, divergence(p)> exactly for all u, p.
    """
    return ImageGrid(_div_arrays(p.x, p.y, p.spacing), p.spacing)


def laplacian(u: ImageGrid) -> ImageGrid:
    """divergence(forward_gradient(u)): 5-point stencil with Neumann closure."""
    return divergence(forward_gradient(u))


# ---------------------------------------------------------------------------
# Gaussian smoothing


def gaussian_kernel1d(rho: float) -> np.ndarray:
    """Sampled Gaussian of std ``rho`` truncated at radius ceil(3*rho), unit sum."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    radius = int(np.ceil(3.0 * rho))
    xs = np.arange(-radius, radius + 1, dtype=np.float64)
    w = np.exp(-0.5 * (xs / rho) ** 2)
    return w / w.sum()


def gaussian_convolve(u: ImageGrid, rho: float) -> ImageGrid:
    """Separable Gaussian smoothing with symmetric boundary handling.

    The reflected boundary together with the normalised symmetric kernel
    conserves total mass, so the output mean equals the input mean.
    """
    k = gaussian_kernel1d(rho)
    out = convolve1d(u.data, k, axis=0, mode="reflect")
    out = convolve1d(out, k, axis=1, mode="reflect")
    return u.with_data(out)


# ---------------------------------------------------------------------------
# continuous views: piecewise-linear interpolation and cell averaging


class LinearInterpolant:
    """Continuous piecewise-linear extension of a grid.

    Exact at the pixel-center nodes; linear on the two triangles of each node
    square between them; clamped to the nearest node inside the half-pixel
    margin along the domain boundary (so constants stay constant).
    Evaluation outside the closed domain raises ValueError.
    """

    def __init__(self, grid: ImageGrid):
        self._grid = grid

    @property
    def grid(self) -> ImageGrid:
        return self._grid

    @property
    def domain(self) -> tuple[tuple[float, float], tuple[float, float]]:
        h = self._grid.spacing
        return ((0.0, self._grid.width * h), (0.0, self._grid.height * h))

    def __call__(self, x, y) -> np.ndarray:
        data = self._grid.data
        h = self._grid.spacing
        H, W = data.shape
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        (x0, x1), (y0, y1) = self.domain
        tol = 1e-9 * max(x1 - x0, y1 - y0)
        if (np.any(x < x0 - tol) or np.any(x > x1 + tol)
                or np.any(y < y0 - tol) or np.any(y > y1 + tol)):
            raise ValueError("evaluation point outside the grid domain")
        # node (pixel-center) coordinates, clamped to the node hull
        s = np.clip(x / h - 0.5, 0.0, W - 1.0)
        t = np.clip(y / h - 0.5, 0.0, H - 1.0)
        c0 = np.minimum(np.floor(s).astype(np.int64), max(W - 2, 0))
        r0 = np.minimum(np.floor(t).astype(np.int64), max(H - 2, 0))
        xi = s - c0
        eta = t - r0
        c1 = np.minimum(c0 + 1, W - 1)
        r1 = np.minimum(r0 + 1, H - 1)
        a = data[r0, c0]
        b = data[r0, c1]
        c = data[r1, c0]
        d = data[r1, c1]
        lower = a + xi * (b - a) + eta * (c - a)
        upper = d + (1.0 - xi) * (c - d) + (1.0 - eta) * (b - d)
        return np.where(xi + eta <= 1.0, lower, upper)


def linear_interpolant(u: ImageGrid) -> LinearInterpolant:
    return LinearInterpolant(u)


def _quad_axis(lo: float, hi: float, cells: int, order: int):
    """GL nodes/weights for a composite rule with `cells` cells on [lo, hi]."""
    nodes, wts = leggauss(order)
    hcell = (hi - lo) / cells
    centers = lo + (np.arange(cells) + 0.5) * hcell
    pts = (centers[:, None] + 0.5 * hcell * nodes[None, :]).ravel()
    w = np.tile(0.5 * hcell * wts, cells)
    return pts, w


def l2_distance(f: LinearInterpolant, g: LinearInterpolant | None = None,
                refine: int = 4, quad_order: int = 2) -> float:
    """L2 norm of (f - g) over the shared domain (of f when g is None).

    Composite Gauss-Legendre quadrature on a common refinement grid
    ``refine`` times finer along each axis than the finer of the two
    lattices.
    """
    (x0, x1), (y0, y1) = f.domain
    if g is not None:
        (gx0, gx1), (gy0, gy1) = g.domain
        scale = max(x1 - x0, y1 - y0)
        if (abs(gx0 - x0) > 1e-9 * scale or abs(gx1 - x1) > 1e-9 * scale
                or abs(gy0 - y0) > 1e-9 * scale or abs(gy1 - y1) > 1e-9 * scale):
            raise ValueError("l2_distance requires matching domains")
    cells_x = refine * max(f.grid.width, g.grid.width if g else 1)
    cells_y = refine * max(f.grid.height, g.grid.height if g else 1)
    xs, wx = _quad_axis(x0, x1, cells_x, quad_order)
    ys, wy = _quad_axis(y0, y1, cells_y, quad_order)
    total = 0.0
    block = max(1, 2_000_000 // max(xs.size, 1))
    for lo in range(0, ys.size, block):
        yb = ys[lo:lo + block][:, None]
        wyb = wy[lo:lo + block][:, None]
        xb = xs[None, :]
        diff = f(xb, yb)
        if g is not None:
            diff = diff - g(xb, yb)
        total += float(np.sum(diff * diff * wyb * wx[None, :]))
    return float(np.sqrt(total))


def sample_cell_averages(f, n: int, domain=None) -> ImageGrid:
    """Cell averages of a continuous function on an n-by-n partition.

    ``f`` is a vectorised callable f(x, y); the square domain defaults to the
    callable's ``domain`` attribute, else the unit square.  Averages use a
    4x4 tensor Gauss-Legendre rule per cell, which is exact for the
    piecewise-linear functions produced by ``linear_interpolant``.
    """
    if n < 2:
        raise ValueError("n must be at least 2")
    if domain is None:
        domain = getattr(f, "domain", ((0.0, 1.0), (0.0, 1.0)))
    (x0, x1), (y0, y1) = domain
    if abs((x1 - x0) - (y1 - y0)) > 1e-12 * max(x1 - x0, y1 - y0):
        raise ValueError("sample_cell_averages expects a square domain")
    h = (x1 - x0) / n
    nodes, wts = leggauss(4)
    wts = wts / 2.0  # unit-sum weights: cell average, not integral
    offs = 0.5 * h * nodes
    out = np.empty((n, n), dtype=np.float64)
    xc = x0 + (np.arange(n) + 0.5) * h
    yc = y0 + (np.arange(n) + 0.5) * h
    X = (xc[:, None] + offs[None, :]).ravel()  # (n*4,)
    block = max(1, 2_000_000 // max(X.size * 4, 1))
    for lo in range(0, n, block):
        hi = min(n, lo + block)
        Y = (yc[lo:hi, None] + offs[None, :]).ravel()
        raw = np.asarray(f(X[None, :], Y[:, None]), dtype=np.float64)
        vals = np.broadcast_to(raw, (Y.size, X.size)).reshape(hi - lo, 4, n, 4)
        out[lo:hi] = np.einsum("rjci,j,i->rc", vals, wts, wts)
    return ImageGrid(out, h)


def modulus_of_continuity(u: ImageGrid, t: float) -> float:
    """Largest L2 difference between u and an integer-pixel translate by <= t.

    The supremum runs over integer shift vectors whose physical length does
    not exceed ``t``; each candidate norm is taken over the overlap region
    with the h^2 cell weight.  Returns 0.0 when no nonzero shift fits.
    """
    h = u.spacing
    H, W = u.shape
    extent = min(H, W) * h
    if not (0.0 < t < extent):
        raise ValueError("t must lie strictly between 0 and the domain extent")
    m = int(np.floor(t / h + 1e-12))
    data = u.data
    best = 0.0
    for dy in range(-m, m + 1):
        for dx in range(-m, m + 1):
            if dx == 0 and dy == 0:
                continue
            if (dx * dx + dy * dy) * h * h > t * t * (1.0 + 1e-12):
                continue
            if abs(dy) >= H or abs(dx) >= W:
                continue
            r0, r1 = max(0, dy), H + min(0, dy)
            c0, c1 = max(0, dx), W + min(0, dx)
            a = data[r0:r1, c0:c1]
            b = data[r0 - dy:r1 - dy, c0 - dx:c1 - dx]
            diff = a - b
            val = float(np.sqrt(h * h * np.sum(diff * diff)))
            if val > best:
                best = val
    return best
