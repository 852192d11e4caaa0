"""Solvers for edge-weighted variational denoising.

Five iterative methods minimise the convex lattice objective

    h^2 * sum_ij W_ij * phi(|(grad u)_ij|) + h^2/2 * sum_ij mu_ij (u - u0)_ij^2

* ``split_bregman`` -- operator splitting d = grad u with Bregman feedback;
  handles every convex penalty kind via a closed-form proximal d-update
  (plain soft shrinkage for TV).
* ``admm`` -- the same splitting driven as ADMM with an independent penalty
  parameter (default twice the fidelity weight, so its trajectory is
  distinct); with penalty equal to the fidelity weight and a single
  Gauss-Seidel sweep it coincides with ``split_bregman``.
* ``pdhg`` -- primal-dual hybrid gradient on the TV saddle problem.
* ``proj_grad`` -- projected gradient descent on the TV dual.
* ``fgp`` -- the Nesterov-accelerated variant of ``proj_grad``.

``explicit_diffusion`` integrates the corresponding reaction-diffusion flow
du/dt = div(W g(|grad u|) grad u) - lam (u - u0) with forward Euler; it is
the reference oracle for non-convex penalties and cross-checks.

Stopping uses the relative TV duality gap whenever a feasible dual field is
available (TV penalty, scalar fidelity weight); other configurations fall
back to the relative change between successive iterates.  Restored outputs
are clamped to the intersection of [0, 1] with the input range, which can
only decrease the objective.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from time import perf_counter

import numpy as np

from .energy import EnergyBreakdown, discrete_energy
from .grid_ops import ImageGrid, _div_arrays, _grad_arrays
from .regularizers import RegKind, RegularizerSpec, adaptive_lambda, diffusivity

try:  # numba accelerates the lexicographic Gauss-Seidel sweep when present
    from numba import njit as _njit
except ImportError:  # pragma: no cover - exercised only without numba
    _njit = None

_TINY = 1e-300


class NumericsError(RuntimeError):
    """Raised when an iteration produces non-finite or runaway values."""

    def __init__(self, message: str, iteration: int):
        super().__init__(f"{message} (iteration {iteration})")
        self.iteration = iteration


@dataclass(frozen=True)
class SolverConfig:
    """Shared solver knobs.

    ``lam`` is the scalar fidelity weight; with ``adaptive_lambda`` it is
    replaced each outer iteration by the gradient-driven pixelwise field
    (splitting and diffusion methods only).  ``mu`` overrides the splitting
    fidelity weight when set (defaults to ``lam``).  ``admm_penalty``
    overrides the ADMM penalty (default ``2 * lam``).  Dual/primal step
    sizes default to the safe bounds derived from ||grad||^2 <= 8/h^2.
    """

    lam: float = 10.0
    adaptive_lambda: bool = False
    adaptive_normalized: bool = True
    epsilon_sq: float = 1e-6
    mu: float | None = None
    gap_tol: float = 1e-4
    max_iters: int = 20000
    inner_gs_sweeps: int = 1
    time_step: float | None = None
    admm_penalty: float | None = None
    pdhg_tau: float | None = None
    pdhg_sigma: float | None = None
    dual_step: float | None = None
    seed: int = 0

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError("lam must be positive")
        for name in ("mu", "time_step", "admm_penalty", "pdhg_tau",
                     "pdhg_sigma", "dual_step"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ValueError(f"{name} must be positive when given")
        if not self.gap_tol > 0:
            raise ValueError("gap_tol must be positive")
        if self.max_iters < 1 or self.inner_gs_sweeps < 1:
            raise ValueError("max_iters and inner_gs_sweeps must be >= 1")
        if not self.epsilon_sq > 0:
            raise ValueError("epsilon_sq must be positive")


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one solver run; traces have one entry per iteration."""

    restored: ImageGrid
    iterations: int
    energy_trace: list[EnergyBreakdown] = field(repr=False)
    gap_trace: list[float] = field(repr=False)
    me_trace: list[float] = field(repr=False)
    wall_seconds: float = 0.0
    terminated_by: str = "max_iters"


def shrink(x, y, gamma):
    """Vector soft-thresholding of (x, y) by gamma: pulls the magnitude
    toward zero by gamma and keeps the direction; the origin is fixed."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    m = np.hypot(x, y)
    scale = np.maximum(m - gamma, 0.0) / np.maximum(m, _TINY)
    return x * scale, y * scale


# ---------------------------------------------------------------------------
# shared plumbing


def _validate_pair(u0: ImageGrid, weight: ImageGrid) -> None:
    if weight.shape != u0.shape or abs(weight.spacing - u0.spacing) > 1e-12 * u0.spacing:
        raise ValueError("weight grid must match the input lattice")
    if not np.all(np.isfinite(u0.data)):
        raise NumericsError("non-finite input image", 0)
    if np.any(weight.data <= 0):
        raise ValueError("edge weight must be strictly positive")


def _clip_restored(u: np.ndarray, f: np.ndarray, h: float) -> ImageGrid:
    lo = max(0.0, float(f.min()))
    hi = min(1.0, float(f.max()))
    if lo > hi:
        lo, hi = hi, lo
    return ImageGrid(np.clip(u, lo, hi), h)


def _rel_gap(ep: float, ed: float) -> float:
    if ed <= 1e-12:
        return abs(ep - ed)
    return (ep - ed) / ed


def _rel_change(u: np.ndarray, u_prev: np.ndarray, h: float) -> float:
    num = np.sqrt(h * h * np.sum((u - u_prev) ** 2))
    den = max(np.sqrt(h * h * np.sum(u * u)), _TINY)
    return float(num / den)


def _tv_primal(u, f, W, lam, h) -> float:
    gx, gy = _grad_arrays(u, h)
    resid = u - f
    return float(h * h * (np.sum(W * np.hypot(gx, gy))
                          + 0.5 * lam * np.sum(resid * resid)))


def _tv_dual(bx, by, f, lam, h, W) -> float:
    mag = np.hypot(bx, by)
    scale = np.minimum(1.0, W / np.maximum(mag, _TINY))
    div = _div_arrays(bx * scale, by * scale, h)
    return float(h * h * (np.sum(f * div) - np.sum(div * div) / (2.0 * lam)))


def _mean_abs(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.mean(np.abs(a - b)))


def _project_ball(bx, by, W):
    mag = np.hypot(bx, by)
    scale = np.minimum(1.0, W / np.maximum(mag, _TINY))
    return bx * scale, by * scale


# ---------------------------------------------------------------------------
# Gauss-Seidel sweep for (mu I - div(lam grad)) u = rhs


def _gs_sweep_py(u, rhs, lam_edge, mu, inv_h2):
    H, W = u.shape
    for r in range(H):
        for c in range(W):
            den = mu[r, c]
            acc = rhs[r, c]
            if c + 1 < W:
                w = lam_edge[r, c] * inv_h2
                den += w
                acc += w * u[r, c + 1]
            if r + 1 < H:
                w = lam_edge[r, c] * inv_h2
                den += w
                acc += w * u[r + 1, c]
            if c > 0:
                w = lam_edge[r, c - 1] * inv_h2
                den += w
                acc += w * u[r, c - 1]
            if r > 0:
                w = lam_edge[r - 1, c] * inv_h2
                den += w
                acc += w * u[r - 1, c]
            u[r, c] = acc / den


if _njit is not None:
    _gs_sweep = _njit(cache=True)(_gs_sweep_py)
else:  # pragma: no cover
    _gs_sweep = _gs_sweep_py


# ---------------------------------------------------------------------------
# proximal d-updates for the splitting methods


def _prox_penalty(spec: RegularizerSpec, qx, qy, W, pen):
    """argmin_d  W * phi(|d|) + pen/2 * |d - q|^2, elementwise."""
    if spec.kind is RegKind.TV:
        return shrink(qx, qy, W / pen)
    if spec.kind is RegKind.TIKHONOV:
        scale = pen / (pen + 2.0 * W)
        return qx * scale, qy * scale
    m = np.hypot(qx, qy)
    safe = np.maximum(m, _TINY)
    k = spec.k
    if spec.kind is RegKind.HUBER:
        cut = k * (pen + W) / pen
        t = np.where(m < cut, m * pen / (pen + W), m - k * W / pen)
    elif spec.kind is RegKind.ADAPTIVE:
        aw = 2.0 * spec.a * W
        cut = k * (pen + aw) / pen
        t = np.where(m < cut,
                     m * pen / (pen + aw),
                     (pen * m - spec.c * W) / (pen + 2.0 * spec.b * W))
    else:
        raise ValueError("the tukey penalty is non-convex; use explicit_diffusion")
    scale = t / safe
    return qx * scale, qy * scale


def _splitting_solve(u0, weight, cfg, reg, pen_factor, reference, iterate_hook):
    _validate_pair(u0, weight)
    if reg.kind is RegKind.TUKEY:
        raise ValueError("the tukey penalty is non-convex; use explicit_diffusion")
    if reference is not None and reference.shape != u0.shape:
        raise ValueError("reference shape mismatch")
    h = u0.spacing
    f = u0.data
    Wd = weight.data
    shape = f.shape
    inv_h2 = 1.0 / (h * h)
    mu_scalar = cfg.mu if cfg.mu is not None else cfg.lam
    mu = np.full(shape, mu_scalar)
    pen = np.full(shape, cfg.lam * pen_factor)
    scalar_mode = not cfg.adaptive_lambda
    tv_gap = (reg.kind is RegKind.TV) and scalar_mode

    u = f.copy()
    u_prev = f.copy()
    dx = np.zeros(shape)
    dy = np.zeros(shape)
    ex = np.zeros(shape)
    ey = np.zeros(shape)
    ref_arr = reference.data if reference is not None else None

    energy_trace: list[EnergyBreakdown] = []
    gap_trace: list[float] = []
    me_trace: list[float] = []
    terminated = "max_iters"
    iterations = cfg.max_iters
    start = perf_counter()

    for t in range(1, cfg.max_iters + 1):
        if cfg.adaptive_lambda:
            lam_f = adaptive_lambda(u0.with_data(u), cfg.epsilon_sq,
                                    cfg.adaptive_normalized).data
            mu = lam_f
            pen = pen_factor * lam_f
        rhs = mu * f - _div_arrays(pen * (dx - ex), pen * (dy - ey), h)
        for _ in range(cfg.inner_gs_sweeps):
            _gs_sweep(u, rhs, pen, mu, inv_h2)
        gx, gy = _grad_arrays(u, h)
        qx = gx + ex
        qy = gy + ey
        dx, dy = _prox_penalty(reg, qx, qy, Wd, pen)
        ex = qx - dx
        ey = qy - dy
        if not np.all(np.isfinite(u)):
            raise NumericsError("non-finite iterate", t)

        lam_energy = u0.with_data(mu) if cfg.adaptive_lambda else mu_scalar
        energy_trace.append(discrete_energy(u0.with_data(u), u0, weight, reg,
                                            lam_energy))
        if tv_gap:
            penv = cfg.lam * pen_factor
            gap = _rel_gap(_tv_primal(u, f, Wd, mu_scalar, h),
                           _tv_dual(-penv * ex, -penv * ey, f, mu_scalar, h, Wd))
        else:
            gap = _rel_change(u, u_prev, h)
        gap_trace.append(gap)
        me_trace.append(_mean_abs(u, ref_arr if ref_arr is not None else u_prev))
        if iterate_hook is not None:
            iterate_hook({"iteration": t, "u": u, "dx": dx, "dy": dy,
                          "ex": ex, "ey": ey, "gx": gx, "gy": gy})
        u_prev = u.copy()
        if gap <= cfg.gap_tol:
            terminated = "gap_tol"
            iterations = t
            break

    wall = perf_counter() - start
    return SolveReport(_clip_restored(u, f, h), iterations, energy_trace,
                       gap_trace, me_trace, wall, terminated)


def split_bregman(u0: ImageGrid, weight: ImageGrid, cfg: SolverConfig,
                  reg: RegularizerSpec = RegularizerSpec(RegKind.TV),
                  reference: ImageGrid | None = None,
                  iterate_hook=None) -> SolveReport:
    """Split Bregman iteration: alternates one (or more) Gauss-Seidel sweeps
    on (mu I - div(pen grad)) u = mu u0 - div(pen (d - e)), the proximal
    d-update, and the Bregman feedback e <- e + grad u - d."""
    return _splitting_solve(u0, weight, cfg, reg, 1.0, reference, iterate_hook)


def admm(u0: ImageGrid, weight: ImageGrid, cfg: SolverConfig,
         reference: ImageGrid | None = None, iterate_hook=None) -> SolveReport:
    """ADMM on the TV splitting d = grad u with a scaled dual variable.

    The penalty defaults to twice the fidelity weight so the trajectory is
    genuinely different from ``split_bregman``; setting ``admm_penalty``
    equal to ``lam`` (with one inner sweep) restores the identical iteration.
    """
    factor = (cfg.admm_penalty / cfg.lam) if cfg.admm_penalty is not None else 2.0
    return _splitting_solve(u0, weight, cfg, RegularizerSpec(RegKind.TV),
                            factor, reference, iterate_hook)


# ---------------------------------------------------------------------------
# dual-based TV solvers (scalar fidelity weight only)


def _require_scalar(cfg: SolverConfig, name: str) -> None:
    if cfg.adaptive_lambda:
        raise ValueError(f"{name} supports only a scalar fidelity weight")


def _dual_report(u, f, h, iterations, traces, terminated, start):
    energy_trace, gap_trace, me_trace = traces
    return SolveReport(_clip_restored(u, f, h), iterations, energy_trace,
                       gap_trace, me_trace, perf_counter() - start, terminated)


def pdhg(u0: ImageGrid, weight: ImageGrid, cfg: SolverConfig,
         reference: ImageGrid | None = None, iterate_hook=None) -> SolveReport:
    """Primal-dual hybrid gradient on the TV saddle problem.

    The fidelity term makes the primal objective lam-strongly convex, so by
    default the method runs the accelerated schedule: after each iteration
    theta = 1/sqrt(1 + 2*lam*tau), tau <- theta*tau, sigma <- sigma/theta,
    and the extrapolation uses that theta.  Passing ``pdhg_tau`` and/or
    ``pdhg_sigma`` switches to fixed steps with extrapolation parameter 1.
    Either way every iteration satisfies sigma * tau * (8/h^2) < 1 (the
    accelerated schedule keeps the product constant).
    """
    _require_scalar(cfg, "pdhg")
    _validate_pair(u0, weight)
    h, f, Wd = u0.spacing, u0.data, weight.data
    lam = cfg.lam
    L2 = 8.0 / (h * h)
    accelerated = cfg.pdhg_tau is None and cfg.pdhg_sigma is None
    tau = cfg.pdhg_tau if cfg.pdhg_tau is not None else np.sqrt(0.99 / L2)
    sigma = cfg.pdhg_sigma if cfg.pdhg_sigma is not None else 0.99 / (L2 * tau)
    if tau * sigma * L2 >= 1.0:
        raise ValueError("pdhg steps must satisfy sigma * tau * 8/h^2 < 1")
    tv_spec = RegularizerSpec(RegKind.TV)
    ref_arr = reference.data if reference is not None else None

    u = f.copy()
    ubar = f.copy()
    bx = np.zeros_like(f)
    by = np.zeros_like(f)
    traces: tuple[list, list, list] = ([], [], [])
    terminated = "max_iters"
    iterations = cfg.max_iters
    start = perf_counter()
    u_prev = f.copy()
    for t in range(1, cfg.max_iters + 1):
        gx, gy = _grad_arrays(ubar, h)
        bx, by = _project_ball(bx - sigma * gx, by - sigma * gy, Wd)
        dv = _div_arrays(bx, by, h)
        un = (u + tau * lam * f - tau * dv) / (1.0 + tau * lam)
        if accelerated:
            theta = 1.0 / np.sqrt(1.0 + 2.0 * lam * tau)
            tau *= theta
            sigma /= theta
        else:
            theta = 1.0
        ubar = un + theta * (un - u)
        u = un
        if not np.all(np.isfinite(u)):
            raise NumericsError("non-finite iterate", t)
        traces[0].append(discrete_energy(u0.with_data(u), u0, weight, tv_spec, lam))
        gap = _rel_gap(_tv_primal(u, f, Wd, lam, h),
                       _tv_dual(bx, by, f, lam, h, Wd))
        traces[1].append(gap)
        traces[2].append(_mean_abs(u, ref_arr if ref_arr is not None else u_prev))
        if iterate_hook is not None:
            iterate_hook({"iteration": t, "u": u, "bx": bx, "by": by})
        u_prev = u.copy()
        if gap <= cfg.gap_tol:
            terminated = "gap_tol"
            iterations = t
            break
    return _dual_report(u, f, h, iterations, traces, terminated, start)


def _dual_ascent_core_py(f, Wd, lam, h, step, accelerated, gap_tol, max_iters,
                         ref, use_ref, reg_out, fid_out, gap_out, me_out):
    """Hot loop of the dual projection methods; trace values are written into
    the preallocated ``*_out`` arrays, one slot per completed iteration.

    Returns ``(u, bx, by, iterations, status)`` with status 0 = max_iters,
    1 = gap_tol, 2 = non-finite iterate (traces stop before that iteration).
    """
    H, W = f.shape
    hh = h * h
    n_px = H * W
    bx = np.zeros((H, W))
    by = np.zeros((H, W))
    yx = np.zeros((H, W))
    yy = np.zeros((H, W))
    uw = np.zeros((H, W))
    u = np.zeros((H, W))
    u_prev = f.copy()
    pjx = np.zeros((H, W))
    pjy = np.zeros((H, W))
    t_mom = 1.0
    status = 0
    niter = max_iters
    for t in range(1, max_iters + 1):
        # u from the working dual field, then one projected ascent step
        for r in range(H):
            for c in range(W):
                if accelerated:
                    wx_c = yx[r, c] if c < W - 1 else 0.0
                    wx_l = yx[r, c - 1] if c > 0 else 0.0
                    wy_c = yy[r, c] if r < H - 1 else 0.0
                    wy_u = yy[r - 1, c] if r > 0 else 0.0
                else:
                    wx_c = bx[r, c] if c < W - 1 else 0.0
                    wx_l = bx[r, c - 1] if c > 0 else 0.0
                    wy_c = by[r, c] if r < H - 1 else 0.0
                    wy_u = by[r - 1, c] if r > 0 else 0.0
                uw[r, c] = f[r, c] - (wx_c - wx_l + wy_c - wy_u) / (h * lam)
        for r in range(H):
            for c in range(W):
                gx = (uw[r, c + 1] - uw[r, c]) / h if c < W - 1 else 0.0
                gy = (uw[r + 1, c] - uw[r, c]) / h if r < H - 1 else 0.0
                wx = yx[r, c] if accelerated else bx[r, c]
                wy = yy[r, c] if accelerated else by[r, c]
                px = wx - step * gx
                py = wy - step * gy
                mag = np.sqrt(px * px + py * py)
                scale = min(1.0, Wd[r, c] / max(mag, _TINY))
                nx = px * scale
                ny = py * scale
                if accelerated:
                    # momentum extrapolation against the previous point
                    t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
                    coef = (t_mom - 1.0) / t_next
                    yx[r, c] = nx + coef * (nx - bx[r, c])
                    yy[r, c] = ny + coef * (ny - by[r, c])
                bx[r, c] = nx
                by[r, c] = ny
        if accelerated:
            t_mom = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
        finite = True
        for r in range(H):
            for c in range(W):
                bxc = bx[r, c] if c < W - 1 else 0.0
                bxl = bx[r, c - 1] if c > 0 else 0.0
                byc = by[r, c] if r < H - 1 else 0.0
                byu = by[r - 1, c] if r > 0 else 0.0
                val = f[r, c] - (bxc - bxl + byc - byu) / (h * lam)
                u[r, c] = val
                if not np.isfinite(val):
                    finite = False
        if not finite:
            status = 2
            niter = t
            break
        # symmetrised energy split, forward-difference primal, capped dual
        s_fwd = 0.0
        s_bwd = 0.0
        s_res = 0.0
        s_me = 0.0
        for r in range(H):
            for c in range(W):
                fx = (u[r, c + 1] - u[r, c]) / h if c < W - 1 else 0.0
                fy = (u[r + 1, c] - u[r, c]) / h if r < H - 1 else 0.0
                s_fwd += Wd[r, c] * np.sqrt(fx * fx + fy * fy)
                kx = (u[r, c] - u[r, c - 1]) / h if c > 0 else 0.0
                ky = (u[r, c] - u[r - 1, c]) / h if r > 0 else 0.0
                s_bwd += Wd[r, c] * np.sqrt(kx * kx + ky * ky)
                resid = u[r, c] - f[r, c]
                s_res += resid * resid
                other = ref[r, c] if use_ref else u_prev[r, c]
                s_me += abs(u[r, c] - other)
                mag = np.sqrt(bx[r, c] ** 2 + by[r, c] ** 2)
                scale = min(1.0, Wd[r, c] / max(mag, _TINY))
                pjx[r, c] = bx[r, c] * scale
                pjy[r, c] = by[r, c] * scale
        s_fdv = 0.0
        s_dv2 = 0.0
        for r in range(H):
            for c in range(W):
                pxc = pjx[r, c] if c < W - 1 else 0.0
                pxl = pjx[r, c - 1] if c > 0 else 0.0
                pyc = pjy[r, c] if r < H - 1 else 0.0
                pyu = pjy[r - 1, c] if r > 0 else 0.0
                dv = (pxc - pxl + pyc - pyu) / h
                s_fdv += f[r, c] * dv
                s_dv2 += dv * dv
        ep = hh * (s_fwd + 0.5 * lam * s_res)
        ed = hh * (s_fdv - s_dv2 / (2.0 * lam))
        gap = abs(ep - ed) if ed <= 1e-12 else (ep - ed) / ed
        reg_out[t - 1] = 0.5 * hh * (s_fwd + s_bwd)
        fid_out[t - 1] = 0.5 * hh * lam * s_res
        gap_out[t - 1] = gap
        me_out[t - 1] = s_me / n_px
        for r in range(H):
            for c in range(W):
                u_prev[r, c] = u[r, c]
        if gap <= gap_tol:
            status = 1
            niter = t
            break
    return u, bx, by, niter, status


if _njit is not None:
    _dual_ascent_core = _njit(cache=True)(_dual_ascent_core_py)
else:  # pragma: no cover
    _dual_ascent_core = _dual_ascent_core_py


def _dual_ascent_fast(u0, weight, cfg, reference, accelerated):
    h, f, Wd = u0.spacing, u0.data, weight.data
    lam = cfg.lam
    step = cfg.dual_step if cfg.dual_step is not None else lam * h * h / 8.0
    ref_arr = reference.data if reference is not None else None
    reg_out = np.empty(cfg.max_iters)
    fid_out = np.empty(cfg.max_iters)
    gap_out = np.empty(cfg.max_iters)
    me_out = np.empty(cfg.max_iters)
    start = perf_counter()
    u, bx, by, niter, status = _dual_ascent_core(
        np.ascontiguousarray(f), np.ascontiguousarray(Wd), float(lam),
        float(h), float(step), bool(accelerated), float(cfg.gap_tol),
        int(cfg.max_iters), np.ascontiguousarray(ref_arr if ref_arr is not None else f),
        ref_arr is not None, reg_out, fid_out, gap_out, me_out)
    if status == 2:
        raise NumericsError("non-finite iterate", niter)
    done = niter
    energy_trace = [EnergyBreakdown(r, fv)
                    for r, fv in zip(reg_out[:done].tolist(), fid_out[:done].tolist())]
    traces = (energy_trace, gap_out[:done].tolist(), me_out[:done].tolist())
    terminated = "gap_tol" if status == 1 else "max_iters"
    return _dual_report(u, f, h, niter, traces, terminated, start)


def _dual_ascent(u0, weight, cfg, reference, iterate_hook, accelerated):
    _validate_pair(u0, weight)
    if _njit is not None and iterate_hook is None:
        return _dual_ascent_fast(u0, weight, cfg, reference, accelerated)
    h, f, Wd = u0.spacing, u0.data, weight.data
    lam = cfg.lam
    step = cfg.dual_step if cfg.dual_step is not None else lam * h * h / 8.0
    tv_spec = RegularizerSpec(RegKind.TV)
    ref_arr = reference.data if reference is not None else None

    bx = np.zeros_like(f)
    by = np.zeros_like(f)
    yx = bx
    yy = by
    t_mom = 1.0
    u = f.copy()
    u_prev = f.copy()
    traces: tuple[list, list, list] = ([], [], [])
    terminated = "max_iters"
    iterations = cfg.max_iters
    start = perf_counter()
    for t in range(1, cfg.max_iters + 1):
        work_x, work_y = (yx, yy) if accelerated else (bx, by)
        u_work = f - _div_arrays(work_x, work_y, h) / lam
        gx, gy = _grad_arrays(u_work, h)
        nx, ny = _project_ball(work_x - step * gx, work_y - step * gy, Wd)
        if accelerated:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_mom * t_mom))
            yx = nx + ((t_mom - 1.0) / t_next) * (nx - bx)
            yy = ny + ((t_mom - 1.0) / t_next) * (ny - by)
            t_mom = t_next
        bx, by = nx, ny
        u = f - _div_arrays(bx, by, h) / lam
        if not np.all(np.isfinite(u)):
            raise NumericsError("non-finite iterate", t)
        traces[0].append(discrete_energy(u0.with_data(u), u0, weight, tv_spec, lam))
        gap = _rel_gap(_tv_primal(u, f, Wd, lam, h),
                       _tv_dual(bx, by, f, lam, h, Wd))
        traces[1].append(gap)
        traces[2].append(_mean_abs(u, ref_arr if ref_arr is not None else u_prev))
        if iterate_hook is not None:
            iterate_hook({"iteration": t, "u": u, "bx": bx, "by": by})
        u_prev = u.copy()
        if gap <= cfg.gap_tol:
            terminated = "gap_tol"
            iterations = t
            break
    return _dual_report(u, f, h, iterations, traces, terminated, start)


def proj_grad(u0: ImageGrid, weight: ImageGrid, cfg: SolverConfig,
              reference: ImageGrid | None = None, iterate_hook=None) -> SolveReport:
    """Projected gradient descent on the TV dual; the primal image is
    recovered as u = u0 - div(b)/lam.  With b = 0 that recovery is u0."""
    return _dual_ascent(u0, weight, cfg, reference, iterate_hook, accelerated=False)


def fgp(u0: ImageGrid, weight: ImageGrid, cfg: SolverConfig,
        reference: ImageGrid | None = None, iterate_hook=None) -> SolveReport:
    """Fast gradient projection: ``proj_grad`` plus Nesterov momentum
    t_{k+1} = (1 + sqrt(1 + 4 t_k^2)) / 2.  Its first iteration coincides
    with ``proj_grad`` started from the same zero dual field."""
    return _dual_ascent(u0, weight, cfg, reference, iterate_hook, accelerated=True)


# ---------------------------------------------------------------------------
# explicit diffusion oracle


def explicit_diffusion(u0: ImageGrid, weight: ImageGrid, cfg: SolverConfig,
                       reg: RegularizerSpec,
                       reference: ImageGrid | None = None,
                       iterate_hook=None) -> SolveReport:
    """Forward-Euler integration of the reaction-diffusion flow

        du/dt = div(W g(|grad u|) grad u) - lam (u - u0)

    with g the penalty's diffusion coefficient.  The time step must respect
    the explicit stability bound h^2/4 (the default).  Runaway amplitudes
    (beyond 10x the input range) raise ``NumericsError``; the stiff smoothed
    TV coefficient will do that by design at the default step.
    """
    _validate_pair(u0, weight)
    if reference is not None and reference.shape != u0.shape:
        raise ValueError("reference shape mismatch")
    h, f, Wd = u0.spacing, u0.data, weight.data
    dt = cfg.time_step if cfg.time_step is not None else h * h / 4.0
    if dt > h * h / 4.0 + 1e-15:
        raise ValueError("time_step exceeds the h^2/4 stability bound")
    span = float(f.max() - f.min())
    limit = 10.0 * max(span, 1e-9)
    ref_arr = reference.data if reference is not None else None

    u = f.copy()
    u_prev = f.copy()
    traces: tuple[list, list, list] = ([], [], [])
    terminated = "max_iters"
    iterations = cfg.max_iters
    start = perf_counter()
    for t in range(1, cfg.max_iters + 1):
        if cfg.adaptive_lambda:
            lam_arr = adaptive_lambda(u0.with_data(u), cfg.epsilon_sq,
                                      cfg.adaptive_normalized).data
            lam_energy = u0.with_data(lam_arr)
        else:
            lam_arr = cfg.lam
            lam_energy = cfg.lam
        gx, gy = _grad_arrays(u, h)
        g = np.asarray(diffusivity(reg, np.hypot(gx, gy)), dtype=np.float64)
        c = Wd * g
        flux = _div_arrays(c * gx, c * gy, h)
        u = u + dt * (flux - lam_arr * (u - f))
        if not np.all(np.isfinite(u)) or float(u.max() - u.min()) > limit:
            raise NumericsError("diffusion step left the stable range", t)
        traces[0].append(discrete_energy(u0.with_data(u), u0, weight, reg,
                                         lam_energy))
        gap = _rel_change(u, u_prev, h) / dt
        traces[1].append(gap)
        traces[2].append(_mean_abs(u, ref_arr if ref_arr is not None else u_prev))
        if iterate_hook is not None:
            iterate_hook({"iteration": t, "u": u})
        u_prev = u.copy()
        if gap <= cfg.gap_tol:
            terminated = "gap_tol"
            iterations = t
            break
    return _dual_report(u, f, h, iterations, traces, terminated, start)
