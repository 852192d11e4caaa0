"""Command-line surface: denoise, compare, convergence, addnoise.

Configuration comes from flat ``key=value`` files (``--config``) with
command-line flags taking precedence.  All randomness is seeded, wall-clock
values never reach output files, and CSV floats are printed with 17
significant digits, so identical invocations produce bit-identical files.

Exit codes: 0 success, 1 usage or parameter error, 2 I/O error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .grid_ops import ImageGrid
from .metrics import psnr
from .pnm import PnmError, read_image, write_image
from .refinement import ImageKind, RefinementStudy, refinement_study
from .regularizers import (EdgeWeightParams, RegKind, RegularizerSpec,
                           edge_indicator, mad_threshold)
from .solvers import (NumericsError, SolveReport, SolverConfig, admm,
                      explicit_diffusion, fgp, pdhg, proj_grad, split_bregman)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3

# Table-style display order for the solver comparison.
_COMPARE_ORDER = ("split_bregman", "pdhg", "fgp", "admm", "proj_grad")
_TV_ONLY = ("admm", "pdhg", "proj_grad", "fgp")


class UsageError(Exception):
    """Bad flags, bad config values, or missing required inputs."""


@dataclass(frozen=True)
class NoiseModel:
    """Seeded i.i.d. Gaussian noise, parameterized on the 0-255 scale."""

    sigma_255: float
    mean_255: float = 0.0
    seed: int = 0
    kind: str = "gaussian"

    def __post_init__(self):
        if self.sigma_255 < 0:
            raise ValueError("sigma_255 must be nonnegative")
        if self.kind != "gaussian":
            raise ValueError(f"unsupported noise kind {self.kind!r}")


def add_noise(u: ImageGrid, model: NoiseModel) -> ImageGrid:
    """Add seeded Gaussian noise; the result is deliberately not clamped
    (clamping happens only when an image file is written)."""
    rng = np.random.default_rng(model.seed)
    noise = rng.normal(model.mean_255 / 255.0, model.sigma_255 / 255.0, u.shape)
    return u.with_data(u.data + noise)


@dataclass(frozen=True)
class RunConfig:
    """Everything one subcommand run needs, already validated and typed."""

    input_path: str | None = None
    output_path: str | None = None
    trace_path: str | None = None
    reference_path: str | None = None
    solver: str = "split_bregman"
    reg_kind: RegKind = RegKind.ADAPTIVE
    k: float | None = None
    a: float = 1.0
    b: float = 0.05
    cfg: SolverConfig = SolverConfig()
    noise: NoiseModel | None = None
    edge_weight: bool = True
    edge_params: EdgeWeightParams = EdgeWeightParams()
    spacing: float = 0.2
    tols: tuple[float, ...] = (1e-2, 1e-4, 1e-6)
    study_kind: ImageKind = ImageKind.SMOOTH_BUMP
    levels: tuple[int, ...] = (16, 32, 64, 128)


# ---------------------------------------------------------------------------
# option plumbing


def _onoff(text: str) -> bool:
    value = text.strip().lower()
    if value in ("on", "true", "1", "yes"):
        return True
    if value in ("off", "false", "0", "no"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _int_list(text: str) -> tuple[int, ...]:
    items = tuple(int(t) for t in text.split(",") if t.strip())
    if not items:
        raise ValueError("expected a comma-separated list of integers")
    return items


def _float_list(text: str) -> tuple[float, ...]:
    items = tuple(float(t) for t in text.split(",") if t.strip())
    if not items:
        raise ValueError("expected a comma-separated list of reals")
    return items


_CONVERTERS = {
    "in": str, "out": str, "trace": str, "ref": str, "config": str,
    "solver": str, "reg": str, "kind": str,
    "lam": float, "mu": float, "tol": float, "k": float, "a": float,
    "b": float, "rho": float, "edge_k": float, "h": float,
    "epsilon_sq": float, "sigma": float, "noise_mean": float,
    "time_step": float, "admm_penalty": float, "pdhg_tau": float,
    "pdhg_sigma": float, "dual_step": float,
    "max_iters": int, "seed": int, "sweeps": int,
    "adaptive_lambda": _onoff, "adaptive_normalized": _onoff,
    "edge_weight": _onoff,
    "levels": _int_list, "tols": _float_list,
}

_SOLVER_OPTS = {
    "solver": "split_bregman", "reg": "adaptive", "lam": 10.0, "mu": None,
    "tol": 1e-4, "max_iters": 20000, "k": None, "a": 1.0, "b": 0.05,
    "rho": 2.0, "edge_k": 10.0, "h": 0.2, "epsilon_sq": 1e-6,
    "adaptive_lambda": False, "adaptive_normalized": True,
    "edge_weight": True, "sweeps": 1, "time_step": None,
    "admm_penalty": None, "pdhg_tau": None, "pdhg_sigma": None,
    "dual_step": None,
}

_NOISE_OPTS = {"sigma": 0.0, "seed": 0, "noise_mean": 0.0}

_SUBCOMMAND_OPTS = {
    "denoise": {"in": None, "out": None, "trace": None, "ref": None,
                **_SOLVER_OPTS, **_NOISE_OPTS},
    "compare": {"in": None, "out": None, "ref": None,
                "tols": (1e-2, 1e-4, 1e-6),
                **{k: v for k, v in _SOLVER_OPTS.items()
                   if k not in ("solver", "reg")},
                **_NOISE_OPTS},
    "convergence": {"out": None, "kind": "smooth_bump",
                    "levels": (16, 32, 64, 128),
                    **{k: v for k, v in _SOLVER_OPTS.items()
                       if k not in ("solver", "h", "edge_weight", "time_step",
                                    "admm_penalty", "pdhg_tau", "pdhg_sigma",
                                    "dual_step")},
                    "reg": "tv",
                    **_NOISE_OPTS},
    "addnoise": {"in": None, "out": None, **_NOISE_OPTS},
}

_HELP = {
    "in": "input PGM/PPM image", "out": "output file",
    "trace": "per-iteration CSV trace", "ref": "noise-free reference image",
    "config": "flat key=value config file (flags override it)",
    "solver": "split_bregman | admm | pdhg | proj_grad | fgp | diffusion",
    "reg": "tikhonov | tv | huber | tukey | adaptive",
    "lam": "fidelity weight", "mu": "splitting fidelity override",
    "tol": "stopping tolerance on the gap", "max_iters": "iteration cap",
    "k": "penalty transition threshold (default: MAD estimate)",
    "a": "quadratic slope of the adaptive penalty below k",
    "b": "quadratic slope of the adaptive penalty above k",
    "rho": "edge-detection smoothing width in pixels",
    "edge_k": "edge-weight contrast parameter",
    "h": "lattice spacing", "epsilon_sq": "adaptive fidelity floor",
    "sigma": "Gaussian noise std dev on the 0-255 scale",
    "seed": "noise seed", "noise_mean": "noise mean on the 0-255 scale",
    "adaptive_lambda": "pixelwise fidelity weight on|off",
    "adaptive_normalized": "normalize the pixelwise fidelity on|off",
    "edge_weight": "edge-weighted penalty on|off",
    "sweeps": "inner Gauss-Seidel sweeps per outer iteration",
    "time_step": "explicit diffusion time step (default h^2/4)",
    "admm_penalty": "ADMM penalty (default 2*lam)",
    "pdhg_tau": "PDHG primal step", "pdhg_sigma": "PDHG dual step",
    "dual_step": "dual-projection step (default lam*h^2/8)",
    "kind": "step | ramp | smooth_bump",
    "levels": "comma-separated lattice sizes, increasing",
    "tols": "comma-separated stopping tolerances",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="varistore",
                     description="Edge-weighted variational image denoising.")
    subs = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, opts in _SUBCOMMAND_OPTS.items():
        sub = subs.add_parser(name, help=f"{name} subcommand")
        sub.add_argument("--config", type=str, default=None, help=_HELP["config"])
        for key in opts:
            flag = "--" + key.replace("_", "-")
            sub.add_argument(flag, dest=key, type=_CONVERTERS[key],
                             default=None, help=_HELP[key])
    return parser


def parse_config_file(path: str) -> dict[str, str]:
    """Parse a flat key=value config file; '#' starts a comment line."""
    text = Path(path).read_text()
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{lineno}: expected key=value")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _effective_options(args: argparse.Namespace, command: str) -> dict:
    eff = dict(_SUBCOMMAND_OPTS[command])
    config_path = getattr(args, "config", None)
    if config_path:
        for key, raw in parse_config_file(config_path).items():
            if key not in _CONVERTERS:
                raise UsageError(f"unknown config key {key!r}")
            if key in eff:
                try:
                    eff[key] = _CONVERTERS[key](raw)
                except ValueError as exc:
                    raise UsageError(f"config key {key}: {exc}") from None
    for key in eff:
        value = getattr(args, key, None)
        if value is not None:
            eff[key] = value
    return eff


# ---------------------------------------------------------------------------
# shared pipeline pieces


def _require(eff: dict, command: str, *keys: str) -> None:
    for key in keys:
        if not eff.get(key):
            raise UsageError(f"{command} requires --{key.replace('_', '-')}")


def _noise_from(eff: dict) -> NoiseModel | None:
    if eff.get("sigma", 0.0) or eff.get("noise_mean", 0.0):
        return NoiseModel(eff["sigma"], eff["noise_mean"], eff["seed"])
    return None


def _run_config(eff: dict, command: str) -> RunConfig:
    kwargs = dict(
        input_path=eff.get("in"), output_path=eff.get("out"),
        trace_path=eff.get("trace"), reference_path=eff.get("ref"),
        noise=_noise_from(eff),
    )
    if command != "addnoise":
        kwargs.update(
            reg_kind=RegKind(eff["reg"]) if "reg" in eff else RegKind.TV,
            k=eff.get("k"), a=eff.get("a", 1.0), b=eff.get("b", 0.05),
            cfg=_solver_config(eff),
            edge_weight=eff.get("edge_weight", True),
            edge_params=EdgeWeightParams(eff.get("edge_k", 10.0),
                                         eff.get("rho", 2.0)),
            spacing=eff.get("h", 0.2),
        )
    if command == "denoise":
        kwargs["solver"] = eff["solver"]
    if command == "compare":
        kwargs["tols"] = tuple(sorted(eff["tols"], reverse=True))
    if command == "convergence":
        try:
            kwargs["study_kind"] = ImageKind(eff["kind"])
        except ValueError:
            raise UsageError(f"unknown image kind {eff['kind']!r}") from None
        kwargs["levels"] = eff["levels"]
    return RunConfig(**kwargs)


def _solver_config(eff: dict) -> SolverConfig:
    return SolverConfig(
        lam=eff["lam"], adaptive_lambda=eff["adaptive_lambda"],
        adaptive_normalized=eff["adaptive_normalized"],
        epsilon_sq=eff["epsilon_sq"], mu=eff["mu"], gap_tol=eff["tol"],
        max_iters=eff["max_iters"], inner_gs_sweeps=eff["sweeps"],
        time_step=eff.get("time_step"), admm_penalty=eff.get("admm_penalty"),
        pdhg_tau=eff.get("pdhg_tau"), pdhg_sigma=eff.get("pdhg_sigma"),
        dual_step=eff.get("dual_step"), seed=eff["seed"])


def _reg_spec(rc: RunConfig, estimate_from: ImageGrid | None) -> RegularizerSpec:
    k = rc.k
    if k is None and rc.reg_kind in (RegKind.HUBER, RegKind.TUKEY,
                                     RegKind.ADAPTIVE):
        if estimate_from is None:
            raise UsageError("--k is required here (no image to estimate it from)")
        k = mad_threshold(estimate_from)
    return RegularizerSpec(rc.reg_kind, k=k if k is not None else 1.0,
                           a=rc.a, b=rc.b)


def _weight_for(u0: ImageGrid, rc: RunConfig) -> ImageGrid:
    if rc.edge_weight:
        return edge_indicator(u0, rc.edge_params)
    return u0.with_data(np.ones(u0.shape))


def _solve(name: str, u0: ImageGrid, weight: ImageGrid, cfg: SolverConfig,
           reg: RegularizerSpec, reference: ImageGrid | None) -> SolveReport:
    if name == "split_bregman":
        return split_bregman(u0, weight, cfg, reg, reference)
    if name == "diffusion":
        return explicit_diffusion(u0, weight, cfg, reg, reference)
    if name in _TV_ONLY:
        if reg.kind is not RegKind.TV:
            raise UsageError(f"solver {name} supports only --reg tv")
        fn = {"admm": admm, "pdhg": pdhg, "proj_grad": proj_grad, "fgp": fgp}[name]
        return fn(u0, weight, cfg, reference)
    raise UsageError(f"unknown solver {name!r}")


def _channels(image) -> list[ImageGrid]:
    return [image] if isinstance(image, ImageGrid) else list(image)


def _read_channels(path: str, spacing: float) -> list[ImageGrid]:
    return _channels(read_image(path, spacing))


def _fmt(value: float) -> str:
    return format(float(value), ".17g")


def _thread_count() -> int:
    raw = os.environ.get("VARISTORE_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def _stacked(channels: list[ImageGrid]) -> ImageGrid:
    if len(channels) == 1:
        return channels[0]
    return ImageGrid(np.hstack([ch.data for ch in channels]),
                     channels[0].spacing)


def _write_trace(path: str, report: SolveReport, psnr_db: float | None) -> None:
    lines = ["iter,reg,fid,total,gap,me"]
    for i, eb in enumerate(report.energy_trace):
        lines.append(",".join([str(i + 1), _fmt(eb.regularization),
                               _fmt(eb.fidelity), _fmt(eb.total),
                               _fmt(report.gap_trace[i]),
                               _fmt(report.me_trace[i])]))
    if psnr_db is not None:
        lines.append(f"# psnr_db={_fmt(psnr_db)}")
    lines.append(f"# iterations={report.iterations}")
    lines.append(f"# terminated_by={report.terminated_by}")
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


# ---------------------------------------------------------------------------
# subcommands


def run_denoise(rc: RunConfig) -> int:
    channels = _read_channels(rc.input_path, rc.spacing)
    references: list[ImageGrid] | None = None
    if rc.reference_path:
        references = _read_channels(rc.reference_path, rc.spacing)
    if rc.noise is not None:
        if references is None:
            references = channels
        channels = [add_noise(ch, rc.noise) for ch in channels]
    if references is not None:
        if len(references) != len(channels):
            raise UsageError("reference channel count differs from input")
        if any(r.shape != c.shape for r, c in zip(references, channels)):
            raise UsageError("reference dimensions differ from input")

    reports = []
    for i, noisy in enumerate(channels):
        reg = _reg_spec(rc, noisy)
        weight = _weight_for(noisy, rc)
        ref = references[i] if references is not None else None
        reports.append(_solve(rc.solver, noisy, weight, rc.cfg, reg, ref))

    restored = [r.restored for r in reports]
    write_image(rc.output_path, restored[0] if len(restored) == 1 else tuple(restored))

    psnr_db = None
    if references is not None:
        psnr_db = psnr(_stacked(restored), _stacked(references))
    if rc.trace_path:
        _write_trace(rc.trace_path, reports[0], psnr_db)
    summary = f"denoise: {reports[0].iterations} iterations"
    if psnr_db is not None:
        summary += f", psnr {psnr_db:.2f} dB"
    print(summary)
    return EXIT_OK


def _iterations_to(report: SolveReport, tol: float) -> int:
    for i, gap in enumerate(report.gap_trace):
        if gap <= tol:
            return i + 1
    return report.iterations


def run_compare(rc: RunConfig) -> int:
    channels = _read_channels(rc.input_path, rc.spacing)
    if len(channels) != 1:
        raise UsageError("compare expects a grayscale image")
    u0 = channels[0]
    reference = None
    if rc.reference_path:
        ref_channels = _read_channels(rc.reference_path, rc.spacing)
        if len(ref_channels) != 1 or ref_channels[0].shape != u0.shape:
            raise UsageError("reference must be a grayscale image of equal size")
        reference = ref_channels[0]
    if rc.noise is not None:
        if reference is None:
            reference = u0
        u0 = add_noise(u0, rc.noise)

    tight = min(rc.tols)
    cfg = replace(rc.cfg, gap_tol=tight)
    reg = RegularizerSpec(RegKind.TV)
    weight = _weight_for(u0, rc)

    def task(name: str) -> SolveReport:
        return _solve(name, u0, weight, cfg, reg, reference)

    threads = _thread_count()
    if threads > 1:
        with ThreadPoolExecutor(max_workers=min(threads, len(_COMPARE_ORDER))) as pool:
            reports = list(pool.map(task, _COMPARE_ORDER))
    else:
        reports = [task(name) for name in _COMPARE_ORDER]

    rows = []
    for name, report in zip(_COMPARE_ORDER, reports):
        for tol in rc.tols:
            iters = _iterations_to(report, tol)
            rows.append((name, tol, iters, report.me_trace[iters - 1]))

    width = max(len(n) for n in _COMPARE_ORDER)
    header = "solver".ljust(width) + "".join(f"  tol={t:g}".rjust(14) for t in rc.tols)
    print(header)
    for name, report in zip(_COMPARE_ORDER, reports):
        cells = "".join(str(_iterations_to(report, t)).rjust(14) for t in rc.tols)
        print(name.ljust(width) + cells)

    if rc.output_path:
        lines = ["solver,tol,iterations,me"]
        for name, tol, iters, me in rows:
            lines.append(f"{name},{_fmt(tol)},{iters},{_fmt(me)}")
        Path(rc.output_path).write_text("\n".join(lines) + "\n", newline="\n")
    return EXIT_OK


def run_convergence(rc: RunConfig) -> int:
    spec = _reg_spec(rc, None)
    sigma = rc.noise.sigma_255 if rc.noise is not None else 0.0
    seed = rc.noise.seed if rc.noise is not None else rc.cfg.seed
    study = refinement_study(rc.study_kind, noise_sigma=sigma, seed=seed,
                             levels=rc.levels, spec=spec, cfg=rc.cfg,
                             edge_params=rc.edge_params)
    _write_study(rc.output_path, study)
    print(f"convergence: fitted rate {study.fitted_rate:.3f}, "
          f"monotone={'yes' if study.monotone else 'no'}")
    return EXIT_OK


def _write_study(path: str, study: RefinementStudy) -> None:
    lines = ["h,N,error_l2,energy"]
    for (h, n), err, energy in zip(study.levels, study.errors_l2, study.energies):
        lines.append(f"{_fmt(h)},{n},{_fmt(err)},{_fmt(energy)}")
    lines.append(f"# fitted_rate={_fmt(study.fitted_rate)}")
    lines.append(f"# monotone={'true' if study.monotone else 'false'}")
    Path(path).write_text("\n".join(lines) + "\n", newline="\n")


def run_addnoise(rc: RunConfig) -> int:
    channels = _read_channels(rc.input_path, rc.spacing)
    model = rc.noise if rc.noise is not None else NoiseModel(0.0)
    noisy = [add_noise(ch, model) for ch in channels]
    write_image(rc.output_path, noisy[0] if len(noisy) == 1 else tuple(noisy))
    print(f"addnoise: sigma {model.sigma_255:g}, seed {model.seed}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


_REQUIRED = {
    "denoise": ("in", "out"),
    "compare": ("in",),
    "convergence": ("out",),
    "addnoise": ("in", "out"),
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "command", None):
            raise UsageError("a subcommand is required "
                             "(denoise, compare, convergence, addnoise)")
        eff = _effective_options(args, args.command)
        _require(eff, args.command, *_REQUIRED[args.command])
        rc = _run_config(eff, args.command)
        runner = {"denoise": run_denoise, "compare": run_compare,
                  "convergence": run_convergence, "addnoise": run_addnoise}
        return runner[args.command](rc)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (PnmError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericsError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
