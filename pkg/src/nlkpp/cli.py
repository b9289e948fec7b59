"""Command line runner: scenario orchestration and artifact emission.

Subcommands: ``simulate``, ``dispersion``, ``wave``, ``front``,
``verify <suite>``.  All artifacts are plain CSV plus a ``summary.txt`` of
``key = value`` lines; identical configuration and seed produce byte-identical
output.  ``--threads`` is accepted for symmetry but never changes results
(all computation is single-threaded with a fixed summation order).
"""
from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from . import fronts, waves
from .assumptions import check_assumptions
from .config import ScenarioConfig, load_config
from .dispersion import (char_multiplicity, dispersion_G, front_set, minimize_G,
                         reduce_to_direction, speed_to_abscissa)
from .errors import MollisonFailure, NlkppError
from .evolution import EvolutionProblem, StepConfig, simulate
from .grids import Field, Grid, bump_field, constant_field, step_field
from .kernels import discretize, make_kernel


def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if x is None:
        return "none"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, float) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _write_csv(path: Path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n")


def _write_summary(path: Path, entries: dict) -> None:
    lines = [f"{key} = {_fmt(value)}" for key, value in entries.items()]
    path.write_text("\n".join(lines) + "\n")


def _assumption_entries(cfg: ScenarioConfig) -> dict:
    kp = make_kernel(cfg.kernel_plus)
    km = make_kernel(cfg.kernel_minus)
    radius = 8.0 * max(kp.effective_scale(), km.effective_scale())
    report = check_assumptions(cfg.params, kp, km, sample_radius=radius, n_samples=10000)
    entries = {}
    for key, value in report.as_dict().items():
        if isinstance(value, tuple):
            entries[f"assumption.{key}.rho"] = value[0]
            entries[f"assumption.{key}.delta"] = value[1]
        else:
            entries[f"assumption.{key}"] = value
    return entries


def build_initial(cfg: ScenarioConfig, grid: Grid) -> Field:
    spec = cfg.initial
    theta = cfg.params.theta
    if spec is None:
        return constant_field(grid, max(theta, 0.0) / 2.0)
    if spec.kind == "constant":
        return constant_field(grid, spec.value)
    if spec.kind == "bump":
        center = spec.center if spec.center is not None else (0.0,) * grid.dimension
        return bump_field(grid, center if grid.dimension > 1 else center[0],
                          spec.width, spec.height)
    if spec.kind == "step":
        return step_field(grid, max(theta, 0.0), direction=spec.direction)
    # profile-file / shifted-profile
    data = np.loadtxt(spec.path, delimiter=",", skiprows=1)
    s, psi = data[:, 0], data[:, 1]
    x = grid.axis_coords() - (spec.shift if spec.kind == "shifted-profile" else 0.0)
    line = np.interp(x, s, psi, left=psi[0], right=psi[-1])
    if grid.dimension == 1:
        return Field(grid, line)
    return Field(grid, np.tile(line[:, None], (1, grid.points_per_axis)))


def _problem(cfg: ScenarioConfig) -> EvolutionProblem:
    if cfg.grid is None:
        raise NlkppError("this scenario requires a [grid] section")
    kp = make_kernel(cfg.kernel_plus)
    km = make_kernel(cfg.kernel_minus)
    wp = discretize(kp, cfg.grid)
    wm = discretize(km, cfg.grid)
    u0 = build_initial(cfg, cfg.grid)
    return EvolutionProblem(cfg.params, wp, wm, u0)


def _snapshot_rows(traj, grid: Grid):
    if grid.dimension == 1:
        x = grid.axis_coords()
        for f in traj.snapshots:
            for i in range(len(x)):
                yield (f.time, x[i], f.values[i])
    else:
        x = grid.axis_coords()
        for f in traj.snapshots:
            for i in range(len(x)):
                for j in range(len(x)):
                    yield (f.time, x[i], x[j], f.values[i, j])


def run_simulate(cfg: ScenarioConfig, out: Path) -> dict:
    problem = _problem(cfg)
    step_cfg = StepConfig(dt=cfg.dt, method=cfg.method, floor=cfg.floor)
    traj = simulate(problem, step_cfg, cfg.horizon, snapshot_stride=cfg.snapshot_stride)
    grid = cfg.grid
    header = ["t", "x1", "u"] if grid.dimension == 1 else ["t", "x1", "x2", "u"]
    if cfg.split_snapshots:
        for idx, f in enumerate(traj.snapshots):
            sub = type(traj)()
            sub.append(f)
            _write_csv(out / f"snapshot_{idx:04d}.csv", header, _snapshot_rows(sub, grid))
    else:
        _write_csv(out / "snapshots.csv", header, _snapshot_rows(traj, grid))
    theta = max(cfg.params.theta, 0.0)
    return {
        "scenario.command": "simulate",
        "simulate.final_time": traj.times[-1],
        "simulate.final_min": traj.mins[-1],
        "simulate.final_max": traj.maxs[-1],
        "simulate.global_min": min(traj.mins),
        "simulate.global_max": max(traj.maxs),
        "simulate.strip_ok": min(traj.mins) >= -1e-9 and max(traj.maxs) <= theta + 1e-9,
    }


def run_dispersion(cfg: ScenarioConfig, out: Path) -> dict:
    kernel = make_kernel(cfg.kernel_plus)
    d = kernel.dimension
    xi = np.asarray(cfg.direction[:d], dtype=float)
    xi = xi / np.linalg.norm(xi)
    line = reduce_to_direction(kernel, xi)
    report = minimize_G(cfg.params, line)
    lo, hi, count = cfg.lambda_grid
    hi = min(hi, line.lambda0 * (1 - 1e-9)) if math.isfinite(line.lambda0) else hi
    lams = np.linspace(lo, hi, count)
    rows = [(lam, dispersion_G(cfg.params, line, lam)) for lam in lams]
    _write_csv(out / "dispersion.csv", ["lambda", "G"], rows)
    j = char_multiplicity(cfg.params, line, report.c_star, report=report)
    return {
        "scenario.command": "dispersion",
        "dispersion.lambda_star": report.lambda_star,
        "dispersion.c_star": report.c_star,
        "dispersion.class": report.kernel_class,
        "dispersion.j_at_cstar": j,
        "dispersion.m_xi": report.m_xi,
        "dispersion.t_xi_at_lambda0": report.t_xi_at_lambda0,
    }


def run_wave(cfg: ScenarioConfig, out: Path) -> dict:
    kp = make_kernel(cfg.kernel_plus)
    km = make_kernel(cfg.kernel_minus)
    xi = np.array([1.0]) if kp.dimension == 1 else np.array([1.0, 0.0])
    line_p = reduce_to_direction(kp, xi)
    line_m = reduce_to_direction(km, xi)
    report = minimize_G(cfg.params, line_p)
    if cfg.wave_speed is not None:
        c = cfg.wave_speed
    elif cfg.wave_speed_factor is not None:
        c = cfg.wave_speed_factor * report.c_star
    else:
        c = report.c_star
    if c < report.c_star - 1e-9 * max(1.0, abs(report.c_star)):
        raise NlkppError(
            f"no traveling wave below the minimal speed: c = {c:.6g} < c* = {report.c_star:.6g}"
        )
    profile = waves.solve_profile(
        cfg.params, line_p, line_m, c,
        h=cfg.wave_spacing, s_left=cfg.wave_domain[0], s_right=cfg.wave_domain[1],
        report=report,
    )
    _write_csv(out / "profile.csv", ["s", "psi"],
               zip(profile.s.tolist(), profile.psi.tolist()))
    residual = waves.profile_residual(profile, cfg.params, line_p, line_m)
    predicted = speed_to_abscissa(cfg.params, line_p, c, report=report)
    r_squared = None
    if profile.fitted_j is not None:
        _, _, r_squared = waves.fit_decay(profile, expected_j=profile.fitted_j)
    fit_lines = [
        f"speed_c = {_fmt(c)}",
        f"lambda_fit = {_fmt(profile.fitted_lambda)}",
        f"j = {_fmt(profile.fitted_j)}",
        f"r_squared = {_fmt(r_squared)}",
        f"lambda_predicted = {_fmt(predicted)}",
        f"residual_sup = {_fmt(residual)}",
    ]
    (out / "fit.txt").write_text("\n".join(fit_lines) + "\n")
    return {
        "scenario.command": "wave",
        "wave.speed": c,
        "wave.c_star": report.c_star,
        "wave.lambda_fit": profile.fitted_lambda,
        "wave.lambda_predicted": predicted,
        "wave.j": profile.fitted_j,
        "wave.residual_sup": residual,
    }


def run_front(cfg: ScenarioConfig, out: Path) -> dict:
    kernel_plus = make_kernel(cfg.kernel_plus)
    theta = cfg.params.require_carrying_capacity()
    level = cfg.front_level if cfg.front_level is not None else theta / 2.0
    problem = _problem(cfg)
    step_cfg = StepConfig(dt=cfg.dt, method=cfg.method, floor=cfg.floor)
    traj = simulate(problem, step_cfg, cfg.horizon, snapshot_stride=cfg.snapshot_stride)
    d = cfg.grid.dimension
    xi = np.array([1.0]) if d == 1 else np.array([1.0, 0.0])
    trace = fronts.track_level(traj, level, xi)
    _write_csv(out / "front_trace.csv", ["t", "position"],
               zip(trace.times.tolist(), trace.positions.tolist()))
    entries = {"scenario.command": "front", "front.level": level}
    try:
        fset = front_set(cfg.params, kernel_plus, n_directions=cfg.front_n_directions)
        times, deficits = fronts.interior_convergence(traj, fset, cfg.front_shrink, theta)
        _write_csv(out / "interior_deficit.csv", ["t", "deviation"],
                   zip(times.tolist(), deficits.tolist()))
        entries["front.c_star_max"] = float(np.max(fset.speeds))
        entries["front.c_star_min"] = float(np.min(fset.speeds))
    except MollisonFailure:
        entries["front.c_star_max"] = math.inf
        entries["front.c_star_min"] = math.inf
    if len(trace.times) >= 10:
        est = fronts.estimate_speed(trace)
        entries["front.c_hat"] = est.c_hat
        entries["front.c_hat_stderr"] = est.stderr
    try:
        entries["front.acceleration_verdict"] = fronts.acceleration_test(trace)
    except ValueError:
        entries["front.acceleration_verdict"] = "not-evaluated"
    return entries


def run_verify(cfg: ScenarioConfig, out: Path) -> dict:
    if cfg.verify_suite != "comparison":
        raise NlkppError(f"unknown verification suite {cfg.verify_suite!r}")
    theta = cfg.params.require_carrying_capacity()
    problem = _problem(cfg)
    step_cfg = StepConfig(dt=cfg.dt, method=cfg.method)
    rng = np.random.default_rng(cfg.seed)
    grid = cfg.grid

    if cfg.verify_necessity:
        # counterexample mode: domination deliberately violated near the origin
        worst_overshoot = _necessity_counterexample(cfg, step_cfg)
        return {
            "scenario.command": "verify",
            "verify.suite": "comparison-necessity",
            "verify.max_overshoot_above_theta": worst_overshoot,
            "verify.violations": 0 if worst_overshoot > 1e-4 else 1,
        }

    worst = 0.0
    worst_strip = 0.0
    envelopes_ok = True
    for _ in range(cfg.verify_pairs):
        base = theta * rng.random(grid.shape)
        gap = theta * rng.random(grid.shape)
        v0 = np.minimum(base + gap, theta)
        u0 = base
        result = fronts.comparison_harness(
            cfg.params, problem.a_plus_w, problem.a_minus_w,
            Field(grid, u0), Field(grid, v0), cfg.horizon, step_cfg,
        )
        worst = max(worst, result.max_violation)
        worst_strip = max(worst_strip, result.strip_violation)
        envelopes_ok = envelopes_ok and result.lower_envelope_ok
    violations = int(worst > 1e-9) + int(worst_strip > 1e-9) + int(not envelopes_ok)
    return {
        "scenario.command": "verify",
        "verify.suite": "comparison",
        "verify.pairs": cfg.verify_pairs,
        "verify.max_order_violation": worst,
        "verify.max_strip_violation": worst_strip,
        "verify.lower_envelope_ok": envelopes_ok,
        "verify.violations": violations,
    }


def _necessity_counterexample(cfg: ScenarioConfig, step_cfg: StepConfig) -> float:
    """Local domination failure: a competition spike makes u overshoot theta."""
    from .kernels import KernelSpec

    params = cfg.params
    theta = params.require_carrying_capacity()
    grid = cfg.grid
    kp = make_kernel(cfg.kernel_plus)
    km_spec = KernelSpec(family="gaussian", dimension=grid.dimension, sigma=0.2)
    km = make_kernel(km_spec)
    wp = discretize(kp, grid)
    wm = discretize(km, grid)
    # dent the state below theta near the spike, offset from the origin
    u0 = constant_field(grid, theta)
    dent = bump_field(grid, 0.18 if grid.dimension == 1 else (0.18, 0.0), 0.09, 0.8 * theta)
    u0 = Field(grid, np.maximum(u0.values - dent.values, 0.0))
    problem = EvolutionProblem(params, wp, wm, u0)
    traj = simulate(problem, step_cfg, cfg.horizon, snapshot_stride=1)
    return float(max(traj.maxs) - theta)


_RUNNERS = {
    "simulate": run_simulate,
    "dispersion": run_dispersion,
    "wave": run_wave,
    "front": run_front,
    "verify": run_verify,
}


def run_scenario(cfg: ScenarioConfig) -> int:
    """Execute one scenario; returns the process exit status."""
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    # thread count is deliberately not echoed: results must not depend on it
    entries = {"seed": cfg.seed}
    status = 0
    try:
        entries.update(_RUNNERS[cfg.command](cfg, out))
    except NlkppError as exc:
        entries["error"] = str(exc)
        status = 1
    entries.update(_assumption_entries(cfg))
    if entries.get("verify.violations", 0):
        status = 1
    if entries.get("simulate.strip_ok") is False:
        status = 1
    _write_summary(out / "summary.txt", entries)
    return status


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="nlkpp",
        description="Numerical laboratory for the doubly nonlocal Fisher-KPP equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "dispersion", "wave", "front"):
        p = sub.add_parser(name)
        _common_flags(p)
    p = sub.add_parser("verify")
    p.add_argument("suite", nargs="?", default=None)
    _common_flags(p)

    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config, command=args.command)
    except NlkppError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if args.out is not None:
        cfg.out_dir = args.out
    if args.seed is not None:
        cfg.seed = args.seed
    if args.threads is not None:
        cfg.threads = args.threads  # accepted; results never depend on it
    if getattr(args, "suite", None):
        cfg.verify_suite = args.suite
    try:
        return run_scenario(cfg)
    except NlkppError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--threads", type=int, default=None)


if __name__ == "__main__":
    sys.exit(main())
