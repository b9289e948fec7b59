"""Time integration of the nonlocal logistic initial-value problem.

Two independent backends solve the same problem: a standard RK4 (or
exponential-Euler) stepper with spectral circular convolutions, and a Picard
fixed-point solver that follows the contraction construction behind the
existence theorem interval by interval.  Their agreement is one of the
package's main self-checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import CertificationFailed, ConvergenceFailure, GridError
from .grids import Field, Grid
from .kernels import Kernel, SampledWeights, _displacement_coords
from .params import ModelParams


def _conv_fft(w: SampledWeights, values: np.ndarray) -> np.ndarray:
    axes = tuple(range(values.ndim))
    return np.fft.irfftn(np.fft.rfftn(values, axes=axes) * w.fft(), s=values.shape, axes=axes)


def _conv_direct(w: SampledWeights, values: np.ndarray) -> np.ndarray:
    """Circular convolution with a fixed summation order over displacements.

    The accumulation order depends only on the weight layout, never on the
    data, so whole-cell translations of the input commute with this
    convolution bitwise.  O(N * support); reserved for small grids.
    """
    out = np.zeros_like(values)
    flat = w.weights.reshape(-1)
    nz = np.flatnonzero(flat != 0.0)
    shape = w.weights.shape
    for j in nz:
        idx = np.unravel_index(j, shape)
        shifted = values
        for axis, k in enumerate(idx):
            if k:
                shifted = np.roll(shifted, k, axis=axis)
        out += flat[j] * shifted
    return out


def convolve(w: SampledWeights, values: np.ndarray, backend: str = "fft") -> np.ndarray:
    if backend == "fft":
        return _conv_fft(w, values)
    if backend == "direct":
        return _conv_direct(w, values)
    raise ValueError(f"unknown convolution backend {backend!r}")


@dataclass(frozen=True)
class EvolutionProblem:
    """Model parameters, sampled kernels and the current state on one grid."""

    params: ModelParams
    a_plus_w: SampledWeights
    a_minus_w: SampledWeights
    u: Field

    def __post_init__(self):
        shape = self.u.grid.shape
        if self.a_plus_w.shape != shape or self.a_minus_w.shape != shape:
            raise GridError("kernel weights and field must live on the same grid")

    def with_state(self, values: np.ndarray, time: float) -> "EvolutionProblem":
        return EvolutionProblem(self.params, self.a_plus_w, self.a_minus_w,
                                self.u.with_values(values, time))


@dataclass(frozen=True)
class StepConfig:
    """Fixed-step integrator configuration with a stability guard.

    ``floor`` > 0 zeroes values with |u| below it after every step.  The
    vacuum state is linearly unstable at rate kappa_plus - m, so long
    invasion runs must deny roundoff noise a seed in the far field; the
    cutoff biases the measured front speed by O(1/log^2 floor), which desk
    tolerances absorb.  Off by default: short runs do not need it, and
    negativity should stay visible as a bug signal.
    """

    dt: float
    method: str = "rk4"
    clip_negative: bool = False
    conv_backend: str = "fft"
    floor: float = 0.0

    def validate(self, params: ModelParams) -> None:
        if self.method not in ("rk4", "exp_euler"):
            raise ValueError(f"unknown method {self.method!r}")
        theta = max(params.theta, 0.0)
        rate = params.kappa_plus + params.mortality + params.kappa_minus * theta
        if not self.dt * rate < 0.5:
            raise ValueError(
                f"dt = {self.dt} violates the stability guard dt * {rate:.3g} < 0.5"
            )


@dataclass
class Trajectory:
    """Snapshots of a run, with per-snapshot extrema."""

    times: list[float] = field(default_factory=list)
    snapshots: list[Field] = field(default_factory=list)
    mins: list[float] = field(default_factory=list)
    maxs: list[float] = field(default_factory=list)

    def append(self, f: Field) -> None:
        if self.times and f.time <= self.times[-1]:
            raise ValueError("snapshot times must be strictly increasing")
        self.times.append(f.time)
        self.snapshots.append(f)
        self.mins.append(f.min)
        self.maxs.append(f.max)

    @property
    def final(self) -> Field:
        return self.snapshots[-1]


def rhs_values(params: ModelParams, wplus: SampledWeights, wminus: SampledWeights,
               values: np.ndarray, backend: str = "fft") -> np.ndarray:
    conv_p = convolve(wplus, values, backend)
    conv_m = convolve(wminus, values, backend)
    return (params.kappa_plus * conv_p - params.mortality * values
            - params.kappa_minus * values * conv_m)


def rhs(problem: EvolutionProblem, backend: str = "fft") -> Field:
    """kappa_plus*(a+ * u) - m*u - kappa_minus*u*(a- * u) as a field."""
    values = rhs_values(problem.params, problem.a_plus_w, problem.a_minus_w,
                        problem.u.values, backend)
    return problem.u.with_values(values)


def _advance(params: ModelParams, wplus: SampledWeights, wminus: SampledWeights,
             values: np.ndarray, cfg: StepConfig) -> np.ndarray:
    dt = cfg.dt
    backend = cfg.conv_backend
    if cfg.method == "rk4":
        k1 = rhs_values(params, wplus, wminus, values, backend)
        k2 = rhs_values(params, wplus, wminus, values + 0.5 * dt * k1, backend)
        k3 = rhs_values(params, wplus, wminus, values + 0.5 * dt * k2, backend)
        k4 = rhs_values(params, wplus, wminus, values + dt * k3, backend)
        out = values + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    else:
        # integrating-factor step: freeze the loss rate over [t, t+dt]
        conv_m = convolve(wminus, values, backend)
        conv_p = convolve(wplus, values, backend)
        loss = params.mortality + params.kappa_minus * conv_m
        decay = np.exp(-loss * dt)
        out = decay * values + (1.0 - decay) / loss * params.kappa_plus * conv_p
    if cfg.clip_negative:
        np.maximum(out, 0.0, out=out)
    if cfg.floor > 0.0:
        out[np.abs(out) < cfg.floor] = 0.0
    return out


def step(problem: EvolutionProblem, cfg: StepConfig) -> EvolutionProblem:
    """One time step; aborts on non-finite values."""
    cfg.validate(problem.params)
    out = _advance(problem.params, problem.a_plus_w, problem.a_minus_w,
                   problem.u.values, cfg)
    if not np.all(np.isfinite(out)):
        raise ConvergenceFailure(
            f"non-finite state after step at t = {problem.u.time + cfg.dt:.6g}"
        )
    return problem.with_state(out, problem.u.time + cfg.dt)


def simulate(problem: EvolutionProblem, cfg: StepConfig, horizon: float,
             snapshot_stride: int = 100) -> Trajectory:
    """Fixed-step run to the horizon, storing every stride-th state."""
    cfg.validate(problem.params)
    n_steps = int(round(horizon / cfg.dt))
    if abs(n_steps * cfg.dt - horizon) > 1e-9 * max(1.0, horizon):
        raise ValueError(f"horizon {horizon} is not an integer multiple of dt = {cfg.dt}")
    traj = Trajectory()
    traj.append(problem.u)
    values = problem.u.values
    t0 = problem.u.time
    params, wp, wm = problem.params, problem.a_plus_w, problem.a_minus_w
    for k in range(1, n_steps + 1):
        values = _advance(params, wp, wm, values, cfg)
        if not np.all(np.isfinite(values)):
            raise ConvergenceFailure(f"non-finite state after step {k} (t = {t0 + k * cfg.dt:.6g})")
        if k % snapshot_stride == 0 or k == n_steps:
            traj.append(Field(problem.u.grid, values.copy(), t0 + k * cfg.dt))
    return traj


def logistic_exact(params: ModelParams, u0: float, t) -> np.ndarray:
    """Spatially homogeneous solution u(t) = u0 / (u0 g(t) + e^{-theta km t}).

    Valid for any sign of theta; u(t) -> max(0, theta) as t -> infinity.
    """
    if u0 < 0:
        raise ValueError("initial value must be nonnegative")
    t = np.asarray(t, dtype=float)
    theta = params.theta
    km = params.kappa_minus
    if theta != 0.0:
        decay = np.exp(-theta * km * t)
        g = (1.0 - decay) / theta
    else:
        decay = np.ones_like(t)
        g = km * t
    return u0 / (u0 * g + decay)


# ---------------------------------------------------------------------------
# Picard backend
# ---------------------------------------------------------------------------


def _lobatto_nodes(n: int) -> np.ndarray:
    """Chebyshev-Lobatto nodes on [-1, 1], ascending."""
    return -np.cos(np.pi * np.arange(n) / (n - 1))


def _integration_matrix(nodes: np.ndarray) -> np.ndarray:
    """Matrix Q with (Q f)[i] ~ int_{nodes[0]}^{nodes[i]} f, exact on polynomials."""
    n = len(nodes)
    V = np.vander(nodes, n, increasing=True)
    powers = np.arange(1, n + 1)
    prim = (nodes[:, None] ** powers[None, :] - nodes[0] ** powers[None, :]) / powers[None, :]
    return prim @ np.linalg.inv(V)


def _picard_interval(params: ModelParams, wplus: SampledWeights, wminus: SampledWeights,
                     u_tau: np.ndarray, tau: float, upsilon: float, n_nodes: int,
                     tol: float) -> tuple[np.ndarray, np.ndarray]:
    """Fixed point of the integral map on [tau, upsilon]; returns (nodes, states)."""
    zeta = _lobatto_nodes(n_nodes)
    half = 0.5 * (upsilon - tau)
    nodes = tau + half * (zeta + 1.0)
    Q = _integration_matrix(zeta) * half

    kp, km, m = params.kappa_plus, params.kappa_minus, params.mortality
    v = np.repeat(u_tau[None], n_nodes, axis=0)
    prev_change = math.inf
    growth_streak = 0
    for sweep in range(200):
        conv_m = np.stack([convolve(wminus, v[j]) for j in range(n_nodes)])
        conv_p = np.stack([convolve(wplus, v[j]) for j in range(n_nodes)])
        loss = m + km * conv_m
        cumint = np.tensordot(Q, loss, axes=(1, 0))  # int_tau^{t_i} loss
        gain = kp * conv_p * np.exp(cumint)
        integral = np.tensordot(Q, gain, axes=(1, 0))
        new = np.exp(-cumint) * (u_tau[None] + integral)
        change = float(np.max(np.abs(new - v)))
        v = new
        if change <= tol:
            return nodes, v
        if change > prev_change:
            growth_streak += 1
            if growth_streak >= 5:
                raise ConvergenceFailure(
                    f"Picard iteration diverging on [{tau:.6g}, {upsilon:.6g}] "
                    f"(change {change:.3g} after {sweep + 1} sweeps)"
                )
        else:
            growth_streak = 0
        prev_change = change
    raise ConvergenceFailure(
        f"Picard iteration did not reach {tol:g} on [{tau:.6g}, {upsilon:.6g}]"
    )


def picard_solve(problem: EvolutionProblem, horizon: float, tol: float = 1e-10,
                 n_nodes: int = 12) -> Trajectory:
    """Solve the initial-value problem by the contraction construction.

    Each interval length follows the contraction bookkeeping: with
    C = km + kp*km/(m e) and a norm bound mu >= ||u_tau||, the interval is
    alpha / (C mu + alpha kp) where alpha in (0, 1) satisfies
    alpha^2 / (1 - alpha) < C^2 mu m e / (kp^2 km).
    """
    if problem.u.min < 0:
        raise ValueError("Picard backend requires nonnegative initial data")
    params = problem.params
    kp, km, m = params.kappa_plus, params.kappa_minus, params.mortality
    C = km + kp * km / (m * math.e)

    traj = Trajectory()
    traj.append(problem.u)
    u_values = problem.u.values
    tau = problem.u.time
    t_end = problem.u.time + horizon
    while tau < t_end - 1e-12:
        mu = float(np.max(u_values)) * 1.001 + 1e-6
        alpha = 0.5
        while alpha**2 / (1.0 - alpha) >= C**2 * mu * m * math.e / (kp**2 * km):
            alpha *= 0.5
        upsilon = min(tau + alpha / (C * mu + alpha * kp), t_end)
        nodes, states = _picard_interval(
            params, problem.a_plus_w, problem.a_minus_w, u_values, tau, upsilon,
            n_nodes, tol,
        )
        u_values = states[-1]
        tau = upsilon
        traj.append(Field(problem.u.grid, u_values.copy(), tau))
    return traj


# ---------------------------------------------------------------------------
# Truncated kernels, a-priori bounds, subsolutions
# ---------------------------------------------------------------------------


def truncated_problem(problem: EvolutionProblem, radius: float) -> tuple[float, EvolutionProblem]:
    """Mask both kernels to the ball of given radius (no renormalization).

    Returns the truncated equilibrium theta_R = (kp*A_R+ - m) / (km*A_R-) and
    a problem whose solution runs below the untruncated one.
    """
    grid = problem.u.grid
    coords = _displacement_coords(grid.points_per_axis, grid.spacing)
    if grid.dimension == 1:
        r = np.abs(coords)
    else:
        gx, gy = np.meshgrid(coords, coords, indexing="ij")
        r = np.hypot(gx, gy)
    mask = r <= radius

    params = problem.params
    wp = problem.a_plus_w.weights * mask
    wm = problem.a_minus_w.weights * mask
    a_plus_mass = float(wp.sum())
    a_minus_mass = float(wm.sum())
    if not a_plus_mass > params.mortality / params.kappa_plus:
        need = params.mortality / params.kappa_plus
        raise ValueError(
            f"truncated mass A_R+ = {a_plus_mass:.6f} must exceed m/kappa_plus = {need:.6f}; "
            "increase the truncation radius"
        )
    theta_r = (params.kappa_plus * a_plus_mass - params.mortality) / (
        params.kappa_minus * a_minus_mass
    )
    wp_s = SampledWeights(wp, grid.spacing, a_plus_mass, renormalized=False)
    wm_s = SampledWeights(wm, grid.spacing, a_minus_mass, renormalized=False)
    truncated = EvolutionProblem(params, wp_s, wm_s, problem.u)
    return theta_r, truncated


def _ball_volume(dimension: int, r: float) -> float:
    return 2.0 * r if dimension == 1 else math.pi * r * r


def _hypercube_sup_sum(kernel: Kernel, q: float) -> float:
    """sum over z in Z^d of sup over the cube centered at 2qz of the density.

    All families are radially non-increasing, so the supremum over a cube is
    the density at its point closest to the origin.
    """
    d = kernel.dimension
    if kernel.tail_class == "heavy_tail":
        z_max = 4000 if d == 1 else 700
    else:
        span = 60.0 * max(kernel.effective_scale(), 1.0)
        z_max = int(span / (2.0 * q)) + 2
    z = np.arange(-z_max, z_max + 1)
    if d == 1:
        nearest = np.maximum(np.abs(2.0 * q * z) - q, 0.0)
        return float(np.sum(kernel.eval(nearest)))
    gx, gy = np.meshgrid(z, z, indexing="ij")
    nx = np.maximum(np.abs(2.0 * q * gx) - q, 0.0)
    ny = np.maximum(np.abs(2.0 * q * gy) - q, 0.0)
    pts = np.stack([nx, ny], axis=-1)
    return float(np.sum(kernel.eval(pts)))


def uniform_bound(params: ModelParams, a_plus: Kernel, a_minus: Kernel,
                  u0_sup: float, assume_domination: bool = False) -> float:
    """Explicit all-time supremum bound for the solution.

    Uses the competition-floor witness alpha = inf_{|x| <= r0} a-(x) and the
    cube-supremum sum of a+.  Under A1+A2 with u0_sup <= theta the sharp bound
    theta is returned directly; for kappa_plus <= m the solution decays and
    u0_sup itself is the bound.
    """
    if u0_sup < 0:
        raise ValueError("u0_sup must be nonnegative")
    if params.kappa_plus <= params.mortality:
        return u0_sup
    theta = params.theta
    if assume_domination and u0_sup <= theta:
        return theta

    d = a_minus.dimension
    r0 = a_minus.effective_scale()
    alpha = float(np.min(a_minus.eval(
        np.array([r0]) if d == 1 else np.array([[r0, 0.0]])
    )))
    if not alpha > 0:
        raise ValueError("competition kernel has no positive floor near the origin")
    q = r0 / (2.0 * math.sqrt(d))
    a_q = _hypercube_sup_sum(a_plus, q)
    if not math.isfinite(a_q):
        raise ValueError("cube-supremum sum of the dispersal kernel diverges")
    r = q * math.sqrt(d)
    big_m = 1.01 * max(_ball_volume(d, r) * u0_sup, theta / alpha)
    return max(params.kappa_plus * big_m * a_q / params.mortality, u0_sup)


def gaussian_subsolution(params: ModelParams, wplus: SampledWeights, wminus: SampledWeights,
                         grid: Grid, q: float, alpha: float, t: float,
                         mean_vector=None, tol: float = 1e-8) -> Field:
    """Moving Gaussian lower barrier w(x,t) = q exp(-|x - t m|^2 / (alpha t)).

    Certifies numerically that the evolution operator is nonpositive on w at
    time t over the whole grid; raises CertificationFailed otherwise.  The
    caller supplies (q, alpha, t) — see ``find_subsolution_params``.
    """
    if not (q > 0 and alpha > 0 and t > 0):
        raise ValueError("q, alpha and t must be positive")
    mean = np.zeros(grid.dimension) if mean_vector is None else np.asarray(mean_vector, float)
    coords = grid.coords()
    if grid.dimension == 1:
        diff = coords - t * mean[0]
        sq = diff * diff
        drift_term = diff * mean[0]
    else:
        diff = coords - t * mean
        sq = np.sum(diff * diff, axis=-1)
        drift_term = np.sum(diff * mean, axis=-1)
    w = q * np.exp(-sq / (alpha * t))
    dw_dt = w * (2.0 * drift_term / (alpha * t) + sq / (alpha * t * t))

    conv_p = convolve(wplus, w)
    conv_m = convolve(wminus, w)
    operator = (dw_dt - params.kappa_plus * conv_p + params.mortality * w
                + params.kappa_minus * w * conv_m)
    worst = int(np.argmax(operator))
    if operator.reshape(-1)[worst] > tol:
        loc = np.unravel_index(worst, operator.shape)
        raise CertificationFailed(
            f"subsolution certificate failed: operator = {operator.reshape(-1)[worst]:.3g} "
            f"> {tol:g} at grid index {loc}",
            location=loc,
            value=float(operator.reshape(-1)[worst]),
        )
    return Field(grid, w, t)


def find_subsolution_params(params: ModelParams, wplus: SampledWeights,
                            wminus: SampledWeights, grid: Grid, mean_vector=None,
                            tol: float = 1e-8) -> tuple[float, float, float]:
    """Coarse grid search for a certified (q, alpha, T) subsolution triple."""
    for alpha in (0.05, 0.1, 0.2, 0.5, 1.0):
        for t in (5.0, 10.0, 20.0, 40.0):
            for q in (1e-3, 1e-4, 1e-5):
                try:
                    gaussian_subsolution(params, wplus, wminus, grid, q, alpha, t,
                                         mean_vector=mean_vector, tol=tol)
                except CertificationFailed:
                    continue
                return q, alpha, t
    raise CertificationFailed("no certified subsolution parameters found in the search box")
