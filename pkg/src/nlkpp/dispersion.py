"""Traveling-wave dispersion theory.

Everything here is driven by the bilateral transform of the directional
kernel reduction ``T(lam) = int a(s) e^{lam s} ds`` and the function

    G(lam) = (kappa_plus * T(lam) - m) / lam,

whose minimum over the convergence interval is the minimal wave speed.  The
minimizer is located by monotone bisection on

    H(lam) = lam F'(lam) - F(lam) = m - t(lam),

where ``t(lam) = kappa_plus * int (1 - lam s) a(s) e^{lam s} ds`` is strictly
decreasing; H < 0 left of the minimizer and H > 0 right of it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import MollisonFailure, UnsupportedCriticalCase
from .kernels import Kernel, Kernel1D, reduce_to_direction
from .params import ModelParams

V_CLASS = "V"
W_CLASS = "W"

# absolute tolerance for declaring the W-class boundary m = t(lambda0)
_BOUNDARY_TOL = 1e-8


@dataclass(frozen=True)
class LaplaceProfile:
    """Abscissa data of a directional kernel reduction."""

    kernel: Kernel1D
    abscissa_lambda0: float
    value_at_abscissa: float  # transform at the abscissa; may be inf


@dataclass(frozen=True)
class DispersionReport:
    """Minimal-speed data for one direction."""

    lambda_star: float
    c_star: float
    kernel_class: str
    t_xi_at_lambda0: float | None
    m_xi: float
    interval_sup: float
    interval_closed: bool

    @property
    def is_v_class(self) -> bool:
        return self.kernel_class == V_CLASS


def laplace_transform(k: Kernel1D, lam: float) -> float:
    """Bilateral transform of the line density; +inf on divergence."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    return k.transform(lam)


def abscissa(k: Kernel1D) -> LaplaceProfile:
    """Abscissa of convergence and the one-sided transform value there."""
    lam0 = k.lambda0
    if math.isinf(lam0):
        value = math.inf
    elif lam0 == 0.0:
        value = 1.0  # the transform degenerates to the total mass
    else:
        value = k.transform(lam0)
    return LaplaceProfile(kernel=k, abscissa_lambda0=lam0, value_at_abscissa=value)


def dispersion_G(params: ModelParams, k: Kernel1D, lam: float) -> float:
    """G(lam) = (kappa_plus * T(lam) - m) / lam on the convergence interval."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    value = k.transform(lam)
    if math.isinf(value):
        raise ValueError(f"transform diverges at lambda = {lam} (abscissa {k.lambda0})")
    return (params.kappa_plus * value - params.mortality) / lam


def t_xi(params: ModelParams, k: Kernel1D, lam: float) -> float:
    """kappa_plus * int (1 - lam s) a(s) e^{lam s} ds; -inf when the moment diverges."""
    if not 0 < lam <= k.lambda0:
        raise ValueError(f"lambda must lie in (0, {k.lambda0}], got {lam}")
    value = k.transform(lam)
    if math.isinf(value):
        raise ValueError(f"transform diverges at lambda = {lam}")
    m1 = k.weighted_moment1(lam)
    if math.isinf(m1):
        return -math.inf
    return params.kappa_plus * (value - lam * m1)


def _H(params: ModelParams, k: Kernel1D, lam: float) -> float:
    """H(lam) = m - t(lam); strictly increasing on the convergence interval."""
    m1 = k.weighted_moment1(lam)
    value = k.transform(lam)
    if math.isinf(m1) or math.isinf(value):
        return math.inf
    return params.mortality - params.kappa_plus * (value - lam * m1)


def classify(params: ModelParams, k: Kernel1D) -> str:
    """V when the minimizer is interior, W when it sits at the abscissa."""
    lam0 = k.lambda0
    if lam0 == 0.0:
        raise MollisonFailure("kernel has no positive exponential moment")
    if math.isinf(lam0):
        return V_CLASS
    value = k.transform(lam0)
    if math.isinf(value):
        return V_CLASS
    t0 = t_xi(params, k, lam0)
    if t0 >= params.mortality - _BOUNDARY_TOL:
        return W_CLASS
    return V_CLASS


def directional_mean(kernel: Kernel, xi) -> float:
    """First directional moment int (x . xi) a(x) dx."""
    line = reduce_to_direction(kernel, xi)
    if not line.mean_is_finite():
        raise ValueError("first moment of the kernel diverges in this direction")
    return line.mean()


def global_mean(kernel: Kernel) -> np.ndarray:
    """First moment vector int x a(x) dx."""
    d = kernel.dimension
    out = np.zeros(d)
    for i in range(d):
        xi = np.zeros(d)
        xi[i] = 1.0
        out[i] = directional_mean(kernel, xi if d > 1 else np.array([1.0]))
        if d == 1:
            break
    return out


def minimize_G(params: ModelParams, k: Kernel1D) -> DispersionReport:
    """Minimal wave speed c* = min G and its unique minimizer lambda*.

    Raises MollisonFailure when the abscissa is zero (no finite speed) and
    validates the first-order condition / alternative speed representation.
    """
    params.require_carrying_capacity()
    lam0 = k.lambda0
    if lam0 == 0.0:
        raise MollisonFailure(
            "dispersal kernel has abscissa zero: no finite minimal speed "
            "(run the acceleration scenario instead)"
        )

    kernel_class = classify(params, k)
    if kernel_class == W_CLASS:
        lam_star = lam0
        c_star = dispersion_G(params, k, lam0)
    else:
        # Bracket the sign change of H, then bisect.
        lo = min(1e-6, lam0 / 4 if math.isfinite(lam0) else 1e-6)
        while _H(params, k, lo) > 0:
            lo /= 8.0
            if lo < 1e-300:
                raise RuntimeError("failed to bracket the dispersion minimizer from below")
        if math.isinf(lam0):
            hi = max(1.0, 2 * lo)
            while _H(params, k, hi) <= 0:
                hi *= 2.0
                if hi > 1e6:
                    raise RuntimeError("failed to bracket the dispersion minimizer from above")
        else:
            # walk toward the abscissa until H turns positive (guaranteed for
            # the V class: H blows up or crosses zero before lam0)
            frac = 0.5
            hi = lam0 * (1 - frac)
            while _H(params, k, hi) <= 0:
                frac /= 2.0
                hi = lam0 * (1 - frac)
                if frac < 1e-14:
                    raise RuntimeError("H has no sign change below the abscissa")
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            if _H(params, k, mid) <= 0:
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1e-13 * max(1.0, hi):
                break
        lam_star = 0.5 * (lo + hi)
        c_star = dispersion_G(params, k, lam_star)

    m_xi = k.mean()
    if not c_star > params.kappa_plus * m_xi:
        raise RuntimeError(
            f"minimal speed {c_star} does not exceed kappa_plus * m_xi "
            f"= {params.kappa_plus * m_xi}; dispersion data inconsistent"
        )
    if kernel_class == V_CLASS:
        alt = params.kappa_plus * k.weighted_moment1(lam_star)
        if not math.isfinite(alt) or abs(alt - c_star) > 1e-6 * max(1.0, abs(c_star)):
            raise RuntimeError(
                f"first-order speed representation mismatch: {alt} vs {c_star}"
            )

    if math.isinf(lam0):
        t_at_lam0 = None
        closed = False
    else:
        value0 = k.transform(lam0)
        t_at_lam0 = t_xi(params, k, lam0) if math.isfinite(value0) else None
        closed = math.isfinite(value0)

    return DispersionReport(
        lambda_star=float(lam_star),
        c_star=float(c_star),
        kernel_class=kernel_class,
        t_xi_at_lambda0=t_at_lam0,
        m_xi=float(m_xi),
        interval_sup=lam0,
        interval_closed=closed,
    )


def speed_to_abscissa(params: ModelParams, k: Kernel1D, c: float,
                      report: DispersionReport | None = None) -> float:
    """The decay exponent of the wave profile with speed c >= c*.

    Returns the smaller positive root of kappa_plus*T(lam) - m - lam*c on
    (0, lambda*]; at c = c* this is lambda* itself.
    """
    if report is None:
        report = minimize_G(params, k)
    c_star, lam_star = report.c_star, report.lambda_star
    if c < c_star - 1e-9 * max(1.0, abs(c_star)):
        raise ValueError(f"no traveling wave below the minimal speed ({c} < {c_star})")
    if c <= c_star * (1 + 1e-12):
        return lam_star

    def h(lam: float) -> float:
        return params.kappa_plus * k.transform(lam) - params.mortality - lam * c

    lo, hi = 1e-14, lam_star
    if h(lo) <= 0:
        raise RuntimeError("characteristic function not positive near zero")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if h(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def char_multiplicity(params: ModelParams, k: Kernel1D, c: float,
                      report: DispersionReport | None = None) -> int:
    """Multiplicity (1 or 2) of the characteristic root at the profile abscissa."""
    if report is None:
        report = minimize_G(params, k)
    c_star = report.c_star
    if c < c_star - 1e-9 * max(1.0, abs(c_star)):
        raise ValueError(f"no traveling wave below the minimal speed ({c} < {c_star})")
    if c > c_star * (1 + 1e-12):
        return 1
    if report.kernel_class == V_CLASS:
        return 2
    t0 = report.t_xi_at_lambda0
    if t0 is None or t0 > params.mortality + _BOUNDARY_TOL:
        return 1
    # boundary case m = t(lambda0): needs a finite second exponential moment
    if math.isinf(k.weighted_moment2(k.lambda0)):
        raise UnsupportedCriticalCase(
            "W-class boundary case with infinite second exponential moment: "
            "profile asymptotics are outside the supported theory"
        )
    return 2


@dataclass(frozen=True)
class FrontSet:
    """Convex propagation set as an intersection of directional half-spaces."""

    directions: np.ndarray  # (n, d) unit vectors
    speeds: np.ndarray  # (n,) minimal speeds
    lambda_stars: np.ndarray  # (n,) minimizers, for decay envelopes
    interior_point: np.ndarray  # kappa_plus * first-moment vector

    @property
    def dimension(self) -> int:
        return self.directions.shape[1]

    def interval(self) -> tuple[float, float]:
        """For d = 1: the set [-c*(-1), c*(+1)]."""
        if self.dimension != 1:
            raise ValueError("interval() is defined for 1-D fronts only")
        plus = float(self.speeds[np.argmax(self.directions[:, 0])])
        minus = float(self.speeds[np.argmin(self.directions[:, 0])])
        return (-minus, plus)

    def contains(self, x, scale: float = 1.0) -> np.ndarray:
        """Membership of points in scale * front set."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        proj = x @ self.directions.T
        return np.all(proj <= scale * self.speeds[None, :] + 1e-12, axis=1)

    def outer_vertices(self) -> np.ndarray:
        """Vertices of the outer polygon (d = 2, equi-angular directions)."""
        if self.dimension != 2:
            raise ValueError("outer_vertices() is defined for 2-D fronts only")
        n = len(self.speeds)
        verts = []
        for i in range(n):
            j = (i + 1) % n
            a = np.stack([self.directions[i], self.directions[j]])
            b = np.array([self.speeds[i], self.speeds[j]])
            verts.append(np.linalg.solve(a, b))
        return np.asarray(verts)

    def inner_vertices(self) -> np.ndarray:
        """Touch points c*(xi) xi; their hull is an inner polygon."""
        return self.directions * self.speeds[:, None]


def front_set(params: ModelParams, kernel: Kernel, n_directions: int = 32) -> FrontSet:
    """Minimal speeds over a uniform direction sample and the resulting set.

    Raises MollisonFailure when any direction lacks an exponential moment
    (the front is unbounded; propagation accelerates).
    """
    d = kernel.dimension
    if kernel.abscissa == 0.0:
        raise MollisonFailure("front set is unbounded: kernel has no exponential moment")
    if d == 1:
        dirs = np.array([[1.0], [-1.0]])
    else:
        angles = 2.0 * math.pi * np.arange(n_directions) / n_directions
        dirs = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
    speeds = np.empty(len(dirs))
    lams = np.empty(len(dirs))
    for i, xi in enumerate(dirs):
        line = reduce_to_direction(kernel, xi if d > 1 else xi[:1])
        rep = minimize_G(params, line)
        speeds[i] = rep.c_star
        lams[i] = rep.lambda_star
    mean = global_mean(kernel)
    interior = params.kappa_plus * mean
    proj = dirs @ interior
    if not np.all(proj < speeds):
        raise RuntimeError("kappa_plus * mean is not strictly interior to the front set")
    return FrontSet(directions=dirs, speeds=speeds, lambda_stars=lams, interior_point=interior)
