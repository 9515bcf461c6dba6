"""Shared numerical kernel.

Quadrature for integrands with square-root endpoint behaviour, sampled
functions with an optional power-law factor at the left end, Riemann-Liouville
fractional integrals (and the Abel transform as the order 1/2 case), and a
small second order linear ODE solver.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.special import gamma, roots_jacobi

DEFAULT_NODES = 1024


class RevspecError(Exception):
    """Base class for all errors raised by the package."""


class InputError(RevspecError, ValueError):
    """Invalid arguments or malformed input data."""


class NumericError(RevspecError, ArithmeticError):
    """A numerical procedure failed (no bracket, singular system, ...)."""


# ---------------------------------------------------------------------------
# quadrature rules


@lru_cache(maxsize=64)
def _gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@lru_cache(maxsize=256)
def _gauss_jacobi(n: int, alpha: float, beta: float) -> tuple[np.ndarray, np.ndarray]:
    # weight (1-x)^alpha (1+x)^beta on [-1, 1]
    x, w = roots_jacobi(n, alpha, beta)
    return x, w


@lru_cache(maxsize=64)
def sine_nodes(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes ``sin(tau_j)`` and weights for ``int_{-pi/2}^{pi/2} g(sin tau) dtau``.

    The integral equals half the integral over a full period, so the
    equispaced (trapezoid) rule applies and converges geometrically for
    analytic ``g``.
    """
    tau = 2.0 * np.pi * (np.arange(n) + 0.5) / n
    return np.sin(tau), np.full(n, np.pi / n)


def singular_quad(
    g: Callable[[np.ndarray], np.ndarray],
    lo: float,
    hi: float,
    power: float = -0.5,
    weight: Optional[Callable[[np.ndarray], np.ndarray]] = None,
    nodes: int = 256,
) -> float:
    """Integrate ``g(x) * w(x)**power`` over ``[lo, hi]``.

    ``w`` defaults to ``(hi - x)(x - lo)``; a caller supplied ``weight`` must
    vanish linearly at both ends.  The substitution ``x = mid + half*sin(t)``
    turns both square-root endpoint behaviours into a smooth integrand in
    ``t`` which is then handled by Gauss-Legendre.

    Parameters
    ----------
    g : callable
        Smooth part of the integrand, vectorised.
    lo, hi : float
        Integration limits, ``lo < hi``.
    power : float
        Exponent of the singular factor, normally ``+0.5`` or ``-0.5``.
    weight : callable, optional
        Singular factor ``w``.
    nodes : int
        Number of Gauss-Legendre nodes in ``t``.
    """
    if not (np.isfinite(lo) and np.isfinite(hi)) or lo >= hi:
        raise InputError(f"singular_quad needs lo < hi, got [{lo}, {hi}]")
    t, wt = _gauss_legendre(nodes)
    t = 0.5 * np.pi * t
    wt = 0.5 * np.pi * wt
    mid, half = 0.5 * (lo + hi), 0.5 * (hi - lo)
    x = mid + half * np.sin(t)
    c = np.cos(t)
    gx = np.asarray(g(x), dtype=float)
    if gx.shape != x.shape:
        gx = np.broadcast_to(gx, x.shape)
    if not np.all(np.isfinite(gx)):
        raise NumericError("integrand is not finite at an interior node")
    if weight is None:
        sing = (half * c) ** (2.0 * power)
    else:
        w = np.asarray(weight(x), dtype=float)
        sing = np.abs(w) ** power
    vals = gx * sing * half * c
    return float(np.dot(wt, vals))


# ---------------------------------------------------------------------------
# sampled functions


def _extrapolate_left(x: np.ndarray, y: np.ndarray, order: int = 6) -> float:
    """Polynomial extrapolation of ``y`` to ``x[0]`` from ``x[1:order+1]``."""
    xs, ys = x[1 : order + 1], y[1 : order + 1]
    return float(np.polynomial.polynomial.polyval(
        x[0] - xs[0], np.polynomial.polynomial.polyfit(xs - xs[0], ys, len(xs) - 1)
    ))


@dataclass(frozen=True, eq=False)
class SampledFunction:
    """A real function known on a strictly increasing grid.

    Values are stored as ``(x - x0)**lead * smooth(x)`` with ``x0 = nodes[0]``.
    The smooth factor is interpolated by a not-a-knot cubic spline, so
    functions with a square-root (or inverse square-root) end behaviour keep
    full accuracy.  ``lead = 0`` is the plain case.
    """

    nodes: np.ndarray
    smooth: np.ndarray
    lead: float = 0.0
    derivative_values: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        x = np.asarray(self.nodes, dtype=float)
        s = np.asarray(self.smooth, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise InputError("a sampled function needs at least two nodes")
        if s.shape != x.shape:
            raise InputError("nodes and values must have the same length")
        if np.any(np.diff(x) <= 0):
            raise InputError("nodes must be strictly increasing")
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "smooth", s)

    @classmethod
    def from_values(cls, nodes, values, derivative=None, meta=None) -> "SampledFunction":
        return cls(np.asarray(nodes, float), np.asarray(values, float), 0.0,
                   None if derivative is None else np.asarray(derivative, float),
                   dict(meta or {}))

    @classmethod
    def from_callable(cls, fun, nodes, lead: float = 0.0) -> "SampledFunction":
        """Sample ``fun`` and factor out ``(x - x0)**lead``."""
        x = np.asarray(nodes, float)
        v = np.asarray(fun(x), float)
        return cls.from_values(x, v).refactor(lead) if lead else cls.from_values(x, v)

    @property
    def origin(self) -> float:
        return float(self.nodes[0])

    @property
    def values(self) -> np.ndarray:
        y = self.nodes - self.origin
        if self.lead == 0:
            return self.smooth.copy()
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.power(y, self.lead) * self.smooth
        if self.lead > 0:
            out[0] = 0.0
        return out

    @property
    def _spline(self) -> CubicSpline:
        sp = self.__dict__.get("_sp")
        if sp is None:
            bc = "not-a-knot" if self.nodes.size >= 4 else "natural"
            sp = CubicSpline(self.nodes, self.smooth, bc_type=bc, extrapolate=True)
            object.__setattr__(self, "_sp", sp)
        return sp

    def smooth_at(self, x, nu: int = 0) -> np.ndarray:
        return self._spline(np.asarray(x, float), nu)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, float)
        s = self._spline(x)
        if self.lead == 0:
            return s
        y = np.maximum(x - self.origin, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.power(y, self.lead) * s

    def derivative(self, x, order: int = 1) -> np.ndarray:
        """Derivative of the represented function (product rule on the lead)."""
        x = np.asarray(x, float)
        if self.lead == 0:
            return self._spline(x, order)
        f = self
        for _ in range(order):
            f = _diff_once(f)
        return f(x)

    def refactor(self, lead: float) -> "SampledFunction":
        """Re-express the same function with a different leading power."""
        if lead == self.lead:
            return self
        y = self.nodes - self.origin
        vals = self.values
        with np.errstate(divide="ignore", invalid="ignore"):
            sm = vals / np.power(y, lead)
        sm[0] = _extrapolate_left(self.nodes, sm)
        return SampledFunction(self.nodes, sm, float(lead), None, dict(self.meta))

    def scaled(self, factor) -> "SampledFunction":
        """Multiply by a scalar or by a smooth function of ``x``."""
        fac = factor(self.nodes) if callable(factor) else factor
        return SampledFunction(self.nodes, self.smooth * fac, self.lead, None, dict(self.meta))

    def antiderivative(self) -> "SampledFunction":
        """Integral from the left end, ``int_{x0}^x``."""
        return frac_integral(self, 1.0)


def _normalise_lead(f: SampledFunction) -> SampledFunction:
    if f.lead >= 1.0:
        k = math.floor(f.lead)
        y = f.nodes - f.origin
        return SampledFunction(f.nodes, f.smooth * y**k, f.lead - k, None, dict(f.meta))
    return f


def _absorb_zero(f: SampledFunction, rtol: float = 1e-7) -> SampledFunction:
    """Raise a negative leading power while the smooth factor vanishes at x0."""
    while f.lead < 0:
        scale = float(np.max(np.abs(f.smooth)))
        if scale == 0 or abs(f.smooth[0]) > rtol * scale:
            break
        y = f.nodes - f.origin
        with np.errstate(divide="ignore", invalid="ignore"):
            sm = f.smooth / y
        sm[0] = _extrapolate_left(f.nodes, sm)
        f = SampledFunction(f.nodes, sm, f.lead + 1.0, None, dict(f.meta))
    return f


def _diff_once(f: SampledFunction) -> SampledFunction:
    s = f.smooth
    ds = f._spline(f.nodes, 1)
    mu = f.lead
    if mu == 0:
        return SampledFunction(f.nodes, ds, 0.0, None, dict(f.meta))
    y = f.nodes - f.origin
    return SampledFunction(f.nodes, mu * s + y * ds, mu - 1.0, None, dict(f.meta))


# ---------------------------------------------------------------------------
# fractional integrals and the Abel transform


def frac_integral(f: SampledFunction, order: float, quad_nodes: int = 64) -> SampledFunction:
    """Riemann-Liouville integral ``I_order`` with lower limit at ``nodes[0]``.

    ``I_a f(E) = Gamma(a)^-1 int_0^E f(y) (E-y)^(a-1) dy``; negative orders are
    computed as ``I_{a+k}`` followed by ``k`` ordinary derivatives, ``k``
    minimal.  The leading power of the input is carried through exactly, so
    the result of, e.g., ``I_{1/2}`` of a smooth function is stored as
    ``sqrt(E) * smooth``.
    """
    order = float(order)
    if order == 0:
        return f
    if order < 0:
        if f.nodes.size < 8:
            raise NumericError("grid too coarse for a fractional derivative")
        k = math.ceil(-order - 1e-12)
        beta = order + k
        g = frac_integral(f, beta, quad_nodes) if beta > 1e-12 else f
        for _ in range(k):
            g = _diff_once(g)
        return g
    f = _absorb_zero(f)
    gam = f.lead
    if gam <= -1:
        raise NumericError("leading power must exceed -1 for integration")
    xj, wj = _gauss_jacobi(quad_nodes, order - 1.0, gam)
    u = 0.5 * (1.0 + xj)
    y = f.nodes - f.origin
    pts = f.origin + y[:, None] * u[None, :]
    vals = f._spline(pts) @ wj
    sm = vals * 2.0 ** (-(gam + order)) / gamma(order)
    out = SampledFunction(f.nodes, sm, gam + order, None, dict(f.meta))
    return _normalise_lead(out)


def abel_forward(g: SampledFunction) -> SampledFunction:
    """``A g(v) = int_0^v g(y) (v-y)^(-1/2) dy`` on the grid of ``g``."""
    if g.nodes.size == 0:
        raise InputError("empty grid")
    out = frac_integral(g, 0.5)
    return out.scaled(math.sqrt(math.pi))


def abel_invert(F: SampledFunction, tol: float = 1e-8) -> SampledFunction:
    """Invert the Abel transform, ``g = pi^-1 d/dv A F``.

    Input without an explicit leading power is first written as
    ``sqrt(v) * smooth`` (the generic form of an Abel transform of a smooth
    function).  A non-zero ``F(0)`` is recorded in ``meta['f0_error']``.
    """
    meta = dict(F.meta)
    f0 = float(F.values[0]) if F.lead >= 0 else float("inf")
    if F.lead == 0:
        scale = max(1.0, float(np.max(np.abs(F.smooth))))
        meta["f0_error"] = abs(f0) > tol * scale
        F = F.refactor(0.5)
    else:
        meta["f0_error"] = F.lead < 0
    AF = frac_integral(F, 0.5).scaled(math.sqrt(math.pi))
    g = _diff_once(_normalise_lead(AF)).scaled(1.0 / math.pi)
    return SampledFunction(g.nodes, g.smooth, g.lead, None, meta)


# ---------------------------------------------------------------------------
# second order linear ODE with a zero window


def solve_linear_ode2(
    p2: SampledFunction,
    p1: SampledFunction,
    p0: SampledFunction,
    rhs: SampledFunction,
    window: tuple[float, float],
    rtol: float = 1e-11,
) -> SampledFunction:
    """Solve ``p2 K'' + p1 K' + p0 K = rhs`` with ``K = 0`` on ``window``.

    The solution vanishes identically on the window; continuity of ``K`` and
    ``K'`` at the right end of the window fixes it uniquely beyond.  The
    returned function carries ``meta['residual']``, the relative residual of
    the equation on the grid evaluated with spline derivatives.
    """
    x = rhs.nodes
    a, b = window
    if not (a < b) or b < x[0] or a > x[-1]:
        raise InputError("zero window must be a nonempty subinterval of the grid")
    active = x > b
    if not np.any(active):
        raise InputError("zero window covers the whole grid")
    xa = x[active]
    c2 = p2(xa)
    if not np.any(c2):
        return _solve_low_order(p1, p0, rhs, x, b)
    if np.any(np.abs(c2) <= 1e-14 * max(1.0, float(np.max(np.abs(c2))))):
        cond = float(np.max(np.abs(c2)) / max(np.min(np.abs(c2)), 1e-300))
        raise NumericError(f"leading coefficient vanishes on the active range (cond ~ {cond:.3g})")

    def rhs_fun(t, z):
        return [z[1], (float(rhs(t)) - float(p1(t)) * z[1] - float(p0(t)) * z[0]) / float(p2(t))]

    sol = solve_ivp(rhs_fun, (b, float(x[-1])), [0.0, 0.0], method="DOP853",
                    t_eval=xa, rtol=rtol, atol=1e-14)
    if not sol.success:
        raise NumericError(f"ODE integration failed: {sol.message}")
    K = np.zeros_like(x)
    K[active] = sol.y[0]
    out = SampledFunction.from_values(x, K)
    d1, d2 = out.derivative(xa, 1), out.derivative(xa, 2)
    res = c2 * d2 + p1(xa) * d1 + p0(xa) * K[active] - rhs(xa)
    scale = max(float(np.max(np.abs(rhs(xa)))), 1e-300)
    out.meta["residual"] = float(np.max(np.abs(res)) / scale)
    return out


def _solve_low_order(p1, p0, rhs, x, b) -> SampledFunction:
    """``p1 K' + p0 K = rhs`` (or the algebraic ``p0 K = rhs``) beyond ``b``."""
    active = x > b
    xa = x[active]
    c1, c0, r = p1(xa), p0(xa), rhs(xa)
    K = np.zeros_like(x)
    if not np.any(c1):
        if np.any(c0 == 0):
            raise NumericError("p0 vanishes where the algebraic equation is active")
        K[active] = r / c0
        out = SampledFunction.from_values(x, K)
        out.meta["residual"] = 0.0
        return out
    if np.any(c1 == 0):
        raise NumericError("p1 vanishes where the first order equation is active")
    sol = solve_ivp(lambda t, z: [(float(rhs(t)) - float(p0(t)) * z[0]) / float(p1(t))],
                    (b, float(x[-1])), [0.0], method="DOP853", t_eval=xa, rtol=1e-11, atol=1e-14)
    if not sol.success:
        raise NumericError(f"ODE integration failed: {sol.message}")
    K[active] = sol.y[0]
    out = SampledFunction.from_values(x, K)
    res = c1 * out.derivative(xa, 1) + c0 * K[active] - r
    out.meta["residual"] = float(np.max(np.abs(res)) / max(float(np.max(np.abs(r))), 1e-300))
    return out


def geometric_grid(length: float, n: int, scale: float = 0.5) -> np.ndarray:
    """Grid on ``[0, length]`` with spacing proportional to ``x + scale``."""
    s = np.linspace(0.0, 1.0, n)
    k = math.log1p(length / scale)
    return scale * np.expm1(k * s)
