"""Action variables, return data and periodic tori of the geodesic flow.

Every radial integral is written in the Besse chart.  With ``x = cos u`` and
``x = c sin(tau)``, ``c = cos i = sqrt(1 - i1^2)``, the turning-point
singularities disappear:

* ``s(i) = S(c) = int_{-pi/2}^{pi/2} f(c sin tau) dtau``
* ``theta(i) = pi F_e(1) + |i1| Q(c)``
* ``F(i1) = |i1| + (S - |i1| theta) / pi``

where ``F_e(y) = f_e(sqrt(y))`` is the even part of ``f`` as a function of
``y = x^2`` and ``Q(c) = int G(c^2 sin^2 tau) dtau`` with
``F_e(y) = F_e(1) + (1 - y) G(y)``.  The tau integrands are smooth and
periodic, so the trapezoid rule converges geometrically.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.optimize import brentq

from revspec.numerics import InputError, NumericError, sine_nodes
from revspec.profile import Profile

TAU_NODES = 256
TWIST_STEP = 1e-2


class ActionModel:
    """Cached evaluators of ``S``, ``Q``, ``F`` and ``theta`` for one profile."""

    def __init__(self, p: Profile, tau_nodes: int = TAU_NODES):
        self.profile = p
        b = p.f
        self.L = p.L
        ny = max(b.cheb.size // 2 + 4, 12)
        fe = b.even_part()
        # even part as a Chebyshev series in z = 2y - 1, y = x^2 in [0, 1]
        self.fe_y = C.chebinterpolate(lambda z: fe(np.sqrt(0.5 * (z + 1.0))), ny)
        self.Fe1 = float(C.chebval(1.0, self.fe_y))
        c = self.fe_y.copy()
        c[0] -= self.Fe1
        # F_e(y) - F_e(1) = (1 - y) G(y) with 1 - y = (1 - z) / 2
        g, rem = C.chebdiv(c, np.array([0.5, -0.5]))
        self.G = g if g.size else np.zeros(1)
        n = max(int(tau_nodes), 2 * b.cheb.size + 32)
        self.sin_tau, self.w_tau = sine_nodes(n)
        self.fe = fe

    def _y(self, c: np.ndarray) -> np.ndarray:
        return np.multiply.outer(c * c, self.sin_tau**2)

    def S(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        return C.chebval(2.0 * self._y(c) - 1.0, self.fe_y) @ self.w_tau

    def Q(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        return C.chebval(2.0 * self._y(c) - 1.0, self.G) @ self.w_tau

    def theta(self, i1) -> np.ndarray:
        i1 = np.asarray(i1, dtype=float)
        return math.pi * self.Fe1 + np.abs(i1) * self.Q(_cos_i(i1))

    def F(self, i1) -> np.ndarray:
        i1 = np.asarray(i1, dtype=float)
        c = _cos_i(i1)
        return np.abs(i1) * (1.0 - self.Fe1) + (self.S(c) - i1 * i1 * self.Q(c)) / math.pi

    def Fp(self, i1) -> np.ndarray:
        i1 = np.asarray(i1, dtype=float)
        return np.sign(i1) * (1.0 - self.Fe1) - i1 * self.Q(_cos_i(i1)) / math.pi

    def H1(self, I1, I2) -> np.ndarray:
        """Homogeneous Hamiltonian: ``t`` with ``t F(I1 / t) = I2``."""
        I1 = np.abs(np.asarray(I1, dtype=float))
        I2 = np.asarray(I2, dtype=float)
        I1, I2 = np.broadcast_arrays(I1, I2)
        out = np.empty(I1.shape)
        for idx in np.ndindex(I1.shape):
            out[idx] = self._h1_scalar(float(I1[idx]), float(I2[idx]))
        return out

    def _h1_scalar(self, I1: float, I2: float) -> float:
        if I2 <= 0 or I1 > I2 * (1 + 1e-12):
            raise InputError(f"({I1}, {I2}) lies outside the action cone")
        if I1 == 0:
            return I2 / self.F0
        if I1 >= I2:
            return I1
        # nu = I1 / t solves nu I2 - I1 F(nu) = 0, increasing in nu
        g = lambda nu: nu * I2 - I1 * float(self.F(nu))
        nu = brentq(g, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)
        return I1 / nu

    @cached_property
    def F0(self) -> float:
        return float(self.F(0.0))


def _cos_i(i1: np.ndarray) -> np.ndarray:
    return np.sqrt(np.clip(1.0 - i1 * i1, 0.0, 1.0))


_MODELS: dict = {}


def model(p: Profile) -> ActionModel:
    """Shared :class:`ActionModel` for a profile (one per profile object)."""
    key = id(p)
    m = _MODELS.get(key)
    if m is None or m.profile is not p:
        m = ActionModel(p)
        _MODELS[key] = m
    return m


def _check_open(i1: float) -> float:
    i1 = float(i1)
    if not abs(i1) < 1.0:
        raise InputError(f"|i1| must be < 1, got {i1}")
    return i1


# ---------------------------------------------------------------------------
# operations on a single torus


def turning_points(p: Profile, i1: float) -> tuple[float, float]:
    """Radii ``r-- < r0 < r+`` with ``a(r+-) = |i1|``."""
    i1 = _check_open(i1)
    if i1 == 0:
        return 0.0, p.L
    u = math.asin(abs(i1))
    return float(p.r_of_u(u)), float(p.r_of_u(math.pi - u))


def action_F(p: Profile, i1: float) -> float:
    """``I2 = F(I1)`` on the energy surface ``H = 1``."""
    return float(model(p).F(_check_open(i1)))


def return_data(p: Profile, i1: float) -> tuple[float, float, float, float]:
    """Arc data ``(s, theta)`` and equatorial return ``(tauE, omegaE)``."""
    i1 = _check_open(i1)
    m = model(p)
    s = float(m.S(_cos_i(np.asarray(i1))))
    th = float(m.theta(i1))
    return s, th, 2.0 * s, 2.0 * th - 2.0 * math.pi


def frequency(p: Profile, i1: float) -> tuple[float, float]:
    """Frequency vector on ``{H = 1}``: ``w2 = 1/(F - i1 F')``, ``w1 = -F' w2``."""
    i1 = _check_open(i1)
    m = model(p)
    F, Fp = float(m.F(i1)), float(m.Fp(i1))
    den = F - i1 * Fp
    if abs(den) < 1e-14:
        raise NumericError("F - i1 F' vanishes; frequency map is singular")
    w2 = 1.0 / den
    return -Fp * w2, w2


def tangential_second_derivative(p: Profile, i1: float, M=(0, 1), delta: float = TWIST_STEP) -> float:
    """Second derivative of ``H`` along the line ``I(i1) + xi v`` with ``M . v = 0``.

    ``v = (M2, -M1) / |M|``.  Uses the five point stencil at
    ``xi in {0, +-delta, +-2 delta}``.
    """
    if p.conical and abs(i1) < 2 * delta:
        # F has the kink |i1| (1 - (f(1) + f(-1)) / 2) at the meridian when the
        # poles are cone points, so the stencil would grow like 1/delta
        raise NumericError("cone poles: H is not smooth at the meridian torus")
    m = model(p)
    I = np.array([i1, float(m.F(i1))])
    M = np.asarray(M, dtype=float)
    v = np.array([M[1], -M[0]]) / np.hypot(*M)
    xs = np.array([-2, -1, 0, 1, 2]) * delta
    h = np.array([float(m.H1(*(I + x * v))) for x in xs])
    return float((-h[0] + 16 * h[1] - 30 * h[2] + 16 * h[3] - h[4]) / (12 * delta * delta))


def twist_alpha(p: Profile, delta: float = TWIST_STEP) -> float:
    """``alpha = h''(0)`` for ``h(xi) = H(xi, L/pi)`` at the meridian torus."""
    return tangential_second_derivative(p, 0.0, (0, 1), delta)


def omega1_slope(p: Profile, delta: float = TWIST_STEP) -> float:
    """``d w1 / d I1`` at ``(0, L/pi)`` from the frequency map (four point stencil)."""
    m = model(p)
    I2 = m.F0

    def w1(I1):
        t = float(m.H1(I1, I2))
        return frequency(p, I1 / t)[0]

    xs = np.array([-2, -1, 1, 2]) * delta
    v = [w1(x) for x in xs]
    return float((v[0] - 8 * v[1] + 8 * v[2] - v[3]) / (12 * delta))


# ---------------------------------------------------------------------------
# charts and periodic tori


@dataclass
class ActionChart:
    """Action data sampled on an ``i1`` grid in ``(-1, 1)``."""

    i1: np.ndarray
    F: np.ndarray
    Fp: np.ndarray
    tauE: np.ndarray
    omegaE: np.ndarray
    omega1: np.ndarray
    omega2: np.ndarray
    sArc: np.ndarray
    thetaArc: np.ndarray

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["i1", "F", "Fp", "tauE", "omegaE", "omega1", "omega2"])
        for row in zip(self.i1, self.F, self.Fp, self.tauE, self.omegaE, self.omega1, self.omega2):
            w.writerow(["%.17g" % v for v in row])
        return buf.getvalue()


def action_chart(p: Profile, nodes: int = 201, edge: float = 1e-3) -> ActionChart:
    """Sample all action data on ``nodes`` points of ``[-1 + edge, 1 - edge]``."""
    if nodes < 2:
        raise InputError("need at least two chart nodes")
    i1 = np.linspace(-1.0 + edge, 1.0 - edge, int(nodes))
    m = model(p)
    c = _cos_i(i1)
    S = m.S(c)
    th = m.theta(i1)
    F = m.F(i1)
    Fp = m.Fp(i1)
    w2 = 1.0 / (F - i1 * Fp)
    return ActionChart(i1, F, Fp, 2 * S, 2 * th - 2 * math.pi, -Fp * w2, w2, S, th)


@dataclass(frozen=True)
class PeriodicTorus:
    """A periodic torus with winding vector ``M`` and geodesic length."""

    i1: float
    winding: tuple[int, int]
    length: float
    degenerate: bool = False
    label: str = ""


@dataclass
class LengthSpectrum:
    tori: list = field(default_factory=list)
    degenerate: bool = False
    simple: bool = True
    message: str = ""

    def lengths(self) -> np.ndarray:
        return np.array([t.length for t in self.tori])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["M1", "M2", "i1", "length", "degenerate_flag"])
        for t in self.tori:
            w.writerow([t.winding[0], t.winding[1], "%.17g" % t.i1, "%.17g" % t.length,
                        int(t.degenerate)])
        return buf.getvalue()


def length_spectrum(p: Profile, qmax: int = 5, Lmax: float = 12.0, grid: int = 801) -> LengthSpectrum:
    """Lengths of periodic tori with rotation ``theta / pi = p/q``, ``q <= qmax``.

    The meridian (``i1 = 0``, length ``2L``) and the equator (length ``2 pi``,
    flagged degenerate) are always included.  A profile with constant
    ``theta`` (the round sphere) returns an empty, degenerate result.
    """
    if qmax < 1:
        raise InputError("qmax must be >= 1")
    m = model(p)
    ii = np.linspace(0.0, 1.0, grid)[1:-1]
    th = m.theta(ii)
    span = float(np.max(th) - np.min(th))
    if span < 1e-9:
        return LengthSpectrum([], True, False, "theta is constant: every geodesic is closed")
    d = np.diff(th)
    if not (np.all(d > 0) or np.all(d < 0)):
        raise NumericError("theta(i) is not monotone: the action map is not an embedding")
    lo, hi = float(min(th[0], th[-1])) / math.pi, float(max(th[0], th[-1])) / math.pi
    tori = [
        PeriodicTorus(0.0, (0, 1), 2.0 * p.L, False, "meridian"),
        PeriodicTorus(1.0, (1, 0), 2.0 * math.pi, True, "equator"),
    ]
    # theta at the open ends
    th_end = (float(m.theta(0.0)), float(math.pi * C.chebval(-1.0, m.fe_y)))
    for q in range(1, qmax + 1):
        for num in range(math.floor(lo * q), math.ceil(hi * q) + 1):
            fr = Fraction(num, q)
            if fr.denominator != q:
                continue
            target = math.pi * num / q
            g = lambda x: float(m.theta(x)) - target
            a, b = 1e-14, 1.0 - 1e-14
            ga, gb = g(a), g(b)
            if ga * gb >= 0 or min(abs(target - th_end[0]), abs(target - th_end[1])) < 1e-12:
                continue
            x = brentq(g, a, b, xtol=1e-15, maxiter=200)
            length = 2.0 * q * float(m.S(_cos_i(np.asarray(x))))
            if length > Lmax:
                continue
            w1, w2 = frequency(p, x)
            M = (int(round(length * w1 / (2 * math.pi))), int(round(length * w2 / (2 * math.pi))))
            tori.append(PeriodicTorus(float(x), M, length, False, f"{num}/{q}"))
    tori = [t for t in tori if t.length <= Lmax]
    tori.sort(key=lambda t: t.length)
    ls = np.array([t.length for t in tori])
    simple = bool(np.all(np.diff(ls) > 1e-9)) if ls.size > 1 else True
    return LengthSpectrum(tori, False, simple, "" if simple else "repeated lengths")


def flows_equivalent(p1: Profile, p2: Profile, tol: float = 1e-8, nodes: int = 201) -> bool:
    """Compare equatorial return times and angles on a common ``i1`` grid."""
    c1, c2 = action_chart(p1, nodes), action_chart(p2, nodes)
    return bool(np.max(np.abs(c1.tauE - c2.tauE)) <= tol
                and np.max(np.abs(c1.omegaE - c2.omegaE)) <= tol)
