"""Reconstruction of a surface of revolution from its joint spectrum.

The pipeline runs

    spectrum -> normal form (H1, H_-1) -> J, K -> branch slopes -> profile.

Both ``J`` and ``K`` live on the radius value ``a`` in two charts: the
``x = 1/a^2`` chart of the fractional-integral equations and the Besse chart
``c = cos u = sqrt(1 - a^2)``.  In the Besse chart ``|a'(r_-+)| = c / f(+-c)``, so

    J = 2 f_e(c) / c,        K = 2 c phi(c),

with ``f_e`` the even part of ``f`` and ``phi = (1/f(c) + 1/f(-c)) / 2``.
``f_e`` is an Abel inverse of the meridian return time; ``phi`` solves a
Volterra equation of the second kind built from ``H_-1``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import gcd
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import Chebyshev
from numpy.polynomial import chebyshev as C
from scipy.optimize import least_squares

from revspec.actions import model
from revspec.numerics import InputError, NumericError, SampledFunction, _gauss_jacobi
from revspec.profile import BesseForm, Profile, from_besse, isometry_distance, validate_simple
from revspec.quantization import C1, C2, C3, JointSpectrum, NormalForm

POLE_BUFFER = 0.05  # branch data stop at a = POLE_BUFFER
EQUATOR_BUFFER = 0.02  # and at c = EQUATOR_BUFFER (a slightly below 1)
MIN_RAYS = 3
MIN_DEPTH = 3
REJECT_FACTOR = 10.0


def _threads() -> int:
    try:
        return max(1, int(os.environ.get("REVSPEC_THREADS", "0")) or (os.cpu_count() or 1))
    except ValueError:
        return 1


def _c_max() -> float:
    return math.sqrt(1.0 - POLE_BUFFER**2)


# ---------------------------------------------------------------------------
# normal form from a spectrum


@dataclass
class RayFit:
    n0: int
    m0: int
    A: float
    B: float
    residual: float
    points: int


def fit_normal_form(spec: JointSpectrum, min_depth: int = MIN_DEPTH) -> NormalForm:
    """Fit ``H1`` and ``H_-1`` along rays of the half-integer action lattice.

    The lattice points ``t (n0, m0 + 1/2)`` with odd ``t`` are again lattice
    points; along such a ray homogeneity gives
    ``sqrt(lam) = t A + B / t + O(t^-3)`` with ``A = H1(n0, m0 + 1/2)`` and
    ``B = H_-1(n0, m0 + 1/2)``.  Each ray yields one sample
    ``nu = n0 / A``, ``F(nu) = (m0 + 1/2) / A``, ``h_-1(nu) = A B``.

    Parameters
    ----------
    spec : JointSpectrum
        Rows ``(n, m, lambda)``; only ``|n|`` is used and rows for ``+-n``
        are averaged.
    min_depth : int
        Fewest lattice points a ray needs to be used.

    Returns
    -------
    NormalForm
        Normal form fitted to the ray samples (see
        :func:`_series_normal_form`); the attributes ``rays``, ``rejected``
        and ``fit_residual`` record the regression.

    Raises
    ------
    InputError
        If fewer than three distinct ``n`` values or rays are available, or
        the deepest ray stops below ``m = 30``.
    """
    n, m, lam = spec.arrays()
    if n.size == 0:
        raise InputError("empty spectrum")
    if np.any(m < np.abs(n)):
        raise InputError("spectrum rows need m >= |n|")
    table: dict = {}
    for ni, mi, li in zip(np.abs(n), m, lam):
        table.setdefault((int(ni), int(mi)), []).append(math.sqrt(max(float(li), 0.0)))
    val = {k: float(np.mean(v)) for k, v in sorted(table.items())}
    if len({k[0] for k in val}) < 3:
        raise InputError("need at least three distinct n values")
    if max(k[1] for k in val) < 30:
        raise InputError("spectrum too shallow: need m up to at least 30")
    rays = []
    mmax = max(k[1] for k in val)
    for m0 in range(0, mmax + 1):
        for n0 in range(0, m0 + 1):
            if gcd(n0, 2 * m0 + 1) != 1:
                continue
            ts, ys = [], []
            t = 1
            while (t * n0, t * m0 + (t - 1) // 2) in val:
                ts.append(t)
                ys.append(val[(t * n0, t * m0 + (t - 1) // 2)])
                t += 2
            if len(ts) < min_depth:
                continue
            ts = np.array(ts, dtype=float)
            X = np.column_stack([ts, 1.0 / ts])
            coef, *_ = np.linalg.lstsq(X, np.array(ys), rcond=None)
            res = float(np.sqrt(np.mean((X @ coef - ys) ** 2)))
            rays.append(RayFit(n0, m0, float(coef[0]), float(coef[1]), res, len(ts)))
    if len(rays) < MIN_RAYS:
        raise InputError(f"only {len(rays)} rays reach depth {min_depth}; extend lambda_max")
    med = float(np.median([r.residual for r in rays]))
    floor = 1e-12 * max(r.A for r in rays)
    kept = [r for r in rays if r.residual <= REJECT_FACTOR * max(med, floor)]
    nu = np.array([r.n0 / r.A for r in kept])
    F = np.array([(r.m0 + 0.5) / r.A for r in kept])
    h = np.array([r.A * r.B for r in kept])
    order = np.argsort(nu)
    nu, F, h = nu[order], F[order], h[order]
    keep = np.concatenate([[True], np.diff(nu) > 1e-9])
    nu, F, h = nu[keep], F[keep], h[keep]
    nf = _series_normal_form(nu, F, h, source=f"fit:{spec.provenance}")
    nf.rays = kept
    nf.rejected = len(rays) - len(kept)
    nf.fit_residual = max(r.residual for r in kept)
    return nf


def _series_normal_form(nu, F, h, source: str, degree: Optional[int] = None) -> NormalForm:
    """Least-squares normal form ``F = alpha nu + P(nu^2)``, ``h_-1 = R(nu^2)``.

    Both ``F - alpha nu`` and ``h_-1`` are analytic in ``nu^2`` on
    ``[0, 1]``, so a global Chebyshev fit in ``2 nu^2 - 1`` extrapolates to
    the equatorial end ``nu = 1`` far better than a spline.
    """
    nu, F, h = (np.asarray(v, dtype=float) for v in (nu, F, h))
    deg = degree if degree is not None else max(2, min(18, nu.size - 8))
    if nu.size < deg + 2:
        raise InputError("too few rays for the normal form fit")
    s = 2.0 * nu * nu - 1.0
    cf = np.linalg.lstsq(np.column_stack([nu, C.chebvander(s, deg)]), F, rcond=None)[0]
    ch = np.linalg.lstsq(C.chebvander(s, deg), h, rcond=None)[0]
    alpha, P = float(cf[0]), cf[1:]
    dP = C.chebder(P)

    def Fn(x):
        x = np.abs(np.asarray(x, dtype=float))
        return alpha * x + C.chebval(2.0 * x * x - 1.0, P)

    def Fpn(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        return np.sign(x) * (alpha + 4.0 * ax * C.chebval(2.0 * ax * ax - 1.0, dP))

    def Hn(x):
        x = np.abs(np.asarray(x, dtype=float))
        return C.chebval(2.0 * x * x - 1.0, ch)

    nf = NormalForm(Fn, Fpn, Hn, source)
    nf.samples = (nu, F, h)
    nf.series_degree = deg
    return nf


# ---------------------------------------------------------------------------
# J: the even part of f from the meridian return time


def _meridian_time(nf: NormalForm) -> Callable:
    """``S(c) = pi (F(nu) - nu F'(nu))`` with ``nu = sqrt(1 - c^2)``."""

    def S(c):
        c = np.asarray(c, dtype=float)
        nu = np.sqrt(np.clip(1.0 - c * c, 0.0, 1.0))
        return math.pi * (nf.F(nu) - nu * nf.Fp(nu))

    return S


class _EvenPart:
    """Abel inverse of ``S(v) = int_0^v F_e(y) y^-1/2 (v - y)^-1/2 dy``.

    ``S`` is a Chebyshev series in ``v = c^2`` on ``[0, vmax]``.  Writing
    ``S = S(0) + v T(v)`` the inverse is

        F_e(y) = S(0)/pi + (3/2 y Psi(y) + y^2 Psi'(y)) / pi,
        Psi(y) = int_0^1 s T(y s) (1 - s)^-1/2 ds.
    """

    def __init__(self, S: Chebyshev, quad: int = 64):
        self.S = S
        self.S0 = float(S(0.0))
        v = Chebyshev.identity(domain=S.domain, window=S.window)
        self.T, _ = divmod(S - self.S0, v)
        self.dT = self.T.deriv()
        z, w = _gauss_jacobi(quad, -0.5, 0.0)
        self.s = 0.5 * (z + 1.0)
        self.w = w / math.sqrt(2.0)

    def Fe(self, y) -> np.ndarray:
        y = np.atleast_1d(np.asarray(y, dtype=float))
        ys = np.multiply.outer(y, self.s)
        psi = (self.s * self.T(ys)) @ self.w
        dpsi = (self.s**2 * self.dT(ys)) @ self.w
        return (self.S0 + 1.5 * y * psi + y * y * dpsi) / math.pi

    def fe(self, c) -> np.ndarray:
        c = np.asarray(c, dtype=float)
        return self.Fe(c * c).reshape(c.shape)


def _even_from_period(S_fun: Callable, degree: int = 40) -> _EvenPart:
    vmax = _c_max() ** 2
    v = 0.5 * vmax * (1.0 - np.cos(np.linspace(0.0, math.pi, 4 * degree + 1)))
    S = Chebyshev.fit(v, S_fun(np.sqrt(v)), degree, domain=[0.0, vmax])
    return _EvenPart(S)


def _x_nodes(count: int) -> tuple[np.ndarray, np.ndarray]:
    """Matching ``c`` and ``x = 1/(1 - c^2)`` grids inside both buffers."""
    th = np.linspace(0.0, math.pi, count)
    c = EQUATOR_BUFFER + (_c_max() - EQUATOR_BUFFER) * 0.5 * (1.0 - np.cos(th))
    return c, 1.0 / (1.0 - c * c)


def recover_J(nf: NormalForm, nodes: int = 401, degree: int = 40) -> SampledFunction:
    """``J(x) = 1/|a'(r_-)| + 1/|a'(r_+)|`` on a grid of ``x = 1/a^2``.

    The distribution function of ``1/a^2`` is an Abel transform of the
    meridian return time; it is inverted in the Besse chart.

    Raises
    ------
    NumericError
        If the return time recovered from ``H1`` is not positive, or ``H1``
        is not monotone in ``I2`` (degenerate normal form).
    """
    S_fun = _meridian_time(nf)
    nu = np.linspace(0.0, 1.0, 201)
    if np.any(np.diff(nf.F(nu) / np.maximum(nu, 1e-300))[1:] >= 0):
        raise NumericError("I(E) is not monotone: the normal form is degenerate")
    if np.any(S_fun(np.sqrt(1.0 - nu * nu)) <= 0):
        raise NumericError("non-positive return time recovered from H1")
    ev = _even_from_period(S_fun, degree)
    c, x = _x_nodes(nodes)
    J = 2.0 * ev.fe(c) / c
    return SampledFunction.from_values(x, J, meta={"chart": "x=1/a^2", "c": c, "even_part": ev})


def recover_even_part(tauE: SampledFunction, degree: int = 24, nodes: int = 401) -> SampledFunction:
    """Even part ``(f(x) + f(-x)) / 2`` from the meridian return time.

    Parameters
    ----------
    tauE : SampledFunction
        ``tau_E(i1)`` sampled on ``i1`` in ``(0, 1)``.
    degree : int
        Chebyshev degree of the least-squares fit of ``tau_E`` in
        ``v = 1 - i1^2``.

    Returns
    -------
    SampledFunction
        ``f_e(x)`` on ``x`` in ``[0, sqrt(1 - i1_min^2)]``.
    """
    i1 = np.asarray(tauE.nodes, dtype=float)
    if i1.size < degree + 2 or np.any(np.abs(i1) >= 1):
        raise InputError("tau_E needs more than degree + 1 samples with |i1| < 1")
    v = 1.0 - i1 * i1
    vmax = float(np.max(v))
    # tau_E = 2 s(i) is twice the pole-to-pole meridian time S(c), c = cos i
    S = Chebyshev.fit(v, 0.5 * np.asarray(tauE.values, dtype=float), degree, domain=[0.0, vmax])
    ev = _EvenPart(S)
    x = np.linspace(0.0, math.sqrt(vmax), nodes)
    return SampledFunction.from_values(x, ev.fe(x), meta={"S0": ev.S0})


# ---------------------------------------------------------------------------
# K: the H_-1 invariant


def _cheb_lobatto(n: int, lo: float, hi: float) -> np.ndarray:
    return lo + (hi - lo) * 0.5 * (1.0 - np.cos(np.pi * np.arange(n + 1) / n))


def _volterra_matrices(c: np.ndarray, degree: int, cm: float, quad: int = 256):
    """Product integration of ``phi = sum a_k T_k`` against the Volterra kernels.

    With ``t = c / sqrt(1 - c^2) = sqrt(x - 1)`` the two integrals become
    ``int_1^x u/xi dxi = int_0^t 4 s^2 phi ds`` and
    ``int_1^x u/xi^2 dxi = int_0^t 4 s^2 phi / (1 + s^2) ds``; Gauss-Legendre
    in ``s`` avoids the pole-side growth of the integrands in ``c``.
    """
    zq, wq = np.polynomial.legendre.leggauss(quad)
    M1 = np.zeros((c.size, degree + 1))
    M2 = np.zeros((c.size, degree + 1))
    for i, ci in enumerate(c):
        if ci <= 0:
            continue
        t = ci / math.sqrt(1.0 - ci * ci)
        s = 0.5 * t * (zq + 1.0)
        w = 0.5 * t * wq * 4.0 * s * s
        cs = s / np.sqrt(1.0 + s * s)
        V = C.chebvander(2.0 * cs / cm - 1.0, degree)
        M1[i] = w @ V
        M2[i] = (w / (1.0 + s * s)) @ V
    return M1, M2


def _phase_moment(nf: NormalForm, S_fun: Callable, c: np.ndarray, quad: int = 64) -> np.ndarray:
    """``Q(x) = I_{3/2} M / sqrt(pi)`` at ``x = 1/(1 - c^2)``.

    ``M(E) = -2 nu S h_-1(nu)`` at ``nu = E^-1/2`` is the second order phase
    written as a function of ``E = 1/nu^2``.  In the variable ``nu``

        Q = -(8/pi) sqrt(x) int_{nu_x}^1 S h nu^-3 (nu + nu_x)^1/2 (nu - nu_x)^1/2 dnu.
    """
    z, w = _gauss_jacobi(quad, 0.0, 0.5)
    out = np.zeros(c.size)
    for i, ci in enumerate(c):
        if ci <= 0:
            continue
        x = 1.0 / (1.0 - ci * ci)
        nx = math.sqrt(1.0 - ci * ci)
        half = 0.5 * (1.0 - nx)
        nu = nx + half * (z + 1.0)
        cc = np.sqrt(np.clip(1.0 - nu * nu, 0.0, 1.0))
        g = S_fun(cc) * nf.hm1(nu) * nu**-3 * np.sqrt(nu + nx)
        out[i] = -(8.0 / math.pi) * math.sqrt(x) * half**1.5 * float(g @ w)
    return out


def recover_K(nf: NormalForm, nodes: int = 401, degree: int = 64, phi0: Optional[float] = None,
              cond_max: float = 1e12) -> SampledFunction:
    """``K(x) = |a'(r_-)| + |a'(r_+)|`` on a grid of ``x = 1/a^2``.

    The ``H_-1`` invariant ``M = L K`` with ``L = C1 I_{-3/2} x^{3/2} +
    C2 I_{-1/2} x^{1/2} + C3 I_{1/2} x^{-1/2}`` is inverted by applying
    ``I_{3/2}``.  With ``u = x^{3/2} K`` this gives the Volterra equation of
    the second kind

        C1 (u - beta sqrt(x - 1)) + C2 I_1(u/x) + C3 I_2(u/x^2) = I_{3/2} M / sqrt(pi)

    on ``x >= 1`` (``K = 0`` below the equatorial threshold ``x = 1``).  The
    boundary term ``beta = lim u / sqrt(x - 1) = 2/f(0)`` spans the kernel of
    ``L`` and is taken from ``H1``: ``f(0) = F(1) - F'(1)``.  The equation is
    solved by Chebyshev collocation for ``phi = K / (2c)`` in the Besse chart.

    Raises
    ------
    InputError
        If the normal form has no ``H_-1`` part.
    NumericError
        If the collocation matrix is ill-conditioned; the message carries
        the condition number.
    """
    if not nf.has_hm1:
        raise InputError("recover_K needs H_-1 data")
    S_fun = _meridian_time(nf)
    if phi0 is None:
        f0 = float(S_fun(np.array(0.0))) / math.pi
        if not f0 > 0:
            raise NumericError("equatorial value f(0) recovered from H1 is not positive")
        phi0 = 1.0 / f0
    cm = _c_max()
    cn = _cheb_lobatto(degree, 0.0, cm)
    om = 1.0 - cn * cn
    x = 1.0 / om
    Q = _phase_moment(nf, S_fun, cn)
    V = C.chebvander(2.0 * cn / cm - 1.0, degree)
    M1, M2 = _volterra_matrices(cn, degree, cm)
    A = C1 * (2.0 * cn * om**-1.5)[:, None] * V + (C2 - C3) * M1 + C3 * x[:, None] * M2
    rhs = Q + C1 * 2.0 * phi0 * cn * om**-0.5
    A[0] = V[0]
    rhs[0] = phi0
    norm = np.max(np.abs(A), axis=1)
    A /= norm[:, None]
    rhs = rhs / norm
    cond = float(np.linalg.cond(A))
    if not np.isfinite(cond) or cond > cond_max:
        raise NumericError(f"K solve ill-conditioned (condition number {cond:.3e})")
    phi = Chebyshev(np.linalg.solve(A, rhs), domain=[0.0, cm])
    c, xg = _x_nodes(nodes)
    K = 2.0 * c * phi(c)
    return SampledFunction.from_values(xg, K, meta={"chart": "x=1/a^2", "c": c, "phi": phi,
                                                     "condition": cond, "beta": 2.0 * phi0})


# ---------------------------------------------------------------------------
# branches and the profile


@dataclass
class BranchData:
    """Branch slopes on a grid of radius values ``a``.

    ``p >= q`` are the two values of ``|a'|`` at ``a``; ``minus`` is the
    slope on the branch labelled ``r_-`` and ``plus`` the one on ``r_+``.
    """

    a: np.ndarray
    J: np.ndarray
    K: np.ndarray
    p: np.ndarray
    q: np.ndarray
    minus: np.ndarray
    plus: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def x(self) -> np.ndarray:
        return 1.0 / self.a**2

    @property
    def c(self) -> np.ndarray:
        return np.sqrt(np.clip(1.0 - self.a**2, 0.0, 1.0))

    def am_hm_defect(self) -> float:
        """``min(J K) - 4``; non-negative for consistent data."""
        return float(np.min(self.J * self.K) - 4.0)


def combine_branches(J: SampledFunction, K: SampledFunction, tol: float = 1e-3) -> BranchData:
    """Split ``J`` and ``K`` into the two branch slopes.

    ``p + q = K`` and ``1/p + 1/q = J`` make ``p, q`` the roots of
    ``z^2 - K z + K/J``.  A negative discriminant within ``tol`` (relative
    to ``K^2``) is clipped to zero.  The branches are followed by continuity
    from the pole; where ``p - q`` touches zero the labels swap if that keeps
    the slope of each branch continuous.  By convention the branch that is
    steeper at the pole is labelled ``r_-``.

    Raises
    ------
    NumericError
        If the discriminant is negative beyond ``tol``.
    """
    x = np.asarray(J.nodes, dtype=float)
    Jv = np.asarray(J(x), dtype=float)
    Kv = np.asarray(K(x), dtype=float)
    if np.any(Jv <= 0) or np.any(Kv <= 0):
        raise NumericError("J and K must be positive")
    disc = Kv * Kv - 4.0 * Kv / Jv
    if np.any(disc < -tol * Kv * Kv):
        j = int(np.argmin(disc / (Kv * Kv)))
        raise NumericError(f"inconsistent J, K: discriminant {disc[j]:.3e} at x = {x[j]:.6g}")
    root = np.sqrt(np.maximum(disc, 0.0))
    p = 0.5 * (Kv + root)
    q = 0.5 * (Kv - root)
    a = 1.0 / np.sqrt(x)
    # walk from the pole (large x) towards the equator
    order = np.argsort(a)
    up, lo = p[order].copy(), q[order].copy()
    gap = (up - lo) / np.maximum(Kv[order], 1e-300)
    swaps = 0
    for k in range(2, gap.size - 1):
        if gap[k] < 1e-4 and gap[k] <= gap[k - 1] and gap[k] <= gap[k + 1]:
            # slopes of the labelled branches before and after the touching point
            keep = abs((up[k + 1] - up[k]) - (up[k - 1] - up[k - 2]) * (a[order][k + 1] - a[order][k])
                       / max(a[order][k - 1] - a[order][k - 2], 1e-300))
            swap = abs((lo[k + 1] - up[k]) - (up[k - 1] - up[k - 2]) * (a[order][k + 1] - a[order][k])
                       / max(a[order][k - 1] - a[order][k - 2], 1e-300))
            if swap < keep:
                up[k + 1:], lo[k + 1:] = lo[k + 1:].copy(), up[k + 1:].copy()
                swaps += 1
    first, second = up, lo
    if second[0] > first[0]:
        first, second = second, first
    inv = np.empty_like(order)
    inv[order] = np.arange(order.size)
    minus, plus = first[inv], second[inv]
    return BranchData(a, Jv, Kv, p, q, minus, plus, {"swaps": swaps, "symmetric": bool(np.all(root == 0))})


def rebuild_profile(b: BranchData, degree: int = 24, name: str = "reconstructed") -> Profile:
    """Profile from branch slopes.

    Integrating ``dr = da / |a'|`` along each branch from its pole is done
    in the Besse chart, where ``a = sin u`` and ``dr = f(cos u) du``: the
    branch slopes give ``f(+c) = c / |a'(r_-)|`` and ``f(-c) = c / |a'(r_+)|``.
    A Chebyshev fit of ``f`` on ``[-1, 1]`` carries the data across the pole
    and equator buffers, and :func:`revspec.profile.from_besse` performs the
    integration, including the closure ``L = r_-(1) + (L - r_+(1))``.

    Raises
    ------
    NumericError
        If a branch slope is not positive or the fitted ``f`` is not.
    """
    if np.any(b.minus <= 0) or np.any(b.plus <= 0):
        raise NumericError("branch slopes must be positive")
    c = b.c
    xs = np.concatenate([c, -c])
    fs = np.concatenate([c / b.minus, c / b.plus])
    deg = min(degree, xs.size // 2 - 1)
    cheb = C.chebfit(xs, fs, deg)
    grid = np.linspace(-1.0, 1.0, 2001)
    if np.any(C.chebval(grid, cheb) <= 0):
        raise NumericError("reconstructed Besse function is not positive")
    cheb[np.abs(cheb) < 1e-14] = 0.0
    bf = BesseForm(np.trim_zeros(cheb, "b") if np.any(cheb) else np.zeros(1), "reconstructed")
    return from_besse(bf, strict=False, name=name)


# ---------------------------------------------------------------------------
# the full pipeline


@dataclass
class ReconstructionResult:
    """Recovered profile with intermediate data, residuals and flags."""

    profile: Profile
    branches: Optional[BranchData]
    residuals: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    normal_form: Optional[NormalForm] = None
    coefficients: Optional[np.ndarray] = None

    def to_json(self) -> dict:
        out = {
            "format": "revspec-reconstruction-v1",
            "besse": self.profile.f.to_json(),
            "L": self.profile.L,
            "residuals": {k: _jsonable(v) for k, v in self.residuals.items()},
            "flags": {k: _jsonable(v) for k, v in self.flags.items()},
        }
        if self.coefficients is not None:
            out["coefficients"] = [float(v) for v in self.coefficients]
        if self.branches is not None:
            b = self.branches
            out["branches"] = {"x": b.x.tolist(), "J": b.J.tolist(), "K": b.K.tolist(),
                               "r_minus_slope": b.minus.tolist(), "r_plus_slope": b.plus.tolist()}
        return out


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(t) for t in v.tolist()]
    if isinstance(v, (list, tuple)):
        return [_jsonable(t) for t in v]
    if isinstance(v, dict):
        return {k: _jsonable(t) for k, t in v.items()}
    return str(v)


def _as_normal_form(data) -> NormalForm:
    if isinstance(data, NormalForm):
        return data
    if isinstance(data, JointSpectrum):
        return fit_normal_form(data)
    raise InputError("spectral data must be a JointSpectrum or a NormalForm")


def forward_residuals(p: Profile, nf: NormalForm, nodes: int = 101) -> dict:
    """Sup differences between ``nf`` and the normal form of ``p``."""
    mine = NormalForm.from_profile(p)
    nu = np.linspace(0.0, 0.98, nodes)
    out = {"F": float(np.max(np.abs(mine.F(nu) - nf.F(nu))))}
    if nf.has_hm1:
        out["Hm1"] = float(np.max(np.abs(mine.hm1(nu) - nf.hm1(nu))))
    return out


def mirror_defect(p: Profile, samples: int = 2001) -> float:
    """``sup |a(r) - a(L - r)|``: zero for mirror-symmetric surfaces."""
    r = np.linspace(0.0, p.L, samples)
    return float(np.max(np.abs(p.a(r) - p.a(p.L - r))))


def reconstruct(data, truth: Optional[Profile] = None, degree: int = 24) -> ReconstructionResult:
    """Run spectrum or normal form -> J, K -> branches -> profile.

    Parameters
    ----------
    data : JointSpectrum or NormalForm
    truth : Profile, optional
        Reference surface; when given ``residuals['isometry']`` is filled.
    degree : int
        Chebyshev degree of the reconstructed Besse function.
    """
    nf = _as_normal_form(data)
    J = recover_J(nf)
    K = recover_K(nf)
    b = combine_branches(J, K)
    p = rebuild_profile(b, degree)
    flags = {"validate": validate_simple(p), "am_hm_defect": b.am_hm_defect(),
             "K_condition": K.meta["condition"], "conical": p.conical}
    v = flags["validate"]
    if not v["ok"]:
        flags["explanation"] = ("poles are cone points (f(+-1) != 1); the endpoint checks do not apply"
                                if p.conical else "reconstructed profile fails validate_simple")
    res = forward_residuals(p, nf)
    if truth is not None:
        res["isometry"] = isometry_distance(truth, p)
    res["mirror_defect"] = mirror_defect(p)
    return ReconstructionResult(p, b, res, flags, nf)


# ---------------------------------------------------------------------------
# optimisation fallback


def _family_profile(coeffs: np.ndarray) -> Profile:
    return from_besse(BesseForm.from_poly(np.concatenate([[1.0], coeffs])), nodes=256, strict=False)


def reconstruct_fit(data, degree: int = 3, nodes: int = 41, x0=None, max_nfev: int = 60,
                    use_hm1: bool = True) -> ReconstructionResult:
    """Least-squares fit of ``f = 1 + c_1 x + ... + c_d x^d`` to a normal form.

    The misfit stacks ``F`` and (when present and ``use_hm1``) ``h_-1`` on a
    grid of ``nu``.  The Jacobian is evaluated by forward differences with
    the candidate models computed in a thread pool capped by
    ``REVSPEC_THREADS``.

    Returns
    -------
    ReconstructionResult
        ``coefficients`` holds ``c_1 .. c_d``; ``flags['flatness_ratio']`` is
        ``sigma_max / sigma_min`` of the final Jacobian and
        ``flags['flat_direction']`` the right singular vector of
        ``sigma_min``; ``residuals['covariance_proxy']`` is the diagonal of
        ``(J^T J)^+ * rss / dof``.

    Raises
    ------
    InputError
        If ``degree`` is outside ``1 .. 12``.
    NumericError
        If the iteration cap is reached; ``best`` on the exception holds the
        last iterate.
    """
    if not 1 <= degree <= 12:
        raise InputError("family dimension must be between 1 and 12")
    nf = _as_normal_form(data)
    with_h = use_hm1 and nf.has_hm1
    nu = np.linspace(0.0, 0.95, nodes)
    target = [nf.F(nu)]
    if with_h:
        target.append(nf.hm1(nu))
    target = np.concatenate(target)

    def forward(cf):
        p = _family_profile(np.asarray(cf, dtype=float))
        m = model(p)
        out = [m.F(nu)]
        if with_h:
            out.append(NormalForm.from_profile(p).hm1(nu))
        return np.concatenate(out)

    def fun(cf):
        try:
            return forward(cf) - target
        except (NumericError, InputError, ValueError):
            return np.full(target.size, 1e3)

    step = 1e-6
    pool = ThreadPoolExecutor(max_workers=_threads())

    def jac(cf):
        base = fun(cf)
        shifted = [cf + step * e for e in np.eye(cf.size)]
        cols = list(pool.map(fun, shifted))
        return np.column_stack([(col - base) / step for col in cols])

    start = np.zeros(degree) if x0 is None else np.asarray(x0, dtype=float)
    try:
        sol = least_squares(fun, start, jac=jac, method="trf", max_nfev=max_nfev,
                            xtol=1e-12, ftol=1e-12, gtol=1e-12)
        Jm = jac(sol.x)
    finally:
        pool.shutdown()
    if sol.status <= 0:
        err = NumericError(f"fit did not converge: {sol.message}")
        err.best = sol.x
        raise err
    sv = np.linalg.svd(Jm, compute_uv=False)
    _, _, Vt = np.linalg.svd(Jm)
    ratio = float(sv[0] / sv[-1]) if sv[-1] > 0 else math.inf
    rss = float(np.sum(sol.fun**2))
    dof = max(target.size - degree, 1)
    cov = np.linalg.pinv(Jm.T @ Jm) * rss / dof
    p = _family_profile(sol.x)
    flat = [Vt[k] for k in range(sv.size) if sv[k] * 100.0 <= sv[0]]
    flags = {"flatness_ratio": ratio, "flat_direction": Vt[-1], "flat_directions": flat, "singular_values": sv,
             "used_hm1": with_h, "nfev": int(sol.nfev)}
    res = {"rms": math.sqrt(rss / target.size), "covariance_proxy": np.diag(cov)}
    return ReconstructionResult(p, None, res, flags, nf, sol.x)
