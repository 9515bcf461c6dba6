"""Semiclassical joint spectrum of the Laplacian on a surface of revolution.

Separating ``e^{i n theta}`` and conjugating by ``a^{1/2}`` gives the radial
operator ``-d^2/dr^2 + n^2/a^2 + W`` with ``W = a''/(2a) - a'^2/(4a^2)``.  Its
WKB quantisation condition through second order is

    Phi(lam, n) + dPhi(lam, n) = 2 pi (k + 1/2),    k = m - |n|,

with ``Phi = 2 int sqrt(lam - n^2/a^2) dr = 2 pi (t F(n/t) - |n|)``,
``t = sqrt(lam)``, and, after integrating the second order terms by parts,

    dPhi = -1/6 n^4 d_lam^2 P3 + 1/2 n^2 d_lam P2 - 1/8 P1,
    Pj   = oint a'^2 / (a^(2j) p) dr,   p = sqrt(lam - n^2/a^2).

The first order solution is ``H1(n, m + 1/2)`` (the root of
``t F(n/t) = m + 1/2``) and the correction is ``H_-1 = -dPhi / (2 S(c))`` with
``S`` the arc integral of :mod:`revspec.actions`.  Each ``Pj`` is written in
the Besse chart as a smooth tau integral; its pole at the equator is removed
analytically so that no derivative of a singular quantity is taken
numerically.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from revspec.actions import ActionModel, model
from revspec.numerics import InputError, NumericError, SampledFunction, singular_quad, sine_nodes
from revspec.profile import Profile

MU = (0.0, 0.5)
NF_FORMAT = "revspec-normalform-v1"
SPEC_FORMAT = "revspec-spectrum-v1"

# coefficients of the regularised second order phase (see module docstring)
C1, C2, C3 = -1.0 / 6.0, 0.5, -1.0 / 8.0


# ---------------------------------------------------------------------------
# the radial potential


def effective_potential(p: Profile, nodes: int = 1024, margin: float = 1e-3) -> SampledFunction:
    """``W = a''/(2a) - a'^2/(4a^2)`` sampled on ``[margin, L - margin]``."""
    if not 0 < margin < p.L / 2:
        raise InputError("margin must lie in (0, L/2); W is singular at the poles")
    r = np.linspace(margin, p.L - margin, nodes)
    return SampledFunction.from_values(r, potential_W(p, r))


def potential_W(p: Profile, r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r >= p.L):
        raise InputError("W is singular at r = 0 and r = L")
    a, da, d2a = p.a(r), p.da(r), p.d2a(r)
    return d2a / (2 * a) - da * da / (4 * a * a)


# ---------------------------------------------------------------------------
# the second order phase


class _PhaseCorrection:
    """``dPhi(1, s)`` at ``lam = 1`` for ``s = nu^2``.

    With ``phi(x) = x^2 / f(x)`` and ``y = x^2`` write the even part as
    ``Phi_e(y) = al0 + al1 (1-y) + al2 (1-y)^2 + (1-y)^3 rho(y)``.  The pole
    terms integrate in closed form (the ``al0`` contributions cancel
    exactly); ``rho`` gives the smooth remainder integrals
    ``R_j(w) = int rho(w sin^2) (1 - w sin^2)^(3-j) dtau``.
    """

    def __init__(self, p: Profile, degree: int | None = None, tau_nodes: int = 256):
        b = p.f
        deg = degree or max(2 * b.cheb.size + 24, 48)
        inv_e = lambda x: 0.5 * (1.0 / b(x) + 1.0 / b(-x))
        ey = C.chebinterpolate(lambda z: 0.5 * (z + 1.0) * inv_e(np.sqrt(0.5 * (z + 1.0))), deg)
        # derivatives with respect to y = (z + 1) / 2
        d1 = 2.0 * C.chebder(ey)
        d2 = 4.0 * C.chebder(ey, 2)
        self.al0 = float(C.chebval(1.0, ey))
        self.al1 = -float(C.chebval(1.0, d1))
        self.al2 = 0.5 * float(C.chebval(1.0, d2))
        one_minus_y = np.array([0.5, -0.5])
        num = ey.copy()
        num[0] -= self.al0
        num = C.chebsub(num, self.al1 * one_minus_y)
        num = C.chebsub(num, self.al2 * C.chebpow(one_minus_y, 2))
        rho, _ = C.chebdiv(num, C.chebpow(one_minus_y, 3))
        # psi_j(y) = rho(y) (1 - y)^(3 - j), j = 1, 2, 3
        self.psi = {j: C.chebmul(rho, C.chebpow(one_minus_y, 3 - j)) for j in (1, 2, 3)}
        self.dpsi = {j: 2.0 * C.chebder(c) if c.size > 1 else np.zeros(1) for j, c in self.psi.items()}
        self.d2psi = {j: 4.0 * C.chebder(c, 2) if c.size > 2 else np.zeros(1) for j, c in self.psi.items()}
        n = max(tau_nodes, 2 * deg + 32)
        self.st, self.wt = sine_nodes(n)

    def _R(self, j: int, w: np.ndarray):
        s2 = self.st**2
        y = np.multiply.outer(w, s2)
        z = 2.0 * y - 1.0
        R = C.chebval(z, self.psi[j]) @ self.wt
        R1 = (C.chebval(z, self.dpsi[j]) * s2) @ self.wt
        R2 = (C.chebval(z, self.d2psi[j]) * s2 * s2) @ self.wt
        return R, R1, R2

    def delta_phi(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        w = 1.0 - s
        # g = 2 lam^(-1/2) R(w(lam)), w' = s, w'' = -2 s at lam = 1
        R3, R3p, R3pp = self._R(3, w)
        R2, R2p, _ = self._R(2, w)
        R1, _, _ = self._R(1, w)
        g3pp = 2.0 * (0.75 * R3 - 3.0 * s * R3p + s * s * R3pp)
        g2p = 2.0 * (-0.5 * R2 + s * R2p)
        g1 = 2.0 * R1
        rem = C1 * s * s * g3pp + C2 * s * g2p + C3 * g1
        D1 = -math.pi / 4.0
        D2 = -math.pi * (1.0 + 5.0 * s) / 8.0
        return self.al1 * D1 + self.al2 * D2 + rem


# ---------------------------------------------------------------------------
# normal form


class NormalForm:
    """``H1`` and ``H_-1`` on the action cone ``|I1| <= I2``.

    Both are determined by functions of ``nu = I1 / H1`` in ``[0, 1]``:
    ``F(nu)`` (so that ``H1(nu, F(nu)) = 1``) and ``h_-1(nu) = H_-1(nu, F(nu))``.
    ``H1`` is homogeneous of degree one and ``H_-1`` of degree minus one;
    both are even in ``I1``.  ``H0`` vanishes identically.
    """

    def __init__(self, F: Callable, Fp: Callable, hm1: Optional[Callable], source: str = "",
                 profile: Optional[Profile] = None):
        self._F, self._Fp, self._hm1 = F, Fp, hm1
        self.source = source
        self.profile = profile
        self.mu = MU
        self.F0 = float(F(0.0))
        self.L = math.pi * self.F0

    # -- building -----------------------------------------------------------
    @classmethod
    def from_profile(cls, p: Profile) -> "NormalForm":
        m = model(p)
        pc = _PhaseCorrection(p)

        def hm1(nu):
            nu = np.abs(np.asarray(nu, dtype=float))
            c = np.sqrt(np.clip(1.0 - nu * nu, 0.0, 1.0))
            return -pc.delta_phi(nu * nu) / (2.0 * m.S(c))

        nf = cls(m.F, m.Fp, hm1, "semiclassical", p)
        nf._model = m
        return nf

    @classmethod
    def from_samples(cls, nu, F, hm1=None, source: str = "file") -> "NormalForm":
        """Spline normal form from samples on ``0 <= nu <= 1``."""
        nu = np.asarray(nu, dtype=float)
        F = np.asarray(F, dtype=float)
        if nu.ndim != 1 or nu.size < 4 or np.any(np.diff(nu) <= 0) or nu[0] < 0 or nu[-1] > 1:
            raise InputError("normal form samples need an increasing nu grid in [0, 1]")
        spF = CubicSpline(nu, F)
        spH = None if hm1 is None else CubicSpline(nu, np.asarray(hm1, dtype=float))
        Fn = lambda x: spF(np.abs(np.asarray(x, dtype=float)))
        Fpn = lambda x: np.sign(x) * spF(np.abs(np.asarray(x, dtype=float)), 1)
        Hn = None if spH is None else (lambda x: spH(np.abs(np.asarray(x, dtype=float))))
        nf = cls(Fn, Fpn, Hn, source)
        nf.samples = (nu, F, None if hm1 is None else np.asarray(hm1, dtype=float))
        return nf

    # -- evaluation ---------------------------------------------------------
    def F(self, nu) -> np.ndarray:
        return self._F(np.asarray(nu, dtype=float))

    def Fp(self, nu) -> np.ndarray:
        return self._Fp(np.asarray(nu, dtype=float))

    def hm1(self, nu) -> np.ndarray:
        if self._hm1 is None:
            raise InputError("normal form carries no H_-1 data")
        return self._hm1(np.asarray(nu, dtype=float))

    @property
    def has_hm1(self) -> bool:
        return self._hm1 is not None

    def nu_of(self, I1: float, I2: float) -> float:
        """``nu = |I1| / H1(I1, I2)``."""
        I1, I2 = abs(float(I1)), float(I2)
        if I2 <= 0 or I1 > I2 * (1 + 1e-12):
            raise InputError(f"({I1}, {I2}) lies outside the action cone")
        if I1 == 0:
            return 0.0
        if I1 >= I2:
            return 1.0
        g = lambda nu: nu * I2 - I1 * float(self.F(nu))
        return brentq(g, 0.0, 1.0, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=200)

    def H1(self, I1: float, I2: float) -> float:
        nu = self.nu_of(I1, I2)
        return float(I2) / float(self.F(nu))

    def Hm1(self, I1: float, I2: float) -> float:
        nu = self.nu_of(I1, I2)
        t = float(I2) / float(self.F(nu))
        return float(self.hm1(nu)) / t

    def H(self, I1: float, I2: float) -> float:
        nu = self.nu_of(I1, I2)
        t = float(I2) / float(self.F(nu))
        return t + (float(self.hm1(nu)) / t if self.has_hm1 else 0.0)

    def H0(self, I1: float, I2: float) -> float:
        return 0.0

    def to_json(self, nodes: int = 401) -> dict:
        nu = np.linspace(0.0, 1.0, nodes)
        out = {"format": NF_FORMAT, "mu": list(MU), "nu": nu.tolist(), "F": self.F(nu).tolist()}
        if self.has_hm1:
            out["Hm1"] = self.hm1(nu).tolist()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "NormalForm":
        if obj.get("format") != NF_FORMAT:
            raise InputError("not a normal form file")
        return cls.from_samples(obj["nu"], obj["F"], obj.get("Hm1"), "file")


def normal_form(p: Profile) -> NormalForm:
    return NormalForm.from_profile(p)


def _check_lattice(n: int, m: int) -> None:
    if int(m) < abs(int(n)):
        raise InputError(f"lattice point (n={n}, m={m}) needs m >= |n|")


def bs_sqrt_eigenvalue(nf: NormalForm, n: int, m: int) -> float:
    """``H1(n, m + 1/2)``: root of ``t F(n/t) = m + 1/2``."""
    _check_lattice(n, m)
    return nf.H1(n, m + 0.5)


def correction_Hm1(p: Optional[Profile], nf: NormalForm, n: int, m: int) -> float:
    """``H_-1(n, m + 1/2)``; ``p`` is accepted for interface symmetry."""
    _check_lattice(n, m)
    return nf.Hm1(n, m + 0.5)


# ---------------------------------------------------------------------------
# joint spectrum


@dataclass
class JointSpectrum:
    """Rows ``(n, m, lambda)``; ``provenance`` is semiclassical, oracle or file."""

    entries: list = field(default_factory=list)
    provenance: str = "semiclassical"
    lambda_max: Optional[float] = None

    def __len__(self) -> int:
        return len(self.entries)

    def arrays(self):
        if not self.entries:
            return np.zeros(0, int), np.zeros(0, int), np.zeros(0)
        n, m, lam = zip(*self.entries)
        return np.array(n), np.array(m), np.array(lam, dtype=float)

    def sqrt_lambdas(self) -> np.ndarray:
        return np.sqrt(np.maximum(self.arrays()[2], 0.0))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n", "m", "lambda", "sqrt_lambda", "provenance"])
        for n, m, lam in self.entries:
            w.writerow([int(n), int(m), "%.17g" % lam, "%.17g" % math.sqrt(max(lam, 0.0)),
                        self.provenance])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "JointSpectrum":
        rows = list(csv.DictReader(io.StringIO(text)))
        if not rows or not {"n", "m", "lambda"} <= set(rows[0]):
            raise InputError("spectrum CSV needs columns n, m, lambda")
        try:
            entries = [(int(r["n"]), int(r["m"]), float(r["lambda"])) for r in rows]
        except ValueError as exc:
            raise InputError(f"malformed spectrum row: {exc}") from exc
        prov = rows[0].get("provenance") or "file"
        return cls(entries, prov)


def spectrum(p_or_nf, lambda_max: float, order: int = 2) -> JointSpectrum:
    """All lattice points with ``(H1 + H_-1)^2 <= lambda_max``.

    ``order=1`` drops ``H_-1``.  Rows are ordered by ``n`` then ``m``.
    """
    nf = p_or_nf if isinstance(p_or_nf, NormalForm) else NormalForm.from_profile(p_or_nf)
    if lambda_max < 0:
        return JointSpectrum([], "semiclassical", float(lambda_max))
    tmax = math.sqrt(lambda_max)
    use_hm1 = order >= 2 and nf.has_hm1
    ents = []

    def value(n, m):
        nu = nf.nu_of(n, m + 0.5)
        t = (m + 0.5) / float(nf.F(nu))
        return t + (float(nf.hm1(nu)) / t if use_hm1 else 0.0)

    n = 0
    while True:
        if value(n, n) > tmax:
            break
        for sgn in ((0,) if n == 0 else (-n, n)):
            m = abs(sgn)
            while True:
                v = value(sgn, m)
                if v > tmax:
                    break
                ents.append((sgn, m, v * v))
                m += 1
        n += 1
    ents.sort(key=lambda e: (e[0], e[1]))
    return JointSpectrum(ents, "semiclassical", float(lambda_max))


# ---------------------------------------------------------------------------
# one-dimensional WKB


def _well(V: Callable, E: float, domain: tuple[float, float]) -> tuple[float, float]:
    from scipy.optimize import minimize_scalar

    lo, hi = map(float, domain)
    xs = np.linspace(lo, hi, 2001)
    j = int(np.argmin(V(xs)))
    res = minimize_scalar(V, bounds=(xs[max(j - 1, 0)], xs[min(j + 1, xs.size - 1)]),
                          method="bounded", options={"xatol": 1e-14})
    x0 = float(res.x)
    if V(x0) >= E:
        raise NumericError("energy below the potential minimum: no classically allowed region")
    g = lambda x: float(V(x)) - E
    if g(lo) <= 0 or g(hi) <= 0:
        raise NumericError("potential does not confine the energy within the domain")
    return (brentq(g, lo, x0, xtol=1e-15, rtol=1e-15, maxiter=400),
            brentq(g, x0, hi, xtol=1e-15, rtol=1e-15, maxiter=400))


def _area(V, E, domain, nodes=64) -> float:
    lo, hi = _well(V, E, domain)
    sm = lambda x: np.sqrt(np.maximum(2 * (E - V(x)), 0.0) / ((x - lo) * (hi - x)))
    return 2.0 * singular_quad(sm, lo, hi, power=0.5, nodes=nodes)


def _period(V, E, domain, nodes=64) -> float:
    lo, hi = _well(V, E, domain)
    sm = lambda x: np.sqrt((x - lo) * (hi - x) / np.maximum(2 * (E - V(x)), 1e-300))
    return 2.0 * singular_quad(sm, lo, hi, power=-0.5, nodes=nodes)


def _B(V, dV, E, domain, nodes=64) -> float:
    lo, hi = _well(V, E, domain)
    sm = lambda x: dV(x) ** 2 * np.sqrt((x - lo) * (hi - x) / np.maximum(2 * (E - V(x)), 1e-300))
    return 2.0 * singular_quad(sm, lo, hi, power=-0.5, nodes=nodes)


def bohr_sommerfeld_1d(V: Callable, h: float, n: int, domain=(-10.0, 10.0)) -> float:
    """``E`` with ``oint p dx = 2 pi h (n + 1/2)`` for ``p^2/2 + V``."""
    if n < 0 or h <= 0:
        raise InputError("need n >= 0 and h > 0")
    target = 2 * math.pi * h * (n + 0.5)
    xs = np.linspace(*domain, 2001)
    vmin = float(np.min(V(xs)))
    vmax = float(min(V(np.asarray(domain[0])), V(np.asarray(domain[1]))))
    g = lambda E: _area(V, E, domain) - target
    lo = vmin + 1e-14 * max(1.0, abs(vmin))
    hi = vmin + 1e-3 * max(1.0, abs(vmin))
    while g(hi) < 0:
        hi = vmin + 2 * (hi - vmin)
        if hi >= vmax:
            raise NumericError("no bound region reaches the requested action")
    try:
        gl = g(lo)
    except NumericError:
        gl = -target
    if gl > 0:
        raise NumericError("bracket failure in Bohr-Sommerfeld solve")
    return brentq(g, lo, hi, xtol=1e-16, rtol=4 * np.finfo(float).eps, maxiter=400)


def _numeric_dV(V: Callable) -> Callable:
    def dV(x, eps=1e-5):
        x = np.asarray(x, dtype=float)
        hh = eps * np.maximum(1.0, np.abs(x))
        return (-V(x + 2 * hh) + 8 * V(x + hh) - 8 * V(x - hh) + V(x - 2 * hh)) / (12 * hh)

    return dV


def wkb_correction_1d(V: Callable, h: float, n: int, dV: Optional[Callable] = None,
                      domain=(-10.0, 10.0), rel_step: float = 5e-2) -> float:
    """Second order coefficient ``E2`` in ``E = E1 + h^2 E2 + O(h^4)``.

    ``E2 = (24 T)^-1 d^2/dE^2 oint V'^2 / p dx`` at the Bohr-Sommerfeld energy
    ``E1``, with ``T = dA/dE``.  The second derivative is a central
    difference with step ``rel_step * E1`` and one Richardson step.
    """
    dV = dV or _numeric_dV(V)
    E1 = bohr_sommerfeld_1d(V, h, n, domain)
    xs = np.linspace(*domain, 2001)
    scale = E1 - float(np.min(V(xs)))
    d = rel_step * scale

    def D(step):
        return (_B(V, dV, E1 + step, domain) - 2 * _B(V, dV, E1, domain)
                + _B(V, dV, E1 - step, domain)) / step**2

    d2B = (4 * D(d / 2) - D(d)) / 3
    return d2B / (24.0 * _period(V, E1, domain))
