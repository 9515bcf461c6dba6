"""Surfaces of revolution ``dr^2 + a(r)^2 dtheta^2`` in Besse form.

A profile is stored through a positive function ``f`` on ``[-1, 1]`` with
``g = f(cos u)^2 du^2 + sin(u)^2 dtheta^2``, so ``a(r(u)) = sin u`` and
``dr/du = f(cos u)``.  ``f`` is kept as a Chebyshev series; then
``f(cos s) = sum_k d_k cos(k s)`` and ``r(u)`` has the closed form
``d_0 u + sum_{k>=1} d_k sin(k u) / k``.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np
from numpy.polynomial import chebyshev as C
from scipy.fft import dst
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from revspec.numerics import InputError, NumericError

PROFILE_FORMAT = "revspec-profile-v1"
PRESETS = ("sphere", "mirror", "asym", "spheroid(e)")
_POLY_JSON_MAX_DEGREE = 12


@dataclass(frozen=True)
class BesseForm:
    """Besse function ``f`` as Chebyshev coefficients on ``[-1, 1]``."""

    cheb: np.ndarray
    description: str = ""

    def __post_init__(self) -> None:
        c = np.atleast_1d(np.asarray(self.cheb, dtype=float))
        if c.size == 0 or not np.all(np.isfinite(c)):
            raise InputError("Besse coefficients must be a nonempty finite list")
        object.__setattr__(self, "cheb", np.trim_zeros(c, "b") if np.any(c) else c[:1])

    @classmethod
    def from_poly(cls, coeffs, description: str = "") -> "BesseForm":
        """Build from power-basis coefficients ``[c0, c1, ...]``."""
        return cls(C.poly2cheb(np.asarray(coeffs, dtype=float)), description)

    @classmethod
    def from_function(cls, fun: Callable, degree: int = 64, description: str = "") -> "BesseForm":
        """Chebyshev interpolant of an analytic ``fun`` on ``[-1, 1]``."""
        c = C.chebinterpolate(fun, degree)
        c[np.abs(c) < 1e-17 * np.max(np.abs(c))] = 0.0
        return cls(c, description)

    @property
    def poly(self) -> np.ndarray:
        """Power-basis coefficients (only well conditioned for low degree)."""
        return C.cheb2poly(self.cheb)

    def __call__(self, x) -> np.ndarray:
        return C.chebval(np.asarray(x, dtype=float), self.cheb)

    def derivative(self, x, order: int = 1) -> np.ndarray:
        return C.chebval(np.asarray(x, dtype=float), C.chebder(self.cheb, order))

    def even_part(self) -> "BesseForm":
        c = self.cheb.copy()
        c[1::2] = 0.0
        return BesseForm(c, (self.description + " even part").strip())

    def reflected(self) -> "BesseForm":
        """``f(-x)``: the same surface seen from the other pole."""
        c = self.cheb.copy()
        c[1::2] *= -1.0
        return BesseForm(c, (self.description + " reflected").strip())

    def pole_values(self) -> tuple[float, float]:
        return float(self(1.0)), float(self(-1.0))

    def is_smooth_closed(self, tol: float = 1e-10) -> bool:
        """``f(1) = f(-1) = 1``: the surface closes smoothly at both poles."""
        fn, fs = self.pole_values()
        return abs(fn - 1.0) <= tol and abs(fs - 1.0) <= tol

    def to_json(self) -> dict:
        if self.cheb.size - 1 <= _POLY_JSON_MAX_DEGREE:
            raw = _clean(self.poly)
            # drop basis-conversion noise when 15 digits reproduce the series
            short = np.array([float("%.15g" % v) for v in raw])
            tol = 8 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(self.cheb))))
            keep = short if np.max(np.abs(C.poly2cheb(short)[: self.cheb.size] - self.cheb)) <= tol else raw
            return {"coeffs": [float(v) for v in keep]}
        return {"cheb": [float(v) for v in self.cheb]}


def _clean(c: np.ndarray) -> np.ndarray:
    c = np.array(c, dtype=float)
    c[np.abs(c) < 1e-15] = 0.0
    return c


@dataclass(frozen=True, eq=False)
class Profile:
    """A surface of revolution with equator radius normalised to one.

    Attributes
    ----------
    L : float
        Meridian length from pole to pole.
    r0 : float
        Position of the equator (the maximum of ``a``).
    besse : BesseForm or None
        Besse function; ``None`` only for raw table profiles that have not
        been converted (see :func:`from_table`).
    """

    L: float
    r0: float
    besse: Optional[BesseForm]
    a_fun: Callable
    da_fun: Callable
    d2a_fun: Callable
    u_fun: Optional[Callable] = None
    r_fun: Optional[Callable] = None
    name: str = ""
    meta: dict = field(default_factory=dict)

    def a(self, r) -> np.ndarray:
        return self.a_fun(np.asarray(r, dtype=float))

    def da(self, r) -> np.ndarray:
        return self.da_fun(np.asarray(r, dtype=float))

    def d2a(self, r) -> np.ndarray:
        return self.d2a_fun(np.asarray(r, dtype=float))

    def u_of_r(self, r) -> np.ndarray:
        if self.u_fun is None:
            raise InputError("table profile has no Besse chart; call to_besse first")
        return self.u_fun(np.asarray(r, dtype=float))

    def r_of_u(self, u) -> np.ndarray:
        if self.r_fun is None:
            raise InputError("table profile has no Besse chart; call to_besse first")
        return self.r_fun(np.asarray(u, dtype=float))

    @property
    def conical(self) -> bool:
        """True when ``f(+-1) != 1``, i.e. the poles are cone points."""
        return self.besse is not None and not self.besse.is_smooth_closed()

    @property
    def f(self) -> BesseForm:
        if self.besse is None:
            raise InputError("table profile has no Besse form; call to_besse first")
        return self.besse


# ---------------------------------------------------------------------------
# construction


def _r_series(d: np.ndarray) -> Callable:
    k = np.arange(1, d.size)
    dk = d[1:] / k if d.size > 1 else np.zeros(0)

    def r_of_u(u):
        u = np.asarray(u, dtype=float)
        out = d[0] * u
        if dk.size:
            out = out + np.sin(np.multiply.outer(u, k)) @ dk
        return out

    return r_of_u


def from_besse(b: BesseForm, nodes: int = 1024, strict: bool = True, name: str = "") -> Profile:
    """Profile with ``r(u) = int_0^u f(cos s) ds`` and ``a(r(u)) = sin u``.

    Parameters
    ----------
    b : BesseForm
        Besse function, positive on ``[-1, 1]``.
    nodes : int
        Size of the sampling grid used for the positivity check.
    strict : bool
        Require ``f(1) = f(-1) = 1``.  With ``strict=False`` cone points at
        the poles are accepted and recorded in ``meta['conical']``.
    """
    if not isinstance(b, BesseForm):
        raise InputError("from_besse expects a BesseForm")
    xs = np.cos(np.linspace(0.0, np.pi, max(int(nodes), 16)))
    fx = b(xs)
    if np.min(fx) <= 0:
        raise InputError(f"Besse function must be positive on [-1, 1] (min {np.min(fx):.3g})")
    if strict and not b.is_smooth_closed():
        fn, fs = b.pole_values()
        raise InputError(f"Besse function must satisfy f(1) = f(-1) = 1, got {fn:.12g}, {fs:.12g}")
    d = b.cheb
    L = math.pi * float(d[0])
    r_of_u = _r_series(d)
    dcoef = C.chebder(d)

    def u_of_r(r):
        r = np.asarray(r, dtype=float)
        scalar = r.ndim == 0
        r = np.atleast_1d(r)
        if np.any(r < -1e-12) or np.any(r > L + 1e-12):
            raise InputError("r outside [0, L]")
        u = np.clip(np.pi * r / L, 0.0, np.pi)
        for _ in range(60):
            step = (r_of_u(u) - r) / b(np.cos(u))
            u = np.clip(u - step, 0.0, np.pi)
            if np.max(np.abs(step)) < 2e-15:
                break
        if np.max(np.abs(step)) > 1e-11:
            raise NumericError("Newton iteration for u(r) did not converge")
        return u[0] if scalar else u

    def a_fun(r):
        return np.sin(u_of_r(r))

    def da_fun(r):
        x = np.cos(u_of_r(r))
        return x / b(x)

    def d2a_fun(r):
        u = u_of_r(r)
        x = np.cos(u)
        fx = b(x)
        return -np.sin(u) * (fx - x * C.chebval(x, dcoef)) / fx**3

    meta = {"conical": not b.is_smooth_closed()}
    return Profile(L=L, r0=float(r_of_u(np.pi / 2)), besse=b, a_fun=a_fun, da_fun=da_fun,
                   d2a_fun=d2a_fun, u_fun=u_of_r, r_fun=r_of_u, name=name or b.description,
                   meta=meta)


def from_table(r, a, name: str = "table") -> Profile:
    """Spline profile from samples ``(r_j, a_j)`` with ``a(0) = a(L) = 0``.

    The result has no Besse chart; it can be validated directly and is
    converted with :func:`to_besse`.
    """
    r = np.asarray(r, dtype=float)
    a = np.asarray(a, dtype=float)
    if r.ndim != 1 or r.shape != a.shape or r.size < 8:
        raise InputError("profile table needs matching r and a arrays with at least 8 rows")
    if np.any(np.diff(r) <= 0):
        raise InputError("table r values must be strictly increasing")
    if abs(r[0]) > 1e-12 or abs(a[0]) > 1e-9 or abs(a[-1]) > 1e-9:
        raise InputError("table must start at r = 0 and have a = 0 at both ends")
    sp = CubicSpline(r, a, bc_type="not-a-knot")
    d1, d2 = sp.derivative(1), sp.derivative(2)
    L = float(r[-1])
    fine = np.linspace(0.0, L, 8 * r.size)
    j = int(np.argmax(sp(fine)))
    lo, hi = fine[max(j - 1, 0)], fine[min(j + 1, fine.size - 1)]
    r0 = brentq(lambda s: float(d1(s)), lo, hi, xtol=1e-15) if d1(lo) * d1(hi) < 0 else fine[j]
    return Profile(L=L, r0=float(r0), besse=None, a_fun=sp, da_fun=d1, d2a_fun=d2, name=name,
                   meta={"table": True})


def rescale(p: Profile) -> Profile:
    """Scale a table profile so that the equator radius is one."""
    s = float(p.a(p.r0))
    if s <= 0:
        raise InputError("profile has no positive maximum")
    r = np.linspace(0.0, p.L, 2049)
    return from_table(r / s, p.a(r) / s, name=p.name)


def to_besse(p: Profile, degree: int = 64) -> BesseForm:
    """Besse function of a profile with ``a(r0) = 1``.

    ``r(u)`` is sampled at ``u_j = j pi / N`` by solving ``a(r) = sin u_j`` on
    the two monotone branches; ``r(u) - L u / pi`` is a pure sine series whose
    coefficients (a type-I sine transform) give ``f``'s Chebyshev series.
    """
    a0 = float(p.a(p.r0))
    if abs(a0 - 1.0) > 1e-8:
        raise InputError(f"a(r0) = {a0:.12g} != 1; use rescale first")
    n = int(degree)
    u = np.arange(1, n) * np.pi / n
    target = np.sin(u)
    rs = np.empty(n - 1)
    for j, (uj, s) in enumerate(zip(u, target)):
        if abs(uj - np.pi / 2) < 1e-14:
            rs[j] = p.r0
            continue
        lo, hi = (0.0, p.r0) if uj < np.pi / 2 else (p.r0, p.L)
        g = lambda r: float(p.a(r)) - s
        ga, gb = g(lo), g(hi)
        if ga == 0:
            rs[j] = lo
        elif gb == 0:
            rs[j] = hi
        elif ga * gb > 0:
            raise NumericError("profile is not monotone on a branch; not of simple type")
        else:
            rs[j] = brentq(g, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
    resid = rs - p.L * u / np.pi
    b = dst(resid, type=1) / n  # resid_j = sum_k b_k sin(k u_j)
    k = np.arange(1, n)
    d = np.concatenate([[p.L / np.pi], k * b])
    return BesseForm(d, p.name)


# ---------------------------------------------------------------------------
# validation and comparison


def validate_simple(p: Profile, tol: float = 1e-8) -> dict:
    """Checks for a simple surface of revolution.

    Returns a dict of ``{check: {"pass": bool, "value": ...}}`` covering the
    pole conditions, positivity, the single non-degenerate maximum, and the
    twist coefficient.
    """
    rep: dict = {}
    r = np.linspace(0.0, p.L, 4001)
    a = p.a(r)
    rep["endpoints"] = {
        "pass": bool(abs(a[0]) <= tol and abs(a[-1]) <= tol
                     and abs(float(p.da(0.0)) - 1) <= tol and abs(float(p.da(p.L)) + 1) <= tol),
        "value": [float(a[0]), float(a[-1]), float(p.da(0.0)), float(p.da(p.L))],
    }
    if p.besse is not None:
        fx = p.besse(np.cos(np.linspace(0, np.pi, 2001)))
        rep["positivity"] = {"pass": bool(np.min(fx) > 0 and np.all(a[1:-1] > 0)),
                             "value": float(np.min(fx))}
    else:
        rep["positivity"] = {"pass": bool(np.all(a[1:-1] > 0)), "value": float(np.min(a[1:-1]))}
    da = p.da(r)
    sign_changes = int(np.sum(np.diff(np.sign(da[np.abs(da) > 1e-12])) != 0))
    rep["single_critical_point"] = {"pass": sign_changes == 1, "value": sign_changes}
    a2 = float(p.d2a(p.r0))
    rep["nondegenerate_max"] = {"pass": a2 < 0, "value": a2}
    if p.besse is not None:
        from revspec.actions import twist_alpha

        try:
            alpha = twist_alpha(p)
            rep["twist"] = {"pass": abs(alpha) > 1e-6, "value": alpha}
        except Exception as exc:  # report, do not raise
            rep["twist"] = {"pass": False, "value": str(exc)}
    else:
        rep["twist"] = {"pass": False, "value": "not evaluated (no Besse form)"}
    rep["ok"] = all(v["pass"] for v in rep.values() if isinstance(v, dict))
    return rep


def isometry_distance(p1: Profile, p2: Profile, samples: int = 2001) -> float:
    """``min(sup|a1 - a2|, sup|a1 - a2(L2 - .)|) + |L1 - L2|``."""
    L = min(p1.L, p2.L)
    r = np.linspace(0.0, L, samples)
    a1 = p1.a(r)
    d_direct = float(np.max(np.abs(a1 - p2.a(r))))
    d_reflect = float(np.max(np.abs(a1 - p2.a(np.clip(p2.L - r, 0.0, p2.L)))))
    return min(d_direct, d_reflect) + abs(p1.L - p2.L)


def reflect(p: Profile) -> Profile:
    """The same surface with the poles exchanged (``r -> L - r``)."""
    return from_besse(p.f.reflected(), strict=False, name=(p.name + " reflected").strip())


# ---------------------------------------------------------------------------
# presets and files


def spheroid_besse(e: float, degree: int = 96) -> BesseForm:
    """Oblate spheroid with equator radius 1 and polar semi-axis ``sqrt(1-e^2)``.

    With the meridian ``(sin u, B cos u)`` one gets
    ``f(x) = sqrt(B^2 + (1 - B^2) x^2)``.
    """
    if not 0.0 <= e < 1.0:
        raise InputError("spheroid eccentricity must lie in [0, 1)")
    B2 = 1.0 - e * e
    return BesseForm.from_function(lambda x: np.sqrt(B2 + (1.0 - B2) * x * x), degree,
                                   f"spheroid({e:g})")


def preset(name: str) -> Profile:
    """Named test surfaces: ``sphere``, ``mirror``, ``asym``, ``spheroid(e)``.

    ``mirror`` and ``asym`` use ``f = 1 + 0.05 x^2`` and ``1 + 0.1 x + 0.05 x^2``;
    these do not equal one at ``x = +-1``, so their poles are cone points.
    """
    key = str(name).strip().lower()
    if key == "sphere":
        return from_besse(BesseForm.from_poly([1.0], "sphere"), name="sphere")
    if key == "mirror":
        return from_besse(BesseForm.from_poly([1.0, 0.0, 0.05], "mirror"), strict=False,
                          name="mirror")
    if key == "asym":
        return from_besse(BesseForm.from_poly([1.0, 0.1, 0.05], "asym"), strict=False,
                          name="asym")
    m = re.fullmatch(r"spheroid\(\s*([0-9.eE+-]+)\s*\)", key)
    if m:
        try:
            e = float(m.group(1))
        except ValueError as exc:
            raise InputError(f"bad spheroid parameter in {name!r}") from exc
        b = spheroid_besse(e)
        return from_besse(b, name=b.description)
    raise InputError(f"unknown preset {name!r}; known presets: {', '.join(PRESETS)}")


def profile_to_json(p: Profile, nodes: int = 1024) -> dict:
    return {"format": PROFILE_FORMAT, "name": p.name, "besse": p.f.to_json(), "nodes": int(nodes)}


def profile_from_json(obj: dict) -> Profile:
    """Inverse of :func:`profile_to_json`; table input runs through :func:`to_besse`."""
    if not isinstance(obj, dict):
        raise InputError("profile file must contain a JSON object")
    name = str(obj.get("name", ""))
    if "besse" in obj:
        bd = obj["besse"]
        if "coeffs" in bd:
            b = BesseForm.from_poly(bd["coeffs"], name)
        elif "cheb" in bd:
            b = BesseForm(np.asarray(bd["cheb"], dtype=float), name)
        else:
            raise InputError("besse entry needs 'coeffs' or 'cheb'")
        return from_besse(b, int(obj.get("nodes", 1024)), strict=False, name=name)
    if "table" in obj:
        t = obj["table"]
        tp = from_table(t["r"], t["a"], name or "table")
        if abs(float(tp.a(tp.r0)) - 1.0) > 1e-8:
            tp = rescale(tp)
        return from_besse(to_besse(tp), strict=False, name=tp.name)
    raise InputError("profile file needs a 'besse' or 'table' entry")


def load_profile(spec: str) -> Profile:
    """Preset name or path to a profile JSON file."""
    if spec is None or not str(spec).strip():
        raise InputError("empty profile argument")
    path = Path(spec)
    if path.is_file():
        try:
            obj = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"{spec}: invalid JSON ({exc})") from exc
        return profile_from_json(obj)
    try:
        return preset(spec)
    except InputError as exc:
        raise InputError(f"{spec!r} is neither a profile file nor a preset ({exc})") from exc
