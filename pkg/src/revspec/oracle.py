"""Brute-force references independent of the semiclassical machinery.

* :func:`sturm_liouville_eigs` diagonalises the separated Laplacian.  The
  default method is a Jacobi-weighted spectral Galerkin method in the Besse
  variable ``x = cos u``; ``method="fd"`` is a second order finite
  difference scheme in conservative form on a cell-centred ``r``
  grid with Richardson extrapolation.
* :func:`schrodinger_eigs_1d` diagonalises ``-(h^2/2) d^2/dx^2 + V``.
* :func:`geodesic_integrate` integrates the geodesic equations.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import eig_banded, eigh, eigh_tridiagonal, solve_banded
from scipy.special import eval_jacobi, roots_jacobi, roots_legendre

from revspec.numerics import InputError, NumericError
from revspec.profile import Profile

SL_TOL = 1e-9


# ---------------------------------------------------------------------------
# Laplace eigenvalues of a surface of revolution


def _galerkin(p: Profile, n: int, size: int, quad: int) -> np.ndarray:
    """Eigenvalues of ``-((1-x^2)/f Y')' + n^2 f/(1-x^2) Y = lam f Y``."""
    b = p.f
    fn, fs = b.pole_values()
    k = np.arange(size)
    if n == 0:
        al = be = 0.0
        x, w = roots_legendre(quad)
        P = eval_jacobi(k[None, :], 0.0, 0.0, x[:, None])
        dP = np.zeros_like(P)
        dP[:, 1:] = 0.5 * (k[1:] + 1) * eval_jacobi(k[None, 1:] - 1, 1.0, 1.0, x[:, None])
        fx = b(x)
        Dw = w * (1 - x * x) / fx
        A = (dP * Dw[:, None]).T @ dP
        B = (P * (w * fx)[:, None]).T @ P
    else:
        a = 0.5 * abs(n) * fn
        c = 0.5 * abs(n) * fs
        al, be = 2 * a, 2 * c
        # weight (1-x)^(2a-1) (1+x)^(2c-1)
        x, w = roots_jacobi(quad, al - 1.0, be - 1.0)
        P = eval_jacobi(k[None, :], al, be, x[:, None])
        dP = np.zeros_like(P)
        dP[:, 1:] = 0.5 * (k[1:] + al + be + 1) * eval_jacobi(k[None, 1:] - 1, al + 1, be + 1,
                                                               x[:, None])
        fx = b(x)
        # d/dx[(1-x)^a (1+x)^c P] = (1-x)^(a-1) (1+x)^(c-1) Qd
        Qd = (-a * (1 + x))[:, None] * P + (c * (1 - x))[:, None] * P + ((1 - x * x))[:, None] * dP
        A = (Qd * (w / fx)[:, None]).T @ Qd + n * n * (P * (w * fx)[:, None]).T @ P
        B = (P * (w * (1 - x * x) * fx)[:, None]).T @ P
    # diagonal scaling keeps the pencil well conditioned
    s = 1.0 / np.sqrt(np.diag(B))
    A = A * s[:, None] * s[None, :]
    B = B * s[:, None] * s[None, :]
    return eigh(0.5 * (A + A.T), 0.5 * (B + B.T), eigvals_only=True)


def _fd_radial(p: Profile, n: int, count: int, N: int) -> np.ndarray:
    """Cell-centred scheme for ``-(a psi')'/a + n^2/a^2 psi = lam psi``.

    Fluxes sit on faces ``r = j h`` where ``a(0) = a(L) = 0`` closes the
    scheme without boundary rows; the symmetrised matrix is tridiagonal.
    """
    L = p.L
    h = L / N
    rc = (np.arange(N) + 0.5) * h
    rf = np.arange(1, N) * h
    ac, af = p.a(rc), p.a(rf)
    diag = np.zeros(N)
    diag[:-1] += af
    diag[1:] += af
    diag = diag / h**2 + n * n / ac
    off = -af / h**2
    d = diag / ac
    e = off / np.sqrt(ac[:-1] * ac[1:])
    return eigh_tridiagonal(d, e, select="i", select_range=(0, count - 1), eigvals_only=True)


def sturm_liouville_eigs(p: Profile, n: int, count: int, method: str = "galerkin",
                         size: int | None = None) -> np.ndarray:
    """Lowest ``count`` Laplace eigenvalues with angular index ``n``.

    Parameters
    ----------
    p : Profile
        Surface (Besse form required).
    n : int
        Angular quantum number; only ``|n|`` matters.
    count : int
        Number of eigenvalues.
    method : {"galerkin", "fd"}
        Spectral Galerkin (default, converged to about 1e-12 relative) or
        cell-centred finite differences with one Richardson step.
    size : int, optional
        Basis size (Galerkin) or grid size (fd).

    Raises
    ------
    NumericError
        If two resolutions disagree by more than the advertised tolerance.
    """
    if count < 1:
        raise InputError("count must be >= 1")
    n = abs(int(n))
    if method == "galerkin":
        K = size or (count + 48)
        quad = 2 * K + 2 * p.f.cheb.size + 64
        lam1 = _galerkin(p, n, K, quad)[:count]
        lam2 = _galerkin(p, n, K + 16, quad + 32)[:count]
        err = np.abs(lam1 - lam2) / np.maximum(1.0, np.abs(lam2))
        if np.max(err) > SL_TOL:
            raise NumericError(f"Galerkin basis too small for {count} eigenvalues (rel. change {np.max(err):.2e})")
        return lam2
    if method == "fd":
        N = size or max(2000, 60 * count)
        if N < 8 * count:
            raise NumericError("grid too coarse for the requested number of eigenvalues")
        l1 = _fd_radial(p, n, count, N)
        l2 = _fd_radial(p, n, count, 2 * N)
        return (4 * l2 - l1) / 3
    raise InputError(f"unknown method {method!r}")


def oracle_spectrum(p: Profile, n_values, count: int) -> list[tuple[int, int, float]]:
    """``(n, m, lambda)`` rows with ``m = |n| + k``, ``k = 0..count-1``."""
    rows = []
    for n in n_values:
        lam = sturm_liouville_eigs(p, n, count)
        rows.extend((int(n), abs(int(n)) + k, float(v)) for k, v in enumerate(lam))
    return rows


# ---------------------------------------------------------------------------
# one-dimensional Schroedinger operator


def _fd4_eigs(V: Callable, h: float, lo: float, hi: float, N: int, count: int):
    dx = (hi - lo) / (N + 1)
    x = lo + dx * np.arange(1, N + 1)
    c = h * h / 2.0 / (12 * dx * dx)
    # -psi'' ~ (psi_{j-2} - 16 psi_{j-1} + 30 psi_j - 16 psi_{j+1} + psi_{j+2}) / (12 dx^2)
    band = np.zeros((3, N))
    band[0, 2:] = c
    band[1, 1:] = -16 * c
    band[2, :] = 30 * c + np.asarray(V(x), dtype=float)
    E = eig_banded(band, lower=False, eigvals_only=True, select="i", select_range=(0, count - 1))
    # eigenvectors by inverse iteration (only needed for the leakage check)
    full = np.zeros((5, N))
    full[0, 2:], full[1, 1:], full[2], full[3, :-1], full[4, :-2] = c, -16 * c, band[2], -16 * c, c
    vecs = np.empty((N, count))
    for j, e in enumerate(E):
        shifted = full.copy()
        shifted[2] -= e + 1e-10 * max(1.0, abs(e))
        v = np.ones(N)
        for _ in range(3):
            v = solve_banded((2, 2), shifted, v)
            v /= np.max(np.abs(v))
        vecs[:, j] = v
    return E, vecs


def schrodinger_eigs_1d(V: Callable, h: float, domain: tuple[float, float], count: int,
                        N: int = 4000) -> np.ndarray:
    """Lowest eigenvalues of ``-(h^2/2) psi'' + V psi`` with Dirichlet ends.

    Fourth order five point differences at ``N`` and ``2N`` interior points,
    Richardson extrapolated.  Wave functions that do not decay before the
    ends of ``domain`` raise :class:`NumericError`.
    """
    lo, hi = map(float, domain)
    if not lo < hi or h <= 0 or count < 1:
        raise InputError("need lo < hi, h > 0 and count >= 1")
    E1, _ = _fd4_eigs(V, h, lo, hi, N, count)
    E2, vec = _fd4_eigs(V, h, lo, hi, 2 * N, count)
    edge = max(4, vec.shape[0] // 100)
    amp = np.max(np.abs(vec), axis=0)
    leak = np.max(np.abs(np.concatenate([vec[:edge], vec[-edge:]])), axis=0) / amp
    if np.max(leak) > 1e-6:
        raise NumericError(f"wavefunction reaches the domain boundary (relative amplitude {np.max(leak):.2e})")
    return (16 * E2 - E1) / 15


# ---------------------------------------------------------------------------
# geodesics


@dataclass
class GeodesicRun:
    s: np.ndarray
    u: np.ndarray
    theta: np.ndarray
    crossings: list = field(default_factory=list)  # (s, theta) northbound at the equator
    clairaut_drift: float = 0.0
    energy_drift: float = 0.0


def geodesic_integrate(p: Profile, i1: float, horizon: float, rtol: float = 1e-12) -> GeodesicRun:
    """Unit-speed geodesic with Clairaut constant ``i1`` starting northbound at the equator.

    The Hamiltonian equations in ``(u, p_r, theta)`` are
    ``u' = p_r / f(cos u)``, ``p_r' = i1^2 a'/a^3`` and ``theta' = i1 / a^2``
    with ``a = sin u`` and ``a' = cos u / f(cos u)``; they are regular on the
    annulus ``a >= |i1|``.
    """
    if not 0 < abs(i1) < 1:
        raise InputError("geodesic oracle needs 0 < |i1| < 1")
    if horizon <= 0:
        raise InputError("horizon must be positive")
    b = p.f
    J = float(i1)

    def rhs(s, z):
        u, pr, th = z
        x, a = math.cos(u), math.sin(u)
        fx = float(b(x))
        return [pr / fx, J * J * (x / fx) / a**3, J / (a * a)]

    def north(s, z):
        return math.cos(z[0])  # equator is u = pi/2; northbound means u decreasing

    north.direction = 1.0
    z0 = [math.pi / 2, -math.sqrt(1 - J * J), 0.0]
    sol = solve_ivp(rhs, (0.0, horizon), z0, method="DOP853", rtol=rtol, atol=1e-13,
                    events=north, dense_output=True, max_step=0.05)
    if not sol.success:
        raise NumericError(f"geodesic integration failed: {sol.message}")
    crossings = [(0.0, 0.0)] + [(float(s), float(z[2])) for s, z in zip(sol.t_events[0], sol.y_events[0])
                                if s > 1e-9]
    u, pr = sol.y[0], sol.y[1]
    a = np.sin(u)
    speed2 = pr**2 + J * J / a**2
    # p_theta / |velocity| * a is the Clairaut quantity a sin(angle to meridian)
    clairaut = J / np.sqrt(speed2)
    return GeodesicRun(sol.t, u, sol.y[2], crossings,
                       float(np.max(np.abs(clairaut - J))), float(np.max(np.abs(speed2 - 1))))
