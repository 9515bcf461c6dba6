"""Smoothed wave trace of a joint spectrum and its singularities.

The trace ``sum_j w(sqrt(lam_j) / Lambda) exp(i t sqrt(lam_j))`` uses the
window ``w(x) = 1`` for ``x <= 1`` and ``exp(-(x-1)^2 / (2 sigma^2))`` beyond,
a low-pass filter with a Gaussian edge.  Its modulus peaks near the lengths
of closed geodesics.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from revspec.actions import PeriodicTorus, tangential_second_derivative
from revspec.numerics import InputError, NumericError
from revspec.profile import Profile
from revspec.quantization import MU, JointSpectrum

T_MIN_DEFAULT = 1.0


def window(x, sigma: float) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    out = np.ones_like(x)
    big = x > 1.0
    out[big] = np.exp(-((x[big] - 1.0) ** 2) / (2.0 * sigma * sigma))
    return out


@dataclass
class TraceSignal:
    """Smoothed trace on a symmetric time grid ``t = -tmax .. tmax``."""

    t: np.ndarray
    values: np.ndarray
    sigma: float
    cutoff: float
    meta: dict = field(default_factory=dict)

    @property
    def abs(self) -> np.ndarray:
        return np.abs(self.values)

    def positive(self):
        k = self.t >= 0
        return self.t[k], self.values[k]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "re", "im", "abs"])
        for t, v in zip(self.t, self.values):
            w.writerow(["%.17g" % t, "%.17g" % v.real, "%.17g" % v.imag, "%.17g" % abs(v)])
        return buf.getvalue()


def _pairwise_sum(a: np.ndarray) -> np.ndarray:
    """Fixed binary-tree reduction along axis 0 (bit-stable order)."""
    while a.shape[0] > 1:
        if a.shape[0] % 2:
            a = np.concatenate([a, np.zeros((1,) + a.shape[1:], dtype=a.dtype)])
        a = a[0::2] + a[1::2]
    return a[0]


def smoothed_trace(spec, cutoff: float, sigma: float, tmax: float, dt: float = 2e-3,
                   lambda_max: float | None = None) -> TraceSignal:
    """Windowed exponential sum over a spectrum.

    Parameters
    ----------
    spec : JointSpectrum or array of eigenvalues
        The multiset ``{lam_j}``.
    cutoff : float
        Frequency scale ``Lambda`` (in units of ``sqrt(lam)``).
    sigma : float
        Relative width of the Gaussian edge.
    tmax : float
        Half-length of the symmetric time grid.
    lambda_max : float, optional
        Largest eigenvalue the spectrum is known to be complete up to;
        defaults to the spectrum's own record or its largest entry.

    Raises
    ------
    InputError
        If the spectrum does not reach ``(Lambda (1 + 4 sigma))^2``.
    """
    if cutoff <= 0 or sigma <= 0 or tmax <= 0 or dt <= 0:
        raise InputError("cutoff, sigma, tmax and dt must be positive")
    if isinstance(spec, JointSpectrum):
        lam = spec.arrays()[2]
        known = lambda_max if lambda_max is not None else getattr(spec, "lambda_max", None)
    else:
        lam = np.asarray(spec, dtype=float).ravel()
        known = lambda_max
    if lam.size == 0:
        raise InputError("empty spectrum")
    need = (cutoff * (1.0 + 4.0 * sigma)) ** 2
    have = known if known is not None else (float(np.max(lam)) if lam.size > 1 else need)
    if have < need * (1 - 1e-12):
        raise InputError(f"spectrum must cover lambda <= {need:.6g} (have {have:.6g})")
    k = np.sqrt(np.maximum(lam, 0.0))
    k = np.sort(k)
    wk = window(k / cutoff, sigma)
    keep = wk > 1e-300
    k, wk = k[keep], wk[keep]
    n = int(round(tmax / dt))
    tp = np.arange(n + 1) * dt
    phase = np.outer(k, tp)
    re = _pairwise_sum(wk[:, None] * np.cos(phase))
    im = _pairwise_sum(wk[:, None] * np.sin(phase))
    vals_p = re + 1j * im
    t = np.concatenate([-tp[:0:-1], tp])
    vals = np.concatenate([np.conj(vals_p[:0:-1]), vals_p])
    return TraceSignal(t, vals, float(sigma), float(cutoff), {"terms": int(k.size)})


def detect_singularities(sig: TraceSignal, threshold: float = 5.0, t_min: float = T_MIN_DEFAULT) -> list[float]:
    """Local maxima of ``|trace|`` for ``t >= t_min`` above ``threshold * median``.

    Each maximum is refined by a three point parabola.
    """
    t, v = sig.positive()
    a = np.abs(v)
    sel = t >= t_min
    if np.count_nonzero(sel) < 3:
        return []
    ts, av = t[sel], a[sel]
    med = float(np.median(av))
    if med <= 0:
        return []
    out = []
    for j in range(1, av.size - 1):
        if av[j] > av[j - 1] and av[j] >= av[j + 1] and av[j] > threshold * med:
            y0, y1, y2 = av[j - 1], av[j], av[j + 1]
            den = y0 - 2 * y1 + y2
            shift = 0.5 * (y0 - y2) / den if den != 0 else 0.0
            out.append(float(ts[j] + shift * (ts[1] - ts[0])))
    return out


def peak_amplitude(sig: TraceSignal, t0: float, radius: float = 0.05) -> float:
    """Maximum of ``|trace|`` within ``radius`` of ``t0``."""
    t, v = sig.positive()
    sel = np.abs(t - t0) <= radius
    if not np.any(sel):
        raise InputError("no samples near the requested time")
    return float(np.max(np.abs(v[sel])))


def principal_invariant(p: Profile, torus: PeriodicTorus, delta: float = 1e-2) -> complex:
    """``c_L = exp(i <M, mu>) / sqrt(2 pi i alpha L)`` on the principal branch.

    ``alpha`` is the second derivative of ``H1`` at ``(i1, F(i1))`` along the
    direction ``v`` with ``<M, v> = 0``.
    """
    if torus.degenerate:
        raise NumericError("degenerate torus: no principal invariant")
    M = torus.winding
    alpha = tangential_second_derivative(p, torus.i1, M, delta)
    if abs(alpha) < 1e-8:
        raise NumericError("alpha = 0: the torus is degenerate (no twist)")
    phase = np.exp(1j * (M[0] * MU[0] + M[1] * MU[1]))
    return complex(phase / np.sqrt(2j * math.pi * alpha * torus.length))


def match_lengths(peaks, lengths, tol: float = 0.05) -> dict:
    """Pair every length with its nearest detected peak."""
    peaks = np.asarray(peaks, dtype=float)
    out = {}
    for L in lengths:
        if peaks.size == 0:
            out[float(L)] = None
            continue
        j = int(np.argmin(np.abs(peaks - L)))
        out[float(L)] = float(peaks[j]) if abs(peaks[j] - L) <= tol else None
    return out
