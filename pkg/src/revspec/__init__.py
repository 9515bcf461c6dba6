"""Forward and inverse spectral computations for surfaces of revolution.

The package is organised around a few objects:

* :class:`~revspec.profile.Profile` -- a surface ``dr^2 + a(r)^2 dtheta^2`` held
  in Besse form ``f`` on ``[-1, 1]``.
* :mod:`~revspec.actions` -- action function ``F``, return data, twist, lengths.
* :mod:`~revspec.quantization` -- Bohr-Sommerfeld values ``H1`` and the first
  correction ``H_{-1}``; the one dimensional WKB helpers.
* :mod:`~revspec.oracle` -- brute force eigenvalues and geodesic integration.
* :mod:`~revspec.wavetrace` -- smoothed wave trace and its singularities.
* :mod:`~revspec.inverse` -- recovery of the profile from spectral data.
"""

from revspec.numerics import InputError, NumericError, RevspecError, SampledFunction
from revspec.profile import BesseForm, Profile, preset

__all__ = [
    "BesseForm",
    "InputError",
    "NumericError",
    "Profile",
    "RevspecError",
    "SampledFunction",
    "preset",
]

__version__ = "0.1.0"
