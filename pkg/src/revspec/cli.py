"""Command-line interface.

Exit codes: 0 success, 1 numeric failure, 2 usage or input error.  Tables
are CSV and reports JSON; every float is written so that it reads back
exactly.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from revspec import actions, inverse, oracle, quantization, wavetrace
from revspec.numerics import InputError, NumericError
from revspec.profile import PRESETS, isometry_distance, load_profile, preset, profile_to_json

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2
ROUNDTRIP_LAMBDA = 3600.0

_RANGES = {
    "nodes": (2, 1 << 20),
    "lambda_max": (0.0, 1e8),
    "sigma": (1e-4, 1.0),
    "cutoff": (1e-3, 1e4),
    "tmax": (1e-3, 1e4),
    "qmax": (1, 1000),
    "lmax": (1e-3, 1e4),
    "tol": (0.0, 1e3),
    "family": (1, 12),
    "count": (1, 10000),
    "threshold": (0.0, 1e6),
}


@dataclass
class RunConfig:
    """Validated command configuration."""

    command: str
    inputs: list = field(default_factory=list)
    out: Optional[str] = None
    overrides: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        for key, value in self.overrides.items():
            if key not in _RANGES:
                raise InputError(f"unknown option {key!r}")
            if value is None:
                continue
            lo, hi = _RANGES[key]
            if not lo <= value <= hi:
                raise InputError(f"{key} = {value} outside [{lo}, {hi}]")

    def get(self, key: str, default=None):
        v = self.overrides.get(key)
        return default if v is None else v


# ---------------------------------------------------------------------------
# output helpers


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _read(path: str) -> str:
    if not path or not str(path).strip():
        raise InputError("empty path")
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{path}: no such file")
    return p.read_text()


def _load_spectral(path: str):
    """Spectrum CSV or normal form JSON."""
    text = _read(path)
    if text.lstrip().startswith("{"):
        try:
            return quantization.NormalForm.from_json(json.loads(text))
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}: invalid JSON ({exc})") from exc
    return quantization.JointSpectrum.from_csv(text)


# ---------------------------------------------------------------------------
# commands


def cmd_preset(cfg: RunConfig) -> int:
    name = cfg.inputs[0]
    try:
        p = preset(name)
    except InputError:
        sys.stderr.write(f"unknown preset {name!r}; available: {', '.join(PRESETS)}\n")
        return EXIT_INPUT
    _emit(_dump(profile_to_json(p, cfg.get("nodes", 1024))), cfg.out)
    return EXIT_OK


def cmd_spectrum(cfg: RunConfig) -> int:
    p = load_profile(cfg.inputs[0])
    lam = cfg.get("lambda_max")
    if lam is None:
        raise InputError("spectrum needs --lambda-max")
    _emit(quantization.spectrum(p, lam).to_csv(), cfg.out)
    return EXIT_OK


def _n_range(text: str) -> range:
    try:
        if ":" in text:
            a, b = (int(v) for v in text.split(":"))
        else:
            a = b = int(text)
    except ValueError as exc:
        raise InputError(f"bad n range {text!r}; use A:B") from exc
    if b < a:
        raise InputError("empty n range")
    return range(a, b + 1)


def cmd_oracle(cfg: RunConfig) -> int:
    p = load_profile(cfg.inputs[0])
    rows = oracle.oracle_spectrum(p, _n_range(cfg.inputs[1]), cfg.get("count", 3))
    _emit(quantization.JointSpectrum(rows, "oracle").to_csv(), cfg.out)
    return EXIT_OK


def cmd_actions(cfg: RunConfig) -> int:
    p = load_profile(cfg.inputs[0])
    _emit(actions.action_chart(p, cfg.get("nodes", 201)).to_csv(), cfg.out)
    return EXIT_OK


def cmd_lengths(cfg: RunConfig) -> int:
    p = load_profile(cfg.inputs[0])
    ls = actions.length_spectrum(p, cfg.get("qmax", 5), cfg.get("lmax", 12.0))
    _emit(ls.to_csv(), cfg.out)
    report = {"degenerate": ls.degenerate, "simple": ls.simple, "count": len(ls.tori),
              "message": ls.message}
    sys.stderr.write(json.dumps(report, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_trace(cfg: RunConfig) -> int:
    source = cfg.inputs[0]
    cutoff, sigma = cfg.get("cutoff", 40.0), cfg.get("sigma", 0.05)
    tmax = cfg.get("tmax", 14.0)
    profile = None
    if Path(source).is_file() and not _read(source).lstrip().startswith("{"):
        spec = quantization.JointSpectrum.from_csv(_read(source))
    else:
        profile = load_profile(source)
        spec = quantization.spectrum(profile, (cutoff * (1.0 + 4.0 * sigma)) ** 2)
    sig = wavetrace.smoothed_trace(spec, cutoff, sigma, tmax)
    peaks = wavetrace.detect_singularities(sig, cfg.get("threshold", 5.0))
    tori = []
    if profile is not None:
        ls = actions.length_spectrum(profile, cfg.get("qmax", 5), tmax)
        tori = ls.tori
        if ls.degenerate:
            # every geodesic is closed with length 2L: match the iterates
            k = np.arange(1, int(tmax / (2 * profile.L)) + 1)
            tori = [actions.PeriodicTorus(0.0, (0, int(j)), float(2 * j * profile.L), True, "closed")
                    for j in k]
    report = []
    for t in peaks:
        near = min(tori, key=lambda T: abs(T.length - t), default=None)
        hit = near is not None and abs(near.length - t) <= 0.05
        report.append({"t": t, "amplitude": wavetrace.peak_amplitude(sig, t, 0.005),
                       "matched_length": near.length if hit else None,
                       "winding": list(near.winding) if hit else None})
    if cfg.out:
        Path(cfg.out).write_text(sig.to_csv())
    sys.stdout.write(_dump(report))
    return EXIT_OK


def cmd_reconstruct(cfg: RunConfig) -> int:
    data = _load_spectral(cfg.inputs[0])
    family = cfg.get("family")
    if family:
        res = inverse.reconstruct_fit(data, int(family))
    else:
        res = inverse.reconstruct(data)
    out = res.to_json()
    out["profile"] = profile_to_json(res.profile)
    _emit(_dump(out), cfg.out)
    return EXIT_OK


def cmd_roundtrip(cfg: RunConfig) -> int:
    p = load_profile(cfg.inputs[0])
    tol = cfg.get("tol", 1e-2)
    spec = quantization.spectrum(p, cfg.get("lambda_max", ROUNDTRIP_LAMBDA))
    res = inverse.reconstruct(spec, truth=p)
    dist = isometry_distance(p, res.profile)
    ok = bool(dist <= tol)
    report = {"profile": p.name, "isometry_distance": dist, "tol": tol, "pass": ok,
              "entries": len(spec), "residuals": inverse._jsonable(res.residuals)}
    _emit(_dump(report), cfg.out)
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {
    "preset": cmd_preset,
    "spectrum": cmd_spectrum,
    "oracle": cmd_oracle,
    "actions": cmd_actions,
    "lengths": cmd_lengths,
    "trace": cmd_trace,
    "reconstruct": cmd_reconstruct,
    "roundtrip": cmd_roundtrip,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="revspec", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, help_, *positional):
        sp = sub.add_parser(name, help=help_)
        for pos, h in positional:
            sp.add_argument(pos, help=h)
        sp.add_argument("--out", help="output file (default: stdout)")
        sp.add_argument("--seed", type=int, default=0)
        return sp

    prof = ("profile", "preset name or profile JSON")
    s = add("preset", "write a preset profile", ("name", "preset name"))
    s.add_argument("--nodes", type=int)
    s = add("spectrum", "semiclassical joint spectrum", prof)
    s.add_argument("--lambda-max", type=float, dest="lambda_max")
    s = add("oracle", "brute-force Laplace eigenvalues", prof, ("n", "angular range A:B"))
    s.add_argument("--count", type=int)
    s = add("actions", "action chart CSV", prof)
    s.add_argument("--nodes", type=int)
    s = add("lengths", "length spectrum CSV", prof)
    s.add_argument("--qmax", type=int)
    s.add_argument("--lmax", type=float)
    s = add("trace", "smoothed wave trace", ("source", "spectrum CSV, profile JSON or preset"))
    s.add_argument("--cutoff", type=float)
    s.add_argument("--sigma", type=float)
    s.add_argument("--tmax", type=float)
    s.add_argument("--threshold", type=float)
    s.add_argument("--qmax", type=int)
    s = add("reconstruct", "profile from a spectrum CSV or normal form JSON", ("data", "input file"))
    s.add_argument("--family", type=int, help="fit 1 + c1 x + ... + cd x^d instead")
    s = add("roundtrip", "profile -> spectrum -> reconstruction -> distance", prof)
    s.add_argument("--lambda-max", type=float, dest="lambda_max")
    s.add_argument("--tol", type=float)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    ap = build_parser()
    try:
        ns = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_INPUT
    args = vars(ns)
    command = args.pop("command")
    out, seed = args.pop("out"), args.pop("seed")
    inputs = [args.pop(k) for k in ("name", "profile", "n", "source", "data") if k in args]
    try:
        cfg = RunConfig(command, inputs, out, args, seed)
        np.random.seed(seed)
        return COMMANDS[command](cfg)
    except InputError as exc:
        sys.stderr.write(f"revspec: input error: {exc}\n")
        return EXIT_INPUT
    except (NumericError, FloatingPointError, np.linalg.LinAlgError) as exc:
        sys.stderr.write(f"revspec: numeric failure: {exc}\n")
        return EXIT_NUMERIC
    except OSError as exc:
        sys.stderr.write(f"revspec: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
