"""Shared fixtures: preset surfaces and their normal forms are built once."""

from __future__ import annotations

import functools

import numpy as np
import pytest
from hypothesis import settings

from revspec.profile import preset
from revspec.quantization import NormalForm, spectrum

settings.register_profile("revspec", max_examples=30, deadline=None)
settings.load_profile("revspec")

PRESET_NAMES = ("sphere", "mirror", "asym", "spheroid(0.8)")


@functools.lru_cache(maxsize=None)
def cached_preset(name: str):
    return preset(name)


@functools.lru_cache(maxsize=None)
def cached_normal_form(name: str) -> NormalForm:
    return NormalForm.from_profile(cached_preset(name))


@functools.lru_cache(maxsize=None)
def cached_spectrum(name: str, lambda_max: float):
    return spectrum(cached_preset(name), lambda_max)


@pytest.fixture(scope="session")
def sphere():
    return cached_preset("sphere")


@pytest.fixture(scope="session")
def mirror():
    return cached_preset("mirror")


@pytest.fixture(scope="session")
def asym():
    return cached_preset("asym")


@pytest.fixture(scope="session")
def spheroid():
    return cached_preset("spheroid(0.8)")


@pytest.fixture(scope="session", params=PRESET_NAMES)
def any_preset(request):
    return cached_preset(request.param)


@pytest.fixture(scope="session")
def nf_of():
    return cached_normal_form


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
