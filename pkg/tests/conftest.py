import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from hfd.domain import enumerate_s1
from hfd.presentation import Config, build_presentation
from hfd.ring import make_ctx

_cache = {}


def ctx_s1(k):
    if ("s1", k) not in _cache:
        ctx = make_ctx(k)
        _cache[("s1", k)] = (ctx, enumerate_s1(ctx))
    return _cache[("s1", k)]


def presentation(k):
    """Presentation for k, built once per session; returns (presentation, seconds)."""
    if ("pres", k) not in _cache:
        ctx, S1 = ctx_s1(k)
        t = time.perf_counter()
        pres = build_presentation(ctx, Config(), S1)
        _cache[("pres", k)] = (pres, time.perf_counter() - t)
    return _cache[("pres", k)]


@pytest.fixture(scope="session")
def k5():
    return ctx_s1(5)


@pytest.fixture(scope="session")
def k2():
    return ctx_s1(2)


@pytest.fixture(scope="session")
def pres5():
    return presentation(5)[0]


@pytest.fixture(scope="session")
def pres2():
    return presentation(2)[0]
