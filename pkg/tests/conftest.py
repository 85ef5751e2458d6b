import numpy as np
import pytest

from evovoter import ModelParams, run, spawn_rng


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def quick_run(n=200, L=8.0, nu=1.0, seed=0, replica=0, keep_graph=False, **kw):
    kw.setdefault("max_updates", 200_000)
    kw.setdefault("stride", n)
    params = ModelParams(n=n, L=L, nu=nu, **kw)
    return run(params, rng=spawn_rng(seed, replica), keep_graph=keep_graph)


@pytest.fixture
def short_result():
    return quick_run()
