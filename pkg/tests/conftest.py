import numpy as np
import pytest

from beliefbargain import (AgentSpec, DynamicsConfig, ExponentialUtility, MarketSpec,
                           PenaltyConfig, Side, Variant)

X0 = np.array([0.25, 0.75, 0.75, 0.25])


@pytest.fixture
def market():
    return MarketSpec([1.0, 2.0])


@pytest.fixture
def seller():
    return AgentSpec(Side.SELLER, 0.0, 0.4, ExponentialUtility(2.0))


@pytest.fixture
def buyer():
    return AgentSpec(Side.BUYER, 0.0, 0.3, ExponentialUtility(1.0))


@pytest.fixture
def agents(seller, buyer):
    return seller, buyer


@pytest.fixture
def x0():
    return X0.copy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def dyn_cfg(lam=0.4, eps=0.1, alpha=0.05, variant=Variant.LAMBDA_DEPENDENT, **kw):
    return DynamicsConfig(alpha=alpha, penalty=PenaltyConfig(eps, lam, variant), **kw)


def tangent(rng, k):
    d = rng.standard_normal(k)
    d -= d.mean()
    return d / np.linalg.norm(d)
