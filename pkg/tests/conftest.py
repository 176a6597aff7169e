from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from largedam import BatchDistribution, DamModel, Exponential  # noqa: E402

ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture
def configs() -> Path:
    return ROOT / "configs"


def mm_model(lam=0.5, mu1=1.0, mu2=2.0, L=3, batch=(1.0,), **kw) -> DamModel:
    return DamModel(lam, BatchDistribution(batch), Exponential(mu1), Exponential(mu2), L, **kw)
