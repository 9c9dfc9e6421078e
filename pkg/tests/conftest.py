from __future__ import annotations

import pytest

from editsearch.simworld import Lcg, SimActorParams, gen_task, hash64
from editsearch.topology import create_root


@pytest.fixture
def sim_image():
    from editsearch.simworld import SimImage

    return SimImage.make({f"a{i}": "v0" for i in range(8)})


@pytest.fixture
def root_topology(sim_image):
    return create_root(sim_image.to_ref(), "set a0=v1; set a1=v2")


def make_task(complexity: int, seed: int = 0):
    return gen_task(complexity, Lcg(hash64("test-task", seed)))


def make_params(**kw) -> SimActorParams:
    base = dict(p=0.85, q=0.05, k=4, seed=0, persistence=0.85)
    base.update(kw)
    return SimActorParams(**base)
