import numpy as np
import pytest

from wheelgen.backends import PatternStubBackend, ZeroNoiseBackend
from wheelgen.core import ConceptGroup, GenerationRequest, InspirationImage, SymmetryConfig
from wheelgen.pipeline import BackendRegistry, linear_schedule

CANVAS = 64


@pytest.fixture(scope="session")
def schedule():
    return linear_schedule(200)


@pytest.fixture(scope="session")
def zero_backend():
    return ZeroNoiseBackend(CANVAS)


@pytest.fixture(scope="session")
def pattern_backend(schedule):
    return PatternStubBackend(schedule, CANVAS)


@pytest.fixture()
def registry(schedule):
    reg = BackendRegistry()
    reg.register(ZeroNoiseBackend(CANVAS))
    reg.register(PatternStubBackend(schedule, CANVAS))
    return reg


def make_image(seed: int, size: int = CANVAS) -> np.ndarray:
    return np.random.default_rng(seed).random((size, size))


def make_request(seed: int = 42, **kw) -> GenerationRequest:
    defaults = dict(
        concepts=(
            ConceptGroup(
                "dynamic",
                inspirations=(
                    InspirationImage(image=make_image(1), weight=0.8, id="insp-a"),
                    InspirationImage(image=make_image(2), weight=0.5, id="insp-b"),
                ),
            ),
            ConceptGroup("bold"),
        ),
        symmetry=SymmetryConfig(k=4),
        output_count=1,
        seed=seed,
        backend_id="stub-pattern",
    )
    defaults.update(kw)
    return GenerationRequest(**defaults)
