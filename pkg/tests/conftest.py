import pytest

from mosreg.synth import procedural_texture


@pytest.fixture(scope="session")
def ref_texture():
    """Reference texture large enough for all path presets."""
    return procedural_texture(1024, 1024, seed=11)


@pytest.fixture(scope="session")
def small_texture():
    return procedural_texture(512, 512, seed=23)
