import numpy as np
import pytest
from hypothesis import settings

from s3crunch.evolution import EvolutionConfig, PerturbationSpec, evolve, make_initial_data
from s3crunch.flrw import solve_scale_factor
from s3crunch.frame import FrameGeometry

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

# one line per acceptance criterion, printed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def bg():
    return solve_scale_factor()


@pytest.fixture(scope="session")
def hom():
    return FrameGeometry()


@pytest.fixture(scope="session")
def crunch_run(bg, hom):
    """Perturbed homogeneous run (diagonal amplitude 1e-2) deep into the crunch."""
    spec = PerturbationSpec(amplitude=1e-2)
    cfg = EvolutionConfig(a_stop=1e-5, perturbation=spec)
    return evolve(cfg, bg, hom, make_initial_data(spec, bg, hom))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
