import numpy as np
import pytest

from swingbench.excitation import ExcitationConfig, generate_training_run
from swingbench.identifier import IdentifierConfig, build_dataset, train_identifier
from swingbench.sim import PlantConfig


@pytest.fixture(scope="session")
def plant():
    return PlantConfig()


@pytest.fixture(scope="session")
def excitation_run(plant):
    return generate_training_run(plant, ExcitationConfig())


@pytest.fixture(scope="session")
def trained_ni(excitation_run):
    """Identifier trained with every default on the default multisine run."""
    cfg = IdentifierConfig()
    data = build_dataset(excitation_run, cfg)
    net, report = train_identifier(data, cfg)
    return net, report, data


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


_VERDICTS: list[str] = []


@pytest.fixture
def verdict():
    """Record one acceptance line; the caller still asserts."""

    def record(number: int, ok: bool, text: str) -> bool:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {text}"
        _VERDICTS.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance")
        for line in sorted(_VERDICTS):
            terminalreporter.write_line(line)
