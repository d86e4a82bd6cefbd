import pytest
import torch

from rearm.graphs import HomographConfig
from rearm.training import HyperParams

from helpers import micro_instance

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def micro():
    return micro_instance()


@pytest.fixture()
def micro_hp():
    # seed 47 keeps every PReLU pre-activation >= ~1e-3 away from zero on
    # this instance, so central finite differences stay valid at eps 1e-4
    return HyperParams(d=8, batch_size=16, learning_rate=1e-3, layers=1,
                       meta_rank=2, dropout=0.1, epochs_max=3, patience=5,
                       eval_topk=(3, 5), seed=47,
                       hom=HomographConfig(top_k_co=3, top_k_sem=3, layers=1))


def record_acceptance(config, line: str) -> None:
    """Collect one pass/fail line per acceptance check for the summary."""
    lines = getattr(config, "_acceptance_lines", None)
    if lines is None:
        lines = []
        config._acceptance_lines = lines
    lines.append(line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.write_sep("-", "acceptance results")
        for line in lines:
            terminalreporter.write_line(line)
