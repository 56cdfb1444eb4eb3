from pathlib import Path

import pytest

from cyclicprob.model import make_plcg, parse_cfg, parse_markov_chain, parse_pcfg, parse_plan_model

MODELS = Path(__file__).resolve().parent.parent / "models"

G0_TEXT = "s -> s s : 0.4\ns -> a : 0.3\ns -> b : 0.3\n"
CHAIN_TEXT = "trans s0 s0 0.5\ntrans s0 s3 0.3\ntrans s0 s4 0.2\n"


@pytest.fixture
def g0():
    return parse_pcfg(G0_TEXT)


@pytest.fixture
def g0_plcg():
    return make_plcg(parse_cfg(G0_TEXT))


@pytest.fixture
def chain():
    return parse_markov_chain(CHAIN_TEXT)


@pytest.fixture
def plan_model():
    return parse_plan_model((MODELS / "plan.pcfg").read_text())


@pytest.fixture
def models_dir():
    return MODELS


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
