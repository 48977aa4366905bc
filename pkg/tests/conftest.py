import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_TANGLES = {}


@pytest.fixture(scope="session")
def tangle():
    """Heteroclinic tangles at energy 2.5, computed once per eta and shared across modules."""
    from hamiltonia.model import ModelParams, heteroclinic_tangle

    def get(eta):
        if eta not in _TANGLES:
            _TANGLES[eta] = heteroclinic_tangle(ModelParams(2, eta, 2.5))
        return _TANGLES[eta]

    return get


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" in props and rep.when == "call":
                lines.append((str(props["criterion"]), "PASS" if outcome == "passed" else "FAIL", props["detail"]))
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for crit, verdict, detail in sorted(lines, key=lambda x: (int(x[0].split()[0]), x[0])):
        terminalreporter.write_line(f"criterion {crit}: {verdict}  {detail}")
