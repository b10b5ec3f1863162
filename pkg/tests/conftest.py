import pytest

from ppi_jump.market import ConstantJump, KouJump, MarketParams, MertonJump

DELTA1 = 0.6

# parameter sets of the three worked examples
CONSTANT = (MarketParams.from_excess(0.20, 0.30, r=0.035), ConstantJump(gamma_tilde=-0.03, lam=11.0))
KOU = (MarketParams.from_excess(0.24, 0.26, r=0.035), KouJump(lam=20.0, p=0.72, eta_plus=64.94, eta_minus=49.02))
MERTON = (MarketParams.from_excess(0.09, 0.35, r=0.035), MertonJump(lam=20.0, mu_j=-0.01, sigma_j=0.15))
# Kou with the branch probabilities swapped; this one has a root in [0, 1]
KOU_SOLVABLE = (KOU[0], KouJump(lam=20.0, p=0.28, eta_plus=64.94, eta_minus=49.02))

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(params=["constant", "kou_solvable", "merton"])
def solvable_model(request):
    return {"constant": CONSTANT, "kou_solvable": KOU_SOLVABLE, "merton": MERTON}[request.param]


@pytest.fixture(params=["constant", "kou", "kou_solvable", "merton"])
def any_model(request):
    return {"constant": CONSTANT, "kou": KOU, "kou_solvable": KOU_SOLVABLE, "merton": MERTON}[request.param]


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
