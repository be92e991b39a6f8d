import pytest

from uavmrta.grid import mission_cost_tensor
from uavmrta.scenarios import load_replica


@pytest.fixture(scope="session")
def replica():
    return load_replica()


@pytest.fixture(scope="session")
def replica_tensor(replica):
    return mission_cost_tensor(replica)


# MinSum optimum of the replica scenario: r3 flies 1-2-7-8-10-5-4-1, r4 flies 1-6-3-10-9-2-1
REPLICA_MINSUM_ROUTES = {
    3: [(2, 3), (7, 3), (8, 2), (8, 3), (10, 2), (5, 2), (4, 2), (4, 3)],
    4: [(6, 1), (6, 4), (3, 4), (3, 1), (10, 4), (9, 1), (2, 1)],
}


@pytest.fixture(scope="session")
def replica_minsum_solution():
    from uavmrta.allocation import AllocationSolution, Gene
    return AllocationSolution(tuple(Gene(s, m, r) for r, genes in REPLICA_MINSUM_ROUTES.items() for s, m in genes))


_ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion(capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        with capsys.disabled():
            print("\n" + line)
        return ok
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
