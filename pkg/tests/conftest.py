import pytest

from emocontagion.ingest import EmbeddingStore, ProfileTable
from emocontagion.similarity import SimilarityProviders

from helpers import profile


@pytest.fixture
def identical_providers():
    """Two users with the same profile (similarity 1) and no content."""
    table = ProfileTable()
    for u in ("c", "n1", "n2", "n3", "B", "D"):
        table[u] = profile(u)
    return SimilarityProviders(table, EmbeddingStore())


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def acceptance(capsys):
    def record(n: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[n] = (bool(ok), detail)
        with capsys.disabled():
            print(f"\ncriterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")

    return record
