import pytest

from magion import dataset


@pytest.fixture(scope="session")
def s1():
    return dataset.shipped_library("sample1-A")


@pytest.fixture(scope="session")
def s2():
    return dataset.shipped_library("sample2-A")


@pytest.fixture(scope="session")
def s1b():
    return dataset.shipped_library("sample1-B")


# criterion number -> list of (part, passed, detail)
_ACCEPTANCE: dict[int, list] = {}

CRITERIA = {
    1: "CRP counts exact",
    2: "closed-form BER reproduces the published CRP table",
    3: "pFHD_inter reproduces the published CRP table",
    4: "entropy, sequence counts and lock time",
    5: "recorded inference replay",
    6: "Monte-Carlo agrees with analytic oracles",
    7: "property suite",
    8: "inference accuracy",
}


@pytest.fixture
def criterion():
    def record(number: int, part: str, passed: bool, detail: str = "") -> bool:
        _ACCEPTANCE.setdefault(number, []).append((part, bool(passed), detail))
        print(f"{'PASS' if passed else 'FAIL'}  criterion {number} [{part}] {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for number, title in CRITERIA.items():
        parts = _ACCEPTANCE.get(number)
        if parts is None:
            tr.write_line(f"SKIP  {number}. {title} (not run)")
            continue
        ok = all(p for _, p, _ in parts)
        tr.write_line(f"{'PASS' if ok else 'FAIL'}  {number}. {title}")
        for part, passed, detail in parts:
            tr.write_line(f"        {'ok ' if passed else 'BAD'} {part}: {detail}")
