from __future__ import annotations

import functools

import pytest

from hamflow import catalog

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@functools.lru_cache(maxsize=None)
def family(name: str):
    return catalog.build(name)


@pytest.fixture(scope="session")
def pt():
    return family("poschl_teller")


@pytest.fixture(scope="session")
def pt_deep():
    return family("poschl_teller_deep")


@pytest.fixture(scope="session")
def constant():
    return family("constant_hyperbolic")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
