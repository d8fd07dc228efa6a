from __future__ import annotations

from importlib import resources

import pytest

from benchassign.catalog_io import Catalog, parse_catalog

FIXTURE_NAMES = (
    "cut_in_example",
    "cut_in_single_track_only",
    "hil_bench",
    "sil_bench",
    "test_vehicle",
)


def fixture_text(name: str) -> str:
    return resources.files("benchassign.fixtures").joinpath(f"{name}.catalog.json").read_text("utf-8")


def load_catalog(name: str) -> Catalog:
    return parse_catalog(fixture_text(name))


@pytest.fixture(scope="session")
def example() -> Catalog:
    return load_catalog("cut_in_example")


@pytest.fixture(scope="session")
def single_track_only() -> Catalog:
    return load_catalog("cut_in_single_track_only")


@pytest.fixture(scope="session")
def hil(example):
    return example.bench("HiL")


@pytest.fixture(scope="session")
def tv(example):
    return example.bench("TV")


@pytest.fixture(scope="session")
def sil(example):
    return example.bench("SiL")


# ---------------------------------------------------------------------------
# Acceptance summary
# ---------------------------------------------------------------------------

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[n]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} criterion {n}: {detail}")
