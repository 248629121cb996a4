import pytest

from afrisk.impute import impute_cohort
from afrisk.synthgen import default_generator_spec, generate_cohort


@pytest.fixture(scope="session")
def default_raw():
    return generate_cohort(default_generator_spec(seed=0))


@pytest.fixture(scope="session")
def default_imputed(default_raw):
    return impute_cohort(default_raw)


# one line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, text = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {key}: {text}")
