"""The acceptance gate: every release criterion at its stated tolerance.

Each test runs one criterion at full resolution and prints its pass/fail
row; the suite is the exit condition for the build.
"""

import pytest

from fracseg import acceptance


def _run(check):
    result = check(quick=False)
    print(result.row())
    assert result.passed, result.row()


def test_criterion_01_gamma_landmarks():
    _run(acceptance.check_gamma_landmarks)


def test_criterion_02_dtn_symbol():
    _run(acceptance.check_dtn_symbol)


def test_criterion_03_hemisphere_eigenvalues():
    _run(acceptance.check_hemisphere_landmarks)


def test_criterion_04_nu_acf_scan():
    _run(acceptance.check_nu_acf_scan)


def test_criterion_05_almgren_suite():
    _run(acceptance.check_almgren)


def test_criterion_06_acf_monotonicity():
    _run(acceptance.check_acf_monotonicity)


def test_criterion_07_pohozaev_residual():
    _run(acceptance.check_pohozaev)


def test_criterion_08_decay_bound():
    _run(acceptance.check_decay_bound)


def test_criterion_09_comparison_estimate():
    _run(acceptance.check_comparison_estimate)


@pytest.mark.slow
def test_criterion_10_beta_sweep_segregation():
    _run(acceptance.check_beta_sweep)


def test_criterion_11_oracle_consistency():
    _run(acceptance.check_oracle_consistency)
