import math
from fractions import Fraction

import numpy as np
import pytest

from meanpoint.geometry import Universe
from meanpoint.privacy import (Accountant, BudgetExceededError, PrivacyBudget,
                               as_fraction, compose, gaussian_noise_spec,
                               gaussian_sigma_for_zcdp, mean_sensitivity,
                               split_budget, zcdp_to_approx_dp)


class TestBudgets:
    def test_decimal_fraction_parsing(self):
        assert as_fraction(0.1) == Fraction(1, 10)
        assert as_fraction(3) == Fraction(3)
        assert as_fraction(Fraction(2, 7)) == Fraction(2, 7)

    def test_validation(self):
        with pytest.raises(ValueError):
            PrivacyBudget.zcdp(-0.1)
        with pytest.raises(ValueError):
            PrivacyBudget.approx_dp(0.1, 1.0)

    def test_json_round_trip(self):
        for b in (PrivacyBudget.zcdp(0.25), PrivacyBudget.pure_dp(1.5),
                  PrivacyBudget.approx_dp(0.3, 1e-6)):
            assert PrivacyBudget.from_json(b.to_json()) == b

    def test_json_kinds_match_wire_format(self):
        assert PrivacyBudget.zcdp(1.0).to_json() == {"kind": "zcdp", "rho": 1.0}
        assert PrivacyBudget.pure_dp(2.0).to_json() == \
            {"kind": "ldp", "epsilon": 2.0, "delta": 0.0}


class TestCompose:
    def test_zcdp_sum_is_exact(self):
        got = compose([PrivacyBudget.zcdp(0.3), PrivacyBudget.zcdp(0.7)])
        assert got == PrivacyBudget.zcdp(1.0)

    def test_zero_is_identity(self):
        b = PrivacyBudget.zcdp(0.42)
        assert compose([b, PrivacyBudget.zcdp(0)]) == b
        p = PrivacyBudget.pure_dp(0.42)
        assert compose([p, PrivacyBudget.pure_dp(0)]) == p

    def test_pure_with_approx(self):
        got = compose([PrivacyBudget.pure_dp(0.1),
                       PrivacyBudget.approx_dp(0.2, 1e-6)])
        assert got == PrivacyBudget.approx_dp(0.3, 1e-6)

    def test_mixed_families_rejected(self):
        with pytest.raises(ValueError):
            compose([PrivacyBudget.zcdp(0.1), PrivacyBudget.pure_dp(0.1)])

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            compose([])

    def test_associative_and_commutative(self):
        a, b, c = (PrivacyBudget.zcdp(x) for x in (0.1, 0.2, 0.3))
        assert compose([compose([a, b]), c]) == compose([a, compose([b, c])])
        assert compose([a, b, c]) == compose([c, b, a])

    def test_split_recomposes_exactly(self):
        for total, k in ((1.0, 7), (0.1, 3), (2.5, 11)):
            parts = split_budget(as_fraction(total), k)
            assert sum(parts) == as_fraction(total)
            assert len(set(parts)) == 1


class TestCalibration:
    def test_sigma_formula(self):
        assert gaussian_sigma_for_zcdp(1.0, 0.5) == pytest.approx(1.0)
        assert gaussian_sigma_for_zcdp(0.0, 1.0) == 0.0
        assert gaussian_sigma_for_zcdp(2.0, 2.0) == pytest.approx(1.0)

    def test_sigma_scales_linearly_in_sensitivity(self):
        assert gaussian_sigma_for_zcdp(3.0, 0.7) == \
            pytest.approx(3.0 * gaussian_sigma_for_zcdp(1.0, 0.7))

    def test_sigma_scales_inverse_sqrt_rho(self):
        # power-of-4 rescaling halves sigma exactly in floats
        assert gaussian_sigma_for_zcdp(1.0, 4 * 0.3) == \
            gaussian_sigma_for_zcdp(1.0, 0.3) / 2.0

    def test_invalid_args(self):
        with pytest.raises(ValueError):
            gaussian_sigma_for_zcdp(1.0, 0.0)
        with pytest.raises(ValueError):
            gaussian_sigma_for_zcdp(-1.0, 1.0)

    def test_noise_spec_invariant(self):
        spec = gaussian_noise_spec(0.8, 0.2)
        assert spec.sigma == pytest.approx(
            spec.sensitivity / math.sqrt(2 * 0.2))
        assert spec.budget == PrivacyBudget.zcdp(0.2)


class TestMeanSensitivity:
    def test_singleton(self):
        assert mean_sensitivity(Universe(points=np.array([[0.3, 0.4]])), 5) == 0.0

    def test_two_point_diagonal(self):
        u = Universe(points=np.array([[0.0, 0.0], [1.0, 1.0]]))
        assert mean_sensitivity(u, 1) == pytest.approx(math.sqrt(2.0))
        assert mean_sensitivity(u, 10) == pytest.approx(math.sqrt(2.0) / 10)

    def test_empty_dataset_rejected(self):
        u = Universe(points=np.array([[0.0]]))
        with pytest.raises(ValueError):
            mean_sensitivity(u, 0)


class TestConversion:
    def test_zero_rho(self):
        assert zcdp_to_approx_dp(0.0, 0.1) == 0.0

    def test_closed_form_values(self):
        assert zcdp_to_approx_dp(1.0, math.exp(-1.0)) == pytest.approx(3.0)
        assert zcdp_to_approx_dp(0.5, math.exp(-2.0)) == pytest.approx(2.5)

    def test_monotone_in_rho_and_delta(self):
        assert zcdp_to_approx_dp(2.0, 1e-6) > zcdp_to_approx_dp(1.0, 1e-6)
        assert zcdp_to_approx_dp(1.0, 1e-9) > zcdp_to_approx_dp(1.0, 1e-3)

    def test_delta_range(self):
        with pytest.raises(ValueError):
            zcdp_to_approx_dp(1.0, 0.0)
        with pytest.raises(ValueError):
            zcdp_to_approx_dp(1.0, 1.0)


class TestAccountant:
    def test_refuses_overrun(self):
        acct = Accountant(PrivacyBudget.zcdp(1.0))
        acct.charge(PrivacyBudget.zcdp(0.6))
        with pytest.raises(BudgetExceededError):
            acct.charge(PrivacyBudget.zcdp(0.5))
        # the failed charge must not be recorded
        assert acct.consumed == PrivacyBudget.zcdp(0.6)

    def test_exact_fill_is_allowed(self):
        acct = Accountant(PrivacyBudget.zcdp(1.0))
        for part in split_budget(as_fraction(1.0), 7):
            acct.charge(PrivacyBudget.zcdp(part))
        assert acct.consumed == PrivacyBudget.zcdp(1.0)

    def test_family_mismatch(self):
        acct = Accountant(PrivacyBudget.zcdp(1.0))
        with pytest.raises(BudgetExceededError):
            acct.charge(PrivacyBudget.pure_dp(0.1))
