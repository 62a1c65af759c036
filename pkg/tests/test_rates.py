"""Tests for the exact rate table."""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from relulab.rates import (
    RATE_KINDS,
    compare_slopes,
    exponent_table,
    exponent_table_to_csv,
    predicted_exponent,
)


class TestExactValues:
    def test_line_values(self):
        assert predicted_exponent(1, "mse_upper") == Fraction(4, 11)
        assert predicted_exponent(1, "mse_lower") == Fraction(1, 2)
        assert predicted_exponent(1, "gen_gap_upper") == Fraction(1, 4)
        assert predicted_exponent(1, "gen_gap_lower") == Fraction(1, 1)
        assert predicted_exponent(1, "wd_reference") == Fraction(1, 4)

    def test_d5_values(self):
        assert predicted_exponent(5, "mse_upper") == Fraction(8, 83)
        assert predicted_exponent(5, "mse_lower") == Fraction(1, 3)
        assert predicted_exponent(5, "gen_gap_upper") == Fraction(1, 12)
        assert predicted_exponent(5, "gen_gap_lower") == Fraction(1, 3)

    def test_results_are_exact_rationals(self):
        for d in range(1, 11):
            for kind in RATE_KINDS:
                value = predicted_exponent(d, kind)
                assert isinstance(value, Fraction)
                assert value > 0

    def test_validation(self):
        with pytest.raises(ValueError, match="dimension"):
            predicted_exponent(0, "mse_upper")
        with pytest.raises(ValueError, match="kind"):
            predicted_exponent(2, "nope")


class TestMonotonicity:
    @given(st.integers(min_value=1, max_value=200))
    def test_rates_shrink_with_dimension(self, d):
        # Every family decays more slowly as d grows; the only wrinkle is
        # the d = 1 special case of the minimax floor, which sits BELOW the
        # d = 2 value instead of above it.
        for kind in ("gen_gap_upper", "gen_gap_lower", "mse_upper"):
            assert predicted_exponent(d + 1, kind) < predicted_exponent(d, kind)
        assert predicted_exponent(d, "wd_reference") == Fraction(1, 4)

    def test_mse_lower_line_exception(self):
        assert predicted_exponent(1, "mse_lower") < predicted_exponent(2, "mse_lower")
        for d in range(2, 50):
            assert predicted_exponent(d + 1, "mse_lower") < predicted_exponent(
                d, "mse_lower"
            )

    def test_upper_rate_never_beats_lower_rate(self):
        for d in range(1, 30):
            assert predicted_exponent(d, "mse_upper") <= predicted_exponent(d, "mse_lower")
            assert predicted_exponent(d, "gen_gap_upper") <= predicted_exponent(
                d, "gen_gap_lower"
            )


class TestComparison:
    def test_gap_sign_convention(self):
        comp = compare_slopes(-0.40, 1, "mse_upper")
        assert comp.gap == pytest.approx(-0.40 + 4 / 11)
        assert comp.predicted_exponent == Fraction(4, 11)
        exact = compare_slopes(-0.5, 1, "mse_lower")
        assert exact.gap == 0.0


class TestTable:
    def test_rows_cover_requested_dimensions(self):
        rows = exponent_table(range(1, 11))
        assert [row["d"] for row in rows] == list(range(1, 11))
        assert rows[0]["mse_upper"] == Fraction(4, 11)
        assert all(set(RATE_KINDS) <= set(row) for row in rows)

    def test_csv_uses_fraction_strings(self, tmp_path):
        path = tmp_path / "rates.csv"
        exponent_table_to_csv(path, range(1, 4))
        rows = path.read_text().splitlines()
        assert rows[0] == "d," + ",".join(RATE_KINDS)
        assert rows[1].startswith("1,1/4,1,4/11,1/2,1/4")
        assert len(rows) == 4
