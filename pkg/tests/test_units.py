"""Duration and float formatting."""
import math

import pytest

from emac.units import (EXPR_UNITS, fmt_float, format_duration,
                        parse_duration, round_float)


def test_parse_millisecond_literal():
    assert parse_duration("200ms") == (200, True)


def test_parse_fractional_second_is_exact():
    assert parse_duration("1.5s") == (1500, True)


def test_parse_fractional_millisecond_rounds_and_flags():
    ms, exact = parse_duration("0.4ms")
    assert ms == 0 and not exact
    ms, exact = parse_duration("2.5ms")
    assert ms == 2 and not exact  # half-even


def test_expression_units_reject_windows():
    with pytest.raises(ValueError):
        parse_duration("5m", EXPR_UNITS)


def test_window_units():
    assert parse_duration("1h") == (3_600_000, True)
    assert parse_duration("5m") == (300_000, True)
    assert parse_duration("3d") == (259_200_000, True)


def test_format_duration_largest_exact_unit():
    assert format_duration(3_600_000) == "1h"
    assert format_duration(300_000) == "5m"
    assert format_duration(259_200_000) == "3d"
    assert format_duration(21_600_000) == "6h"
    assert format_duration(1_800_000) == "30m"
    assert format_duration(1500) == "1500ms"
    assert format_duration(2000) == "2s"


def test_format_duration_rejects_nonpositive():
    with pytest.raises(ValueError):
        format_duration(0)


def test_fmt_float_integral_values_have_no_decimal_point():
    assert fmt_float(560.0) == "560"
    assert fmt_float(400.0) == "400"
    assert fmt_float(0.0) == "0"


def test_fmt_float_twelve_significant_digits():
    assert fmt_float(0.9992950599) == "0.9992950599"
    assert fmt_float(1 / 3) == "0.333333333333"
    assert round_float(0.123456789012345) == 0.123456789012


def test_fmt_float_rejects_non_finite():
    for bad in (math.nan, math.inf, -math.inf):
        with pytest.raises(ValueError):
            fmt_float(bad)


def test_round_float_is_idempotent():
    for x in (0.1, 1 / 7, 123456.789, 1e-9):
        assert round_float(round_float(x)) == round_float(x)
