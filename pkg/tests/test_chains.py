import pytest
from hypothesis import given, strategies as st

from conditions.chains import quarter_pinch_chain, quarter_pinch_lower_bound

unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)
curvature = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)


@given(unit, unit, curvature, curvature)
def test_chain_sides_agree(lam, mu, k_min, k_max):
    lhs, rhs = quarter_pinch_chain(lam, mu, k_min, k_max)
    assert lhs == pytest.approx(rhs, abs=1e-12 * (1.0 + abs(k_min) + abs(k_max)))


@given(st.floats(min_value=0.01, max_value=5.0), st.floats(min_value=1.0, max_value=3.99))
def test_strict_quarter_pinching_gives_positive_bound(k_min, ratio):
    assert quarter_pinch_lower_bound(k_min, ratio * k_min) > 0.0


def test_exact_quarter_pinching_reaches_zero():
    # at lam = mu = 1 the bound is (4/3)(4 K_min - K_max)
    assert quarter_pinch_lower_bound(1.0, 4.0) == pytest.approx(0.0, abs=1e-15)
    assert quarter_pinch_chain(1.0, 1.0, 1.0, 5.0)[1] == pytest.approx(-4.0 / 3.0)


def test_lower_bound_is_the_grid_minimum():
    grid = 5
    pointwise = min(quarter_pinch_chain(a / (grid - 1), b / (grid - 1), 1.0, 3.5)[1]
                    for a in range(grid) for b in range(grid))
    assert quarter_pinch_lower_bound(1.0, 3.5, grid=grid) == pytest.approx(pointwise, abs=1e-15)
