import numpy as np
import pytest

from bridgesim import convex_approx, derive_rng
from bridgesim.layerseq import sandwich_residuals
from bridgesim.verify import random_nondecelerating


def test_zero_table():
    fn = convex_approx([0.0, 0.0, 0.0, 0.0])
    assert fn.integral(0, 4) == 0.0
    assert fn.value(2.0) == 0.0


def test_linear_table_total_integral():
    fn = convex_approx([0, 1, 2, 3])
    assert fn.integral(0, 4) == pytest.approx(6.0, abs=1e-9)
    assert sandwich_residuals(fn, [0, 1, 2, 3]) <= 1e-9


def test_kinked_table():
    f = [0, 0, 1, 3]
    fn = convex_approx(f)
    assert fn.integral(0, 4) == pytest.approx(4.0, abs=1e-9)
    assert sandwich_residuals(fn, f) <= 1e-9


def test_rejects_non_nondecelerating():
    with pytest.raises(ValueError):
        convex_approx([0, 2, 3])  # differences decrease
    with pytest.raises(ValueError):
        convex_approx([1, 2, 3])  # does not start at zero


def test_output_is_convex_and_nonnegative():
    rng = derive_rng(51)
    for _ in range(30):
        h = int(rng.integers(2, 40))
        f = random_nondecelerating(h, rng)
        fn = convex_approx(f)
        assert fn.nonneg
        slopes = [seg[2].slope for seg in fn.segments(0.0, float(h))]
        assert all(s2 >= s1 - 1e-12 for s1, s2 in zip(slopes, slopes[1:]))
        # prefix integrals match prefix sums from above, never from below
        prefix = np.cumsum(f)
        for m in range(1, h + 1):
            gap = fn.integral(0.0, float(m)) - prefix[m - 1]
            hi = 0.0 if m == h else (f[m] - f[m - 1]) / 8.0
            assert -1e-9 <= gap <= hi + 1e-9


def test_integral_against_quadrature():
    # Independent slow route: dense trapezoid on the max-of-lines values.
    rng = derive_rng(52)
    for _ in range(10):
        h = int(rng.integers(2, 20))
        fn = convex_approx(random_nondecelerating(h, rng))
        xs = np.linspace(0.0, float(h), 20001)
        ys = [fn.value(float(x)) for x in xs]
        approx = np.trapezoid(ys, xs)
        assert fn.integral(0.0, float(h)) == pytest.approx(float(approx), abs=1e-5 * max(1.0, approx))


def test_piecewise_fn_validation():
    fn = convex_approx([0, 1, 2])
    with pytest.raises(ValueError):
        fn.value(-0.5)
    with pytest.raises(ValueError):
        fn.integral(2.0, 1.0)
