import math

import numpy as np
import pytest
from scipy.special import beta

from qsdlab.quadrature import QuadratureError, checked, graded_breaks, integrate, integrate_tail, unit_rule


def test_unit_rule_integrates_polynomials_exactly():
    s, w = unit_rule(10, 0.25, "both", 8)
    for k in range(8):
        assert np.dot(w, s ** k) == pytest.approx(1.0 / (k + 1), rel=1e-14)


@pytest.mark.parametrize("ends", ["left", "right", "both"])
def test_graded_breaks_are_increasing(ends):
    b = graded_breaks(12, 0.2, ends)
    assert b[0] == 0.0 and b[-1] == 1.0
    assert np.all(np.diff(b) > 0)


@pytest.mark.parametrize("p", [-0.5, -0.25, 0.3])
def test_endpoint_power_singularity(p):
    # nodes near b round onto b, so a singular right end is handled by reflecting:
    # int_0^1 x^p (1-x)^p dx = 2 int_0^(1/2) x^p (1-x)^p dx = B(p+1, p+1)
    got = 2 * integrate(lambda x: x ** p * (1 - x) ** p, 0.0, 0.5, levels=60)
    assert got == pytest.approx(beta(p + 1, p + 1), rel=1e-12)


def test_tail_rule_power_decay():
    # int_1^inf y^-2.5 dy = 1/1.5
    assert integrate_tail(lambda y: y ** -2.5, 1.0) == pytest.approx(1 / 1.5, rel=1e-12)


def test_tail_rule_exponential():
    assert integrate_tail(lambda y: np.exp(-y), 0.0) == pytest.approx(1.0, rel=1e-12)


def test_checked_raises_on_disagreement():
    with pytest.raises(QuadratureError) as info:
        checked(lambda order: 1.0 + 1.0 / order, 1e-6, "toy")
    assert info.value.estimate > 0
    assert checked(lambda order: math.pi, 1e-12, "const") == math.pi
