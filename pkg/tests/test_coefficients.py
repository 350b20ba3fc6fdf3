import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dtnlab import coefficients as co
from dtnlab.coefficients import CoefficientError, preset

TWO_PI_SQ = 2 * math.pi**2


def test_laplace_preset():
    c = preset("laplace")
    x = np.array([0.3]), np.array([0.7])
    assert np.array_equal(c.a(*x)[0], np.eye(2))
    assert c.b.is_zero and c.c.is_zero
    assert c.d == 0.0 and c.kappa == 1.0
    assert c.b_equals_c


def test_rotational_divfree_tangential_on_disk(disk_01):
    c = preset("rotational", [1.0])
    rep = co.check_admissibility(c, disk_01)
    assert rep.div_b == 0.0 and rep.div_c == 0.0
    assert rep.normal_b <= 1e-15
    assert rep.tangential_ok and rep.ok


def test_stream_tangential_on_square(square_01):
    c = preset("stream", [1.0])
    rep = co.check_admissibility(c, square_01)
    assert rep.div_b <= 1e-12
    assert rep.normal_b <= 1e-12
    assert rep.tangential_ok


def test_rotational_not_tangential_on_square(square_01):
    assert not co.check_admissibility(preset("rotational", [1.0]), square_01).tangential_ok


@settings(max_examples=25, deadline=None)
@given(st.floats(-1, 2), st.floats(-1, 2), st.floats(0.1, 3))
def test_stream_jacobian_matches_finite_differences(x, y, s):
    f = co.stream_field(s)
    eps = 1e-6
    X, Y = np.array([x]), np.array([y])
    J = f.jac(X, Y)[0]
    dx = (f(X + eps, Y) - f(X - eps, Y))[0] / (2 * eps)
    dy = (f(X, Y + eps) - f(X, Y - eps))[0] / (2 * eps)
    fd = np.column_stack([dx, dy])
    assert np.allclose(J, fd, atol=1e-6 * (1 + s * 40))
    assert abs(f.divergence(X, Y)[0]) <= 1e-12 * (1 + s * 40)


def test_margins_laplace(square_01):
    m = co.check_conditions(preset("laplace"), 0.0, TWO_PI_SQ, square_01)
    assert m.margin_a == TWO_PI_SQ
    assert m.margin_c == TWO_PI_SQ
    assert m.margin_b == 0.0
    assert m.positivity_hypothesis and m.submarkov_hypothesis
    assert m.irreducible_hypothesis and m.domination_hypothesis


def test_margins_skew_stream_negative(square_01):
    s = 1.0
    m = co.check_conditions(preset("skew_stream", [s]), 0.0, TWO_PI_SQ, square_01)
    # sampled sup of |stream| approaches 2 pi s from below
    assert 0.9 * 2 * math.pi * s <= m.norm_b_minus_c <= 2 * math.pi * s
    assert 4 * m.norm_b_minus_c**2 > TWO_PI_SQ
    assert m.margin_a < 0
    assert m.margin_c > 0
    assert not m.positivity_hypothesis and not m.domination_hypothesis


@pytest.mark.parametrize("name,params", [("laplace", []), ("rotational", [2.0]), ("skew_stream", [0.3]),
                                         ("stream+constant_d", [1.0, -0.5])])
@pytest.mark.parametrize("lam", [-1.0, 0.0, 3.0])
def test_margin_a_le_margin_c(square_01, name, params, lam):
    m = co.check_conditions(preset(name, params), lam, TWO_PI_SQ, square_01)
    assert m.margin_a <= m.margin_c
    if m.b_equals_c:
        assert m.margin_a == m.margin_c
    kap = m.kappa
    assert m.margin_a == kap * m.lambda1D - (4 / kap * m.norm_b_minus_c**2 + m.norm_d_minus + lam)
    assert m.margin_b == m.essinf_d - lam


def test_margins_d_minus(square_01):
    m = co.check_conditions(preset("constant_d", [-1.0]), 0.0, TWO_PI_SQ, square_01)
    assert m.norm_d_minus == 1.0 and m.essinf_d == -1.0
    assert m.margin_c == TWO_PI_SQ - 1.0


def test_bad_lambda1D(square_01):
    with pytest.raises(CoefficientError):
        co.check_conditions(preset("laplace"), 0.0, 0.0, square_01)


def test_lower_bounds(disk_01, square_01):
    lam1 = 5.78
    g, t = co.lambda1_lower_bounds(preset("laplace"), lam1, disk_01)
    assert g == lam1 and t == lam1
    for s in (0.5, 1.0, 2.0):
        _, t = co.lambda1_lower_bounds(preset("rotational", [s]), lam1, disk_01)
        assert t == lam1
    c = preset("scaled_identity+constant_d", [2.0, -1.0])
    g, t = co.lambda1_lower_bounds(c, lam1, disk_01)
    assert g == 2 * lam1 - 1
    # rotational is not tangent to the square's boundary: no tangential bound there
    assert co.lambda1_lower_bounds(preset("rotational", [1.0]), TWO_PI_SQ, square_01)[1] is None


def test_general_bound_absent_for_large_advection(disk_01):
    g, _ = co.lambda1_lower_bounds(preset("rotational", [5.0]), 5.78, disk_01)
    assert g is None  # |b + c| = 10 > sqrt(5.78)


def test_preset_errors():
    with pytest.raises(CoefficientError):
        preset("nonsense")
    with pytest.raises(CoefficientError):
        preset("rotational")
    with pytest.raises(CoefficientError):
        preset("laplace", [1.0])
    with pytest.raises(CoefficientError):
        preset("scaled_identity", [-1.0])


def test_preset_overrides():
    c = preset("rotational", [1.0], d=2.0, kappa=0.5)
    assert c.d == 2.0 and c.kappa == 0.5
    assert c.with_d(-3.0).d == -3.0


def test_parse_config_roundtrip(tmp_path):
    text = """
    # anisotropic with rotation
    a = diag 2 3
    b = rotational 1.5
    c = rotational 1.5
    d = const -0.25
    """
    p = tmp_path / "c.cfg"
    p.write_text(text)
    c = co.read_config(p)
    assert c.kappa == 2.0
    assert c.d == -0.25
    assert c.b_equals_c
    pt = np.array([0.2]), np.array([-0.4])
    assert np.allclose(c.b(*pt)[0], 1.5 * np.array([0.4, 0.2]))
    assert np.allclose(c.a(*pt)[0], np.diag([2.0, 3.0]))


def test_parse_config_defaults_and_const():
    c = co.parse_config("a = const 2 0.5 2\nkappa = 1.2\n")
    assert c.kappa == 1.2
    assert c.b.is_zero and c.d == 0.0
    assert co.parse_config("a = const 2 1 2").kappa == pytest.approx(1.0)


@pytest.mark.parametrize("text", ["a = weird", "b = rotational", "q = 1", "a identity", "d = const 1 2", "kappa = -1"])
def test_parse_config_errors(text):
    with pytest.raises(CoefficientError):
        co.parse_config(text)


def test_scaled_identity_admissible(square_01):
    rep = co.check_admissibility(preset("scaled_identity", [2.0]), square_01)
    assert rep.kappa_ok and rep.min_eig_a == 2.0


def test_standing_hypothesis_gates_flags(square_01, disk_01):
    rot = preset("rotational", [1.0])
    on_square = co.check_conditions(rot, 0.0, TWO_PI_SQ, square_01)
    assert on_square.margin_a > 0 and not on_square.standing_ok
    assert not on_square.positivity_hypothesis and not on_square.irreducible_hypothesis
    on_disk = co.check_conditions(rot, 0.0, 5.78, disk_01)
    assert on_disk.standing_ok and on_disk.positivity_hypothesis
