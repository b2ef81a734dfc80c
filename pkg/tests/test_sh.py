import numpy as np
import pytest

from splatkit.errors import InvalidParameterError
from splatkit.sh import SH_C0, eval_sh_color, num_coeffs, sh_basis, sh_basis_jacobian


def unit(v):
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v)


def test_num_coeffs():
    assert [num_coeffs(d) for d in range(4)] == [1, 4, 9, 16]


def test_degree0_all_zero_gives_half_gray():
    coeffs = np.zeros((3, 16))
    c = eval_sh_color(coeffs, 0, unit([0.3, -0.4, 0.86]))
    np.testing.assert_allclose(c, [0.5, 0.5, 0.5], atol=1e-15)


def test_degree0_unit_white_dc():
    coeffs = np.zeros((3, 16))
    coeffs[:, 0] = 0.5 / SH_C0
    for d in ([0, 0, 1], [1, 0, 0], [0.6, -0.48, 0.64]):
        np.testing.assert_allclose(eval_sh_color(coeffs, 0, unit(d)),
                                   [1.0, 1.0, 1.0], atol=1e-12)


def test_band1_antisymmetry_in_z():
    # single band-1 coefficient on the z-linear basis function: values at +z
    # and -z differ by exactly twice the band-1 term
    coeffs = np.zeros((3, 16))
    coeffs[0, 2] = 0.7  # index 2 multiplies z (up to constant)
    up = eval_sh_color(coeffs, 1, np.array([0.0, 0.0, 1.0]))
    dn = eval_sh_color(coeffs, 1, np.array([0.0, 0.0, -1.0]))
    b_up = sh_basis(np.array([0.0, 0.0, 1.0]))[2] * 0.7
    assert up[0] - dn[0] == pytest.approx(2 * abs(b_up), abs=1e-12)


def test_higher_coeffs_ignored_below_degree(rng):
    coeffs = rng.normal(size=(3, 16))
    low = coeffs.copy()
    low[:, 1:] = 0.0
    d = unit(rng.normal(size=3))
    np.testing.assert_array_equal(eval_sh_color(coeffs, 0, d),
                                  eval_sh_color(low, 0, d))


def test_negative_raw_color_clamps_to_zero():
    coeffs = np.zeros((3, 16))
    coeffs[:, 0] = -10.0
    c = eval_sh_color(coeffs, 0, np.array([0.0, 0.0, 1.0]))
    np.testing.assert_array_equal(c, [0.0, 0.0, 0.0])


def test_non_unit_direction_rejected():
    with pytest.raises(InvalidParameterError):
        eval_sh_color(np.zeros((3, 16)), 0, np.array([0.0, 0.0, 2.0]))


def test_basis_constant_term():
    b = sh_basis(unit([0.1, 0.2, 0.97]))
    assert b[0] == pytest.approx(SH_C0, abs=1e-15)


def test_basis_jacobian_matches_finite_differences(rng):
    # oracle: central differences of the basis along each coordinate,
    # projected onto the tangent space is not needed because the jacobian is
    # of the unnormalized basis map R^3 -> R^16
    x = unit(rng.normal(size=3))
    J = sh_basis_jacobian(x)
    h = 1e-6
    for a in range(3):
        xp, xm = x.copy(), x.copy()
        xp[a] += h
        xm[a] -= h
        num = (sh_basis(xp) - sh_basis(xm)) / (2 * h)
        np.testing.assert_allclose(J[:, a], num, atol=1e-8)
