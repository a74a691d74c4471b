"""Self-checks of the reference computations, with their values frozen."""
import math

import numpy as np
import pytest
from scipy.special import spherical_jn

from oracles import polar_fd_torus, ritz_ellipse, spheromak_psi, tan_root

BALL_ROOT = 4.493409457909064
# polar finite-volume Richardson (n_rho 40/80) and Ritz degree 18 agree to 5e-7
TORUS_REF = 7.4879263


def test_tan_root_matches_literature_and_bessel_zero():
    x = tan_root()
    assert x == pytest.approx(BALL_ROOT, abs=1e-14)
    assert abs(spherical_jn(1, x)) < 1e-14


def test_spheromak_vanishes_on_unit_sphere():
    th = np.linspace(0.1, math.pi - 0.1, 7)
    r, z = np.sin(th), np.cos(th)
    assert np.abs(spheromak_psi(r, z, BALL_ROOT)).max() < 1e-14


def test_polar_fd_converges_second_order():
    a = polar_fd_torus(2.0, 0.5, 10, 40)
    b = polar_fd_torus(2.0, 0.5, 20, 80)
    c = polar_fd_torus(2.0, 0.5, 40, 160)
    ratio = (b - a) / (c - b)
    assert 3.0 < ratio < 5.0
    assert c + (c - b) / 3 == pytest.approx(TORUS_REF, rel=2e-5)


def test_ritz_is_spectrally_converged_on_torus():
    assert ritz_ellipse(2.0, 0.5, 0.5, 10) == pytest.approx(ritz_ellipse(2.0, 0.5, 0.5, 14), rel=1e-10)
    assert ritz_ellipse(2.0, 0.5, 0.5, 14) == pytest.approx(TORUS_REF, rel=1e-7)


def test_ritz_scaling():
    assert ritz_ellipse(4.0, 1.0, 1.0, 12) == pytest.approx(0.5 * ritz_ellipse(2.0, 0.5, 0.5, 12), rel=1e-10)
