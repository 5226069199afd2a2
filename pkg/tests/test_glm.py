import math

import numpy as np
import pytest

from nonstat_glb.glm import LinkSpec, compute_constants, make_link, scan_constants


def test_logistic_k_mu_is_quarter():
    assert compute_constants(make_link("logistic"), 1.0, 1.0).k_mu == 0.25


def test_logistic_c_mu_and_r_mu_at_unit_box():
    c = compute_constants(make_link("logistic"), 1.0, 1.0)
    assert c.c_mu == pytest.approx(math.e / (1 + math.e) ** 2, abs=1e-12)
    assert c.c_mu == pytest.approx(0.196612, abs=1e-6)
    assert c.r_mu == pytest.approx(1.27154, abs=1e-5)


@pytest.mark.parametrize("S,L", [(1.0, 1.0), (3.0, 0.5), (0.2, 7.0)])
def test_identity_constants_are_one(S, L):
    c = compute_constants(make_link("identity"), S, L)
    assert (c.k_mu, c.c_mu, c.r_mu) == (1.0, 1.0, 1.0)


@pytest.mark.parametrize("S,L", [(1.0, 1.0), (2.0, 1.5), (0.3, 0.3), (4.0, 2.0)])
def test_logistic_closed_form_matches_scan(S, L):
    lk = make_link("logistic")
    closed, scan = compute_constants(lk, S, L), scan_constants(lk, S, L)
    assert closed.c_mu == pytest.approx(scan.c_mu, abs=1e-9)
    assert closed.k_mu == pytest.approx(scan.k_mu, abs=1e-9)


def test_r_mu_depends_only_on_product():
    lk = make_link("logistic")
    assert compute_constants(lk, 2.0, 1.0).r_mu == compute_constants(lk, 1.0, 2.0).r_mu


def test_unknown_link_rejected():
    with pytest.raises(ValueError):
        make_link("poisson")


def test_constants_need_positive_box():
    with pytest.raises(ValueError):
        compute_constants(make_link("logistic"), 0.0, 1.0)


def test_scan_rejects_flat_link():
    flat = LinkSpec("flat", lambda z: z * 0, lambda z: np.zeros_like(z), lambda z: z * 0)
    with pytest.raises(ValueError):
        compute_constants(flat, 1.0, 1.0)


def test_logistic_b_is_antiderivative_of_mu():
    lk = make_link("logistic")
    z = np.linspace(-30, 30, 61)
    h = 1e-5
    num = (lk.b(z + h) - lk.b(z - h)) / (2 * h)
    assert np.allclose(num, lk.mu(z), atol=1e-8)
    assert np.all(np.isfinite(lk.b(np.array([-1e4, 1e4]))))


def test_logistic_derivative_accurate_in_tails():
    lk = make_link("logistic")
    assert lk.dmu(np.array([40.0]))[0] == pytest.approx(math.exp(-40), rel=1e-12)
    assert compute_constants(lk, 50.0, 1.0).c_mu > 0
    with pytest.raises(ValueError):
        compute_constants(lk, 800.0, 1.0)
