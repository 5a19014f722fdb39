import numpy as np

from kdvbvp.domain import Grid
from kdvbvp.manufactured import manufactured

from conftest import template


def test_forcing_closed_form():
    g = Grid(1.0, 0.2, 17, 9)
    w = manufactured("t*x**3")
    x, t = g.x[:, None], g.t[None, :]
    expected = x ** 3 + 6 * t + 0.5 * t * x ** 3 + 3 * t * x ** 2 + t * x ** 3 * 3 * t * x ** 2
    got = w.forcing(g, transport=True, delta=0.5, nonlinear=True)
    np.testing.assert_allclose(got, expected, rtol=1e-13, atol=1e-14)


def test_travelling_linear_wave_has_no_forcing():
    # u = x - t solves u_t + u_x + u_xxx = 0
    g = Grid(2.0, 0.3, 9, 9)
    assert not np.any(manufactured("x - t").forcing(g, transport=True))


def test_principal_boundary_data(k):
    g = Grid(1.5, 0.1, 9, 9)
    w = manufactured("cos(t)*exp(x)")
    h = w.boundary(template(k), g, principal_only=True)
    for i, (end, p) in enumerate(template(k).principal()):
        np.testing.assert_allclose(h[i], np.cos(g.t) * np.exp(end * g.L))


def test_full_boundary_data_rows(k):
    cls = template(k, a30=0.3, b30=-0.2)
    g = Grid(1.0, 0.1, 9, 9)
    w = manufactured("1 + x + t")
    a_n, b_n = cls.normalised_rows()
    tr0 = np.array([1.0, 1.0, 0.0])
    h = w.boundary(cls, g)
    for i in range(3):
        expected = a_n[i] @ tr0 + b_n[i] @ np.array([0.0, 1.0, 0.0]) + b_n[i, 0] * (2 + g.t) + a_n[i, 0] * g.t
        np.testing.assert_allclose(h[i], expected, atol=1e-14)
