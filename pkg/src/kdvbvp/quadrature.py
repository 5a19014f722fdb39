"""Oscillatory quadrature helpers shared by the ray and line transforms."""
from __future__ import annotations

from math import factorial

import numpy as np

from .domain import fd_weights

_GL_CACHE = {}


def phi1(z):
    """(e^z - 1) / z, stable near 0."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    zs = z[small]
    ser = np.zeros_like(zs)
    for n in range(12, -1, -1):
        ser = ser * zs + 1.0 / factorial(n + 1)
    out[small] = ser
    zb = z[~small]
    out[~small] = np.expm1(zb) / zb
    return out


def phi2(z):
    """(e^z - 1 - z) / z^2 = int_0^1 e^{zu} (1 - u) du, stable near 0."""
    z = np.asarray(z, dtype=complex)
    out = np.empty_like(z)
    small = np.abs(z) < 0.1
    zs = z[small]
    ser = np.zeros_like(zs)
    for n in range(12, -1, -1):
        ser = ser * zs + 1.0 / factorial(n + 2)
    out[small] = ser
    zb = z[~small]
    out[~small] = (np.expm1(zb) - zb) / zb ** 2
    return out


def hat_transform_matrix(omega, start, step, n):
    """Weights W[w, i] with sum_i W[w, i] g_i = int e^{-i w t} g(t) dt.

    ``g`` is the piecewise-linear interpolant of samples on
    ``start + i * step`` (i < n), zero outside the sampled interval; the
    integral is exact for that interpolant (Filon-type).
    """
    omega = np.asarray(omega, dtype=float)
    t = start + step * np.arange(n)
    z = omega * step
    W = np.exp(-1j * np.outer(omega, t))
    interior = step * np.sinc(z / (2 * np.pi)) ** 2
    W[:, 1:-1] *= interior[:, None]
    W[:, 0] *= step * phi2(-1j * z)
    W[:, -1] *= step * phi2(1j * z)
    return W


def _gl(n):
    if n not in _GL_CACHE:
        _GL_CACHE[n] = np.polynomial.legendre.leggauss(n)
    return _GL_CACHE[n]


def panel_nodes(R, rate, phase=2 * np.pi, npts=16, wmax=0.5):
    """Composite Gauss-Legendre nodes on [0, R].

    Each panel is narrow enough that the integrand phase, whose derivative is
    bounded by ``rate(rho)``, advances by at most ``phase`` across it.
    """
    xg, wg = _gl(npts)
    nodes, weights = [], []
    a = 0.0
    while a < R:
        w = min(wmax, phase / rate(a))
        w = min(w, phase / rate(a + w), R - a)
        nodes.append(a + 0.5 * w * (xg + 1))
        weights.append(0.5 * w * wg)
        a += w
    return np.concatenate(nodes), np.concatenate(weights)


def smooth_step_down(u):
    """C-infinity step: 1 for u <= 0, 0 for u >= 1."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(u < 1, np.exp(-1.0 / np.where(u < 1, 1 - u, 1.0)), 0.0)
        b = np.where(u > 0, np.exp(-1.0 / np.where(u > 0, u, 1.0)), 0.0)
    return a / (a + b)


def end_derivatives(g, step, order=3, at_left=False):
    """One-sided derivatives 0..order of sampled ``g`` at one end (axis 0)."""
    g = np.asarray(g, dtype=float)
    n = g.shape[0]
    block = g[:n] if at_left else g[::-1]
    out = [block[0]]
    for p in range(1, order + 1):
        npts = min(n, p + 3)
        w = np.array(fd_weights(tuple(range(npts)), p))
        sgn = 1.0 if at_left else (-1.0) ** p
        out.append(sgn * np.tensordot(w, block[:npts], axes=(0, 0)) / step ** p)
    return out


def taper_extension(g, step, n_ext, order=3, at_left=False):
    """Samples continuing ``g`` beyond one end for ``n_ext`` steps.

    The continuation is the order-``order`` Taylor polynomial at the end
    multiplied by a smooth cutoff reaching zero at the last sample, so the
    extended signal is C^order across the junction and compactly supported.
    Returned in outward order (nearest the junction first).
    """
    ders = end_derivatives(g, step, order, at_left)
    s = step * np.arange(1, n_ext + 1)
    if at_left:
        s = -s
    poly = sum(d * (s ** p / factorial(p)).reshape((-1,) + (1,) * (np.ndim(d)))
               for p, d in enumerate(ders))
    cut = smooth_step_down(np.arange(1, n_ext + 1) / n_ext)
    return poly * cut.reshape((-1,) + (1,) * (poly.ndim - 1))


def tail_estimate(env, weights, fraction=0.02):
    """Integral of the envelope over the last ``fraction`` of the nodes.

    For an integrand that is still decaying at the cut-off this is a proxy
    for the size of the discarded remainder.
    """
    n_last = max(1, int(len(env) * fraction))
    return float(np.sum(env[-n_last:] * weights[-n_last:]))
