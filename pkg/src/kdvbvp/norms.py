"""Discrete Sobolev norms and smoothing diagnostics.

Space norms use the sine (vanishing endpoints) or cosine series of the
samples, time norms the zero-extended DFT; in both cases the fractional
weight is ``(1 + |mode|^2)^s`` and ``s = 0`` reproduces the trapezoidal L^2
norm exactly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.fft import dct, dst, fft, fftfreq

from .domain import Field, fd_weights, sobolev_exponents
from .errors import UnresolvedSignal

N_STATIONS = 9
TOP_FRACTION = 0.1
TOP_ENERGY = 0.1
PAD_FACTOR = 4


def _check_resolved(energy, check):
    if not check:
        return
    total = energy.sum()
    if total == 0:
        return
    n_top = max(1, int(np.ceil(TOP_FRACTION * len(energy))))
    share = energy[-n_top:].sum() / total
    if share > TOP_ENERGY:
        raise UnresolvedSignal(f"top {n_top} modes carry {share:.1%} of the weighted energy")


def space_coefficients(g, L=1.0, tol=1e-14):
    """(coefficients, trapezoid weights nu_n, wavenumbers) of the sine/cosine series."""
    g = np.asarray(g, dtype=float)
    M = len(g) - 1
    scale = max(np.abs(g).max(), 1e-300)
    if abs(g[0]) <= tol * scale and abs(g[-1]) <= tol * scale:
        c = dst(g[1:-1], type=1) / M
        n = np.arange(1, M)
        nu = np.full(M - 1, L / 2)
    else:
        c = dct(g, type=1) / M
        c[0] /= 2
        c[-1] /= 2
        n = np.arange(M + 1)
        nu = np.full(M + 1, L / 2)
        nu[0] = nu[-1] = L
    return c, nu, n * np.pi / L


def sobolev_norm_space(g, s, L=1.0, check=True):
    """Discrete H^s(0, L) norm, s in [0, 3]."""
    if not 0 <= s <= 3:
        raise ValueError("s must lie in [0, 3]")
    c, nu, kappa = space_coefficients(g, L)
    energy = nu * c ** 2 * (1 + kappa ** 2) ** s
    _check_resolved(energy, check)
    return float(np.sqrt(energy.sum()))


def sobolev_norm_time(h, sigma, T=None, dt=None, check=True):
    """Discrete H^sigma(0, T) norm of the zero-extended signal, sigma in [-1/3, 4/3]."""
    if not -1 / 3 - 1e-12 <= sigma <= 4 / 3 + 1e-12:
        raise ValueError("sigma must lie in [-1/3, 4/3]")
    h = np.array(h, dtype=float)
    n = len(h)
    if dt is None:
        dt = T / (n - 1)
    h[0] *= np.sqrt(0.5)
    h[-1] *= np.sqrt(0.5)
    N = PAD_FACTOR * n
    H = fft(h, n=N)
    omega = 2 * np.pi * fftfreq(N, d=dt)
    energy = dt / N * np.abs(H) ** 2 * (1 + omega ** 2) ** sigma
    if check:
        order = np.argsort(np.abs(omega), kind="stable")
        _check_resolved(energy[order], check)
    return float(np.sqrt(energy.sum()))


@lru_cache(maxsize=16)
def diff_matrix(n, dx, order, width=5):
    """Dense FD matrix for the ``order``-th derivative; centred where possible."""
    D = np.zeros((n, n))
    half = width // 2
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        offs = tuple(range(lo - i, lo - i + width))
        D[i, lo:lo + width] = np.array(fd_weights(offs, order)) / dx ** order
    return D


def x_derivative(values, dx, order):
    """Space derivative of a (nx, nt) array."""
    if order == 0:
        return np.asarray(values)
    width = 5 if order <= 2 else 6
    return diff_matrix(values.shape[0], dx, order, width) @ values


def station_indices(nx, n=N_STATIONS):
    return np.unique(np.round(np.linspace(0, nx - 1, n)).astype(int))


def z_norm(u: Field, s=0.0):
    """max_t ||u||_{H^s} + (int ||u||_{H^{s+1}}^2 dt)^{1/2}."""
    g = u.grid
    sup = max(sobolev_norm_space(u.values[:, n], s, g.L, check=False) for n in range(g.nt))
    sq = np.array([sobolev_norm_space(u.values[:, n], s + 1, g.L, check=False) ** 2
                   for n in range(g.nt)])
    w = np.full(g.nt, g.dt)
    w[0] = w[-1] = g.dt / 2
    return float(sup + np.sqrt(np.sum(w * sq)))


def trace_norms(u: Field, s=0.0, stations=N_STATIONS):
    """{(x, r): ||d^r_x u(x, .)||_{H^{(s+1-r)/3}(0,T)}} at the stations, r = 0, 1, 2."""
    g = u.grid
    idx = station_indices(g.nx, stations)
    out = {}
    for r in range(3):
        d = x_derivative(u.values, g.dx, r)
        sigma = (s + 1 - r) / 3
        for i in idx:
            out[(float(g.x[i]), r)] = sobolev_norm_time(d[i], sigma, dt=g.dt, check=False)
    return out


def y_norm(u: Field, s=0.0, stations=N_STATIONS):
    return max(z_norm(u, s), max(trace_norms(u, s, stations).values()))


def data_norm_H(k, h, dt, s=0.0):
    """sum_i ||h_i||_{H^{sigma_i}(0,T)} with the class exponents."""
    return float(sum(sobolev_norm_time(h[i], sig, dt=dt, check=False)
                     for i, sig in enumerate(sobolev_exponents(k, s))))


def x_norm(k, phi, h, L, dt, s=0.0):
    """||phi||_{H^s(0,L)} + ||h||_{H^s_k(0,T)}."""
    return sobolev_norm_space(phi, s, L, check=False) + data_norm_H(k, h, dt, s)


def l1_space_norm(f, dt, L, s=0.0):
    """int_0^T ||f(., t)||_{H^s} dt (trapezoid)."""
    vals = np.array([sobolev_norm_space(f[:, n], s, L, check=False) for n in range(f.shape[1])])
    return float(dt * (vals.sum() - 0.5 * (vals[0] + vals[-1])))


@dataclass
class NormReport:
    space_norms: dict = field(default_factory=dict)
    time_trace_norms: dict = field(default_factory=dict)
    composite: dict = field(default_factory=dict)
    smoothing_ratios: dict = field(default_factory=dict)
    grid_level: int = 0
    stable_flag: bool | None = None

    def rows(self):
        """(report_kind, key, value, grid_level, stable_flag) tuples for CSV output."""
        flag = "" if self.stable_flag is None else str(bool(self.stable_flag)).lower()
        out = [("space", f"s={s:g}", v, self.grid_level, flag) for s, v in self.space_norms.items()]
        out += [("trace", f"x={x:.6g};r={r}", v, self.grid_level, flag)
                for (x, r), v in self.time_trace_norms.items()]
        out += [("composite", key, v, self.grid_level, flag) for key, v in self.composite.items()]
        out += [("smoothing", key, v, self.grid_level, flag)
                for key, v in self.smoothing_ratios.items()]
        return out


def kato_report(v: Field, data_norm, s=0.0, stations=N_STATIONS, grid_level=0) -> NormReport:
    """Trace norms at the stations and C_est = max / data_norm."""
    tn = trace_norms(v, s, stations)
    peak = max(tn.values())
    c_est = peak / data_norm if data_norm > 0 else (0.0 if peak == 0 else np.inf)
    rep = NormReport(time_trace_norms=tn, grid_level=grid_level)
    rep.space_norms = {0.0: sobolev_norm_space(v.values[:, -1], 0.0, v.grid.L, check=False)}
    rep.composite = {"Z": z_norm(v, s), "trace_max": peak, "data": float(data_norm)}
    rep.smoothing_ratios = {"C_est": float(c_est)}
    return rep


def compare_levels(coarse: NormReport, fine: NormReport, factor=2.0):
    """Mark both reports stable if their C_est differ by less than ``factor``."""
    a = coarse.smoothing_ratios["C_est"]
    b = fine.smoothing_ratios["C_est"]
    ok = bool(a == b or (min(a, b) > 0 and max(a, b) / min(a, b) < factor))
    coarse.stable_flag = fine.stable_flag = ok
    return ok
