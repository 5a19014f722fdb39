"""Boundary integral operators on the unit interval.

The solution of

    v_t + v_xxx + d v = 0,  v(x, 0) = 0,  B_{k,0} v = h

is written as a sum over roots j and data slots m of oscillatory integrals

    U_{j,m}(x, t) = 1/(2 pi) int_0^R e^{i rho^3 t} X_j(x, rho) K_{jm}(rho) h_m^(rho) d rho

with ``X_j = e^{lambda_j x}`` (``e^{-lambda_2 (1 - x)}`` for j = 2), ``K`` the
weighted kernel ``3 rho^2 Delta_{jm} / Delta`` and ``h^`` the transform of the
data along the ray ``s = i rho^3``.  ``v = sum 2 Re U_{j,m}``.

Everything here is in normalised units (L = 1); ``eval_U`` and ``eval_Wbdr``
accept physical grids and rescale.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .domain import BoundaryData, Field, Grid, CLASS_ROWS, _ROWS
from .errors import QuadratureNotConverged
from .quadrature import hat_transform_matrix, panel_nodes, tail_estimate, taper_extension
from .spectral import roots_array, weighted_kernel, default_damping

R_FACTOR = 1.5
TAPER_FRACTION = 0.5
TAIL_TOL = 1e-3


@dataclass(frozen=True, eq=False)
class RaySpectrum:
    rho_nodes: np.ndarray
    weights: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rho_nodes)
        if r.size and (r[0] < 0 or np.any(np.diff(r) <= 0)):
            raise ValueError("rho nodes must be nonnegative and increasing")
        if np.any(np.asarray(self.weights) <= 0):
            raise ValueError("weights must be positive")


def ray_nodes(R, T, x_span=1.0, phase=2 * np.pi, npts=16):
    """Gauss-Legendre panels on [0, R] resolving e^{i rho^3 t + i rho x}."""
    return panel_nodes(R, lambda r: 3 * r * r * T + x_span, phase, npts)


def default_R(dt, factor=R_FACTOR):
    """Cut-off where rho^3 reaches ``factor^3`` times the time Nyquist frequency."""
    return factor * (np.pi / dt) ** (1 / 3)


def laplace_on_ray(h, t, rho_nodes, weights=None) -> RaySpectrum:
    """``int_0^T e^{-i rho^3 t} h(t) dt`` with ``h`` extended by zero past T."""
    h = np.asarray(h, dtype=float)
    rho_nodes = np.asarray(rho_nodes, dtype=float)
    dt = t[1] - t[0]
    W = hat_transform_matrix(rho_nodes ** 3, t[0], dt, len(t))
    if weights is None:
        weights = np.ones_like(rho_nodes)
    return RaySpectrum(rho_nodes, np.asarray(weights), W @ h)


def hstar_spectrum(k, j, m, h, t, rho_nodes, weights=None, damping=None) -> RaySpectrum:
    """``3 rho^2 Delta_{jm}/Delta * h^(i rho^3)`` on the nodes (e^{lambda_2} folded in for j=2)."""
    spec = laplace_on_ray(h, t, rho_nodes, weights)
    K = weighted_kernel(k, j, m, rho_nodes, damping)
    return RaySpectrum(spec.rho_nodes, spec.weights, K * spec.values)


def extend_signal(h, dt, n_ext):
    """Append a smooth compactly supported continuation of each row of ``h``."""
    h = np.atleast_2d(np.asarray(h, dtype=float))
    if n_ext <= 0:
        return h
    ext = taper_extension(h.T, dt, n_ext).T
    return np.concatenate([h, ext], axis=1)


class BoundaryOperator:
    """Precomputed quadrature for one (class, space grid, time grid, damping).

    Parameters are in normalised units: x in [0, 1], times ``t`` uniform from 0.
    """

    def __init__(self, k, x, t, damping=None, R=None, taper=TAPER_FRACTION,
                 phase=2 * np.pi, npts=16, tail_tol=TAIL_TOL):
        self.k = k
        self.x = np.asarray(x, dtype=float)
        self.t = np.asarray(t, dtype=float)
        self.damping = default_damping(k) if damping is None else float(damping)
        self.dt = self.t[1] - self.t[0]
        self.R = default_R(self.dt) if R is None else float(R)
        self.tail_tol = tail_tol
        self.n_ext = int(np.ceil(taper * (len(self.t) - 1))) if taper else 0
        T_ext = self.t[-1] + self.n_ext * self.dt
        self.rho, self.w = ray_nodes(self.R, T_ext, 1.0, phase, npts)
        self.K = np.array([[weighted_kernel(k, j, m, self.rho, self.damping)
                            for m in (1, 2, 3)] for j in (1, 2, 3)])
        self.F = hat_transform_matrix(self.rho ** 3, 0.0, self.dt, len(self.t) + self.n_ext)
        self.E = np.exp(1j * np.outer(self.rho ** 3, self.t))
        lam = roots_array(self.rho, k, self.damping)
        xx = self.x[:, None]
        self.X = np.stack([np.exp(lam[0][None, :] * xx),
                           np.exp(-lam[1][None, :] * (1 - xx)),
                           np.exp(lam[2][None, :] * xx)])
        self.lam = lam
        self.last_tail = 0.0

    def spectrum(self, h):
        """Ray transforms of the (extended) class-ordered data, shape (3, nrho)."""
        h_ext = extend_signal(h, self.dt, self.n_ext)
        return (self.F @ h_ext.T).T

    def amplitudes(self, h, ref=None):
        """G[j, rho] = sum_m K_jm h^_m times quadrature weights / (2 pi).

        The discarded tail is estimated in solution units and compared with
        ``ref`` (default: the largest data sample).
        """
        hs = self.spectrum(h)
        G = np.einsum("jmr,mr->jr", self.K, hs)
        ref = np.abs(h).max() if ref is None else ref
        self._check_tail(np.abs(G).sum(axis=0) / np.pi, ref)
        return G * (self.w / (2 * np.pi))[None, :]

    def _check_tail(self, env, ref):
        tail = tail_estimate(env, self.w)
        self.last_tail = float(tail / ref) if ref > 0 else 0.0
        if self.last_tail > self.tail_tol:
            raise QuadratureNotConverged(
                f"ray integrand tail {self.last_tail:.2e} exceeds {self.tail_tol:.0e} at R={self.R:.1f}")

    def U(self, j, m, hm):
        """Complex U_{j,m} field on (x, t) for one scalar data signal."""
        hm = np.asarray(hm, dtype=float)
        hs = self.F @ extend_signal(hm, self.dt, self.n_ext)[0]
        G = self.K[j - 1, m - 1] * hs * self.w / (2 * np.pi)
        return (self.X[j - 1] * G[None, :]) @ self.E

    def apply(self, h, ref=None):
        """Real field sum_{j,m} 2 Re U_{j,m}, shape (nx, nt)."""
        G = self.amplitudes(h, ref)
        out = np.zeros((len(self.x), len(self.t)))
        for j in range(3):
            out += 2 * ((self.X[j] * G[j][None, :]) @ self.E).real
        return out

    def traces(self, h, end, p):
        """Spectral boundary trace d^p v at x = 0 (end=0) or x = 1 (end=1)."""
        G = self.amplitudes(h)
        out = np.zeros(len(self.t))
        for j in range(3):
            xe = self.X[j][0 if end == 0 else -1]
            out += 2 * ((self.lam[j] ** p * xe * G[j]) @ self.E).real
        return out

    def principal_traces(self, h, ref=None):
        G = self.amplitudes(h, ref)
        rows = []
        for r in CLASS_ROWS[self.k]:
            _, end, p = _ROWS[r]
            acc = np.zeros(len(self.t))
            for j in range(3):
                xe = self.X[j][0 if end == 0 else -1]
                acc += 2 * ((self.lam[j] ** p * xe * G[j]) @ self.E).real
            rows.append(acc)
        return np.array(rows)


def slot_scale(k, L):
    """Multipliers L^p mapping physical slot data to normalised units."""
    return np.array([L ** _ROWS[r][2] for r in CLASS_ROWS[k]])


@lru_cache(maxsize=4)
def _operator(k, nx, nt, Tn, damping, R, taper):
    x = np.linspace(0.0, 1.0, nx)
    t = np.linspace(0.0, Tn, nt)
    return BoundaryOperator(k, x, t, damping, R, taper)


def operator_for(k, grid: Grid, delta=None, R=None, taper=TAPER_FRACTION):
    """Cached normalised operator for a physical grid (damping rescaled by L^3)."""
    d = default_damping(k) if delta is None else float(delta)
    return _operator(k, grid.nx, grid.nt, grid.T / grid.L ** 3, d * grid.L ** 3, R, taper)


def eval_U(k, j, m, h, grid: Grid, **kw):
    """Complex U_{j,m} for slot-m data ``h`` (physical units) on ``grid``."""
    op = operator_for(k, grid, **kw)
    p = _ROWS[CLASS_ROWS[k][m - 1]][2]
    return op.U(j, m, np.asarray(h) * grid.L ** p)


def eval_Wbdr(k, hvec, grid: Grid, **kw) -> Field:
    """Solution of the homogeneous linear problem with principal boundary data ``hvec``."""
    h = hvec.h if isinstance(hvec, BoundaryData) else np.asarray(hvec, dtype=float)
    op = operator_for(k, grid, **kw)
    return Field(grid, op.apply(h * slot_scale(k, grid.L)[:, None]))
