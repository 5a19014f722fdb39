"""Linear interval problems

    v_t + v_xxx + delta v = f,  v(x, 0) = phi,  B_{k,0} v = h

solved as ``v = q - W_bdr(B_{k,0} q - h)`` with ``q`` the whole-line solution
for smoothly extended data.  Work is done on (0, 1) after the change of
variables x -> x / L, t -> t / L^3.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .boundary_integral import BoundaryOperator, slot_scale
from .domain import (BoundaryData, BoundaryClass, Field, Grid, apply_Bk0,
                     class_template, extract_traces, validate_class)
from .errors import IncompatibleData
from .line import LineOperator, EXT_WIDTH
from .spectral import default_damping

COMPAT_TOL = 1e-3


@dataclass
class SolveReport:
    iterations: int = 0
    contraction: list = field(default_factory=list)
    residuals: dict = field(default_factory=dict)
    norms: dict = field(default_factory=dict)
    scaling: dict = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)
    windows: list = field(default_factory=list)
    flags: list = field(default_factory=list)


class LinearSolver:
    """Cached line and boundary operators for one (class, grid, damping)."""

    def __init__(self, k, grid: Grid, delta=None, R=None, extension="poly",
                 width=EXT_WIDTH, taper=0.5):
        self.k = k
        self.grid = grid
        self.delta = default_damping(k) if delta is None else float(delta)
        L = grid.L
        self.x = np.linspace(0.0, 1.0, grid.nx)
        self.t = np.linspace(0.0, grid.T / L ** 3, grid.nt)
        d = self.delta * L ** 3
        self.line = LineOperator(k, self.x, self.t, d, R, width, extension)
        self.bdr = BoundaryOperator(k, self.x, self.t, d, R, taper)
        self.scale = slot_scale(k, L)
        self.scaling = {"x_scale": L, "t_scale": L ** 3, "forcing_scale": L ** 3,
                        "damping_normalised": d, "slot_scale": self.scale.tolist()}

    def solve(self, phi, f=None, h=None, compat_tol=COMPAT_TOL):
        """Return (values, principal traces, report) in physical units."""
        L3 = self.grid.L ** 3
        phi = np.asarray(phi, dtype=float)
        ff = None if f is None else np.asarray(f, dtype=float) * L3
        Qw = self.line.modes(phi, ff)
        q = self.line.field(Qw)
        bq = self.line.principal_traces(Qw)
        hn = np.zeros_like(bq) if h is None else np.asarray(h, dtype=float) * self.scale[:, None]
        corr = bq - hn
        ref = max(np.abs(hn).max(), np.abs(bq).max(), 1.0)
        if np.abs(corr[:, 0]).max() > compat_tol * ref:
            raise IncompatibleData(
                f"boundary data at t=0 differ from the traces of phi by {np.abs(corr[:, 0]).max():.3e}")
        corr[:, 0] = 0.0
        size = max(np.abs(q).max(), np.abs(hn).max(), np.abs(corr).max())
        v = q - self.bdr.apply(corr, size)
        bv = bq - self.bdr.principal_traces(corr, size)
        report = SolveReport(scaling=dict(self.scaling))
        report.quadrature = {"R_line": self.line.R, "R_ray": self.bdr.R,
                             "tail_line": self.line.last_tail, "tail_ray": self.bdr.last_tail,
                             "n_xi": len(self.line.xi), "n_rho": len(self.bdr.rho)}
        # traces the boundary correction has to cancel; scale for zero data
        report.norms["free_traces"] = float(np.linalg.norm(
            l2_time(bq / self.scale[:, None], self.grid.dt)))
        return v, bv / self.scale[:, None], report


@lru_cache(maxsize=4)
def _solver(k, nx, nt, L, T, delta, R, extension):
    return LinearSolver(k, Grid(L, T, nx, nt), delta, R, extension)


def linear_solver(k, grid: Grid, delta=None, R=None, extension="poly") -> LinearSolver:
    d = default_damping(k) if delta is None else float(delta)
    return _solver(k, grid.nx, grid.nt, grid.L, grid.T, d, R, extension)


def _class_k(k):
    return k.k if isinstance(k, BoundaryClass) else int(k)


def _data(hvec, nt):
    if hvec is None:
        return np.zeros((3, nt))
    return hvec.h if isinstance(hvec, BoundaryData) else np.asarray(hvec, dtype=float)


def l2_time(sig, dt):
    """Discrete L^2(0, T) norm (trapezoid weights) along the last axis."""
    sig = np.asarray(sig, dtype=float)
    w = np.full(sig.shape[-1], dt)
    w[0] = w[-1] = dt / 2
    return np.sqrt(np.sum(w * sig ** 2, axis=-1))


def solve_linear(k, phi, f, hvec, grid: Grid, delta=None, R=None,
                 extension="poly", compat_tol=COMPAT_TOL):
    """Solve the linear interval problem; returns (Field, SolveReport)."""
    kk = _class_k(k)
    h = _data(hvec, grid.nt)
    solver = linear_solver(kk, grid, delta, R, extension)
    v, bv, report = solver.solve(phi, f, h, compat_tol)
    res = l2_time(bv - h, grid.dt)
    report.residuals["boundary_spectral"] = res.tolist()
    ref = max(np.linalg.norm(l2_time(h, grid.dt)), report.norms["free_traces"])
    report.residuals["boundary_relative"] = float(np.linalg.norm(res) / ref) if ref > 0 else 0.0
    return Field(grid, v), report


def solve_homogeneous_bc(k, phi, f, grid: Grid, **kw):
    """``solve_linear`` with zero principal boundary data."""
    z, report = solve_linear(k, phi, f, None, grid, **kw)
    report.residuals["annihilation"] = report.residuals["boundary_spectral"]
    return z


def boundary_residual(v: Field, k, hvec):
    """Per-slot discrete L^2(0,T) norms of ``B_{k,0} v - h`` from stencil traces."""
    kk = _class_k(k)
    cls = k if isinstance(k, BoundaryClass) else validate_class(*class_template(kk))
    bv = apply_Bk0(cls, extract_traces(v)).h
    h = _data(hvec, v.grid.nt)
    return tuple(float(r) for r in l2_time(bv - h, v.grid.dt))
