"""KdV on (0, L) as the fixed point of the map

    Gamma(v) = solution of  u_t + u_xxx + delta u = -v_x - v v_x + delta v,
                            u(x, 0) = phi,  B_{k,0} u = h - B_{k,1} v

iterated on short windows [t0, t0 + theta] and continued window by window.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .domain import (BoundaryClass, BoundaryData, Field, Grid, apply_Bk1, class_template,
                     extract_traces, validate_class)
from .errors import ContractionFailed, ThetaUnderflow
from .linear import SolveReport, solve_linear
from .norms import x_derivative, x_norm, y_norm

MAX_ITER = 50
STALL_LIMIT = 5
CONTRACTION_TARGET = 0.9
MU_DEFAULT = 1 / 3
MIN_STEPS = 16


@dataclass
class PicardState:
    iterate: Field
    iteration: int = 0
    delta_norm: float = np.inf
    theta: float = 0.0
    restarts: int = 0


def _as_class(k, cls):
    if cls is None:
        return validate_class(*class_template(k))
    return cls


def _data(hvec, nt):
    if hvec is None:
        return np.zeros((3, nt))
    return hvec.h if isinstance(hvec, BoundaryData) else np.asarray(hvec, dtype=float)


def _feedback(cls, v: Field):
    return apply_Bk1(cls, extract_traces(v)).h


def kdv_forcing(v: Field, delta):
    """-v_x - v v_x + delta v."""
    vx = x_derivative(v.values, v.grid.dx, 1)
    return -vx - v.values * vx + delta * v.values


def linearized_forcing(a: np.ndarray, f=None):
    """Forcing builder for u_t + u_x + u_xxx + (a u)_x = f."""
    def build(v: Field, delta):
        g = v.grid
        out = -x_derivative(v.values, g.dx, 1) - x_derivative(a * v.values, g.dx, 1) + delta * v.values
        return out if f is None else out + f
    return build


def gamma_map(k, cls: BoundaryClass, v: Field, phi, hvec, grid: Grid, forcing=None, **kw) -> Field:
    """One application of Gamma on ``grid``."""
    cls = _as_class(k, cls)
    h = _data(hvec, grid.nt)
    build = kdv_forcing if forcing is None else forcing
    f = build(v, cls.delta)
    u, _ = solve_linear(cls.k, phi, f, h - _feedback(cls, v), grid, **kw)
    return u


def select_local_time(r, C1, C2, mu_const=1.0, T=1.0, dt=None):
    """Largest theta = T 2^-n with C1 theta^mu + C2 (theta^(1/3) + theta^(1/2)) r <= 1/2."""
    if r < 0 or C1 < 0 or C2 < 0:
        raise ValueError("r, C1, C2 must be nonnegative")
    theta = float(T)
    floor = 16 * dt if dt is not None else 0.0
    while True:
        lhs = C1 * theta ** mu_const + C2 * (theta ** (1 / 3) + theta ** 0.5) * r
        if lhs <= 0.5:
            break
        theta /= 2
        if theta < max(floor, 1e-300):
            break
    if dt is not None and theta < floor:
        raise ThetaUnderflow(f"admissible window {theta:.3e} below 16 dt = {floor:.3e}")
    return theta


def estimate_constants(k, cls, phi, h, grid: Grid, mu=MU_DEFAULT, forcing=None, **kw):
    """Empirical C0, C1, C2 (inflated 2x) from probe solves on ``grid``."""
    cls = _as_class(k, cls)
    theta = grid.T
    s0, _ = solve_linear(cls.k, phi, None, h, grid, **kw)
    ys0 = y_norm(s0)
    xn = x_norm(cls.k, phi, h, grid.L, grid.dt)
    C0 = ys0 / xn if xn > 0 else 1.0
    w = s0 if ys0 > 0 else Field(grid, np.outer(np.sin(np.pi * grid.x / grid.L), grid.t / grid.T))
    yw = y_norm(w)
    zero = np.zeros(grid.nx)
    vx = x_derivative(w.values, grid.dx, 1)
    if forcing is None:
        f_lin = -vx + cls.delta * w.values
    else:
        f_lin = linearized_forcing(forcing.a[:, :grid.nt])(w, cls.delta)
    lin, _ = solve_linear(cls.k, zero, f_lin, -_feedback(cls, w), grid, compat_tol=np.inf, **kw)
    nl, _ = solve_linear(cls.k, zero, -w.values * vx, None, grid, **kw)
    C1 = 2 * y_norm(lin) / (yw * theta ** mu)
    C2 = 2 * y_norm(nl) / ((theta ** (1 / 3) + theta ** 0.5) * yw ** 2)
    return {"C0": C0, "C1": C1, "C2": C2, "r": 2 * ys0, "mu": mu}


def _picard_window(k, cls, phi, h, grid: Grid, tol, forcing, **kw):
    """Picard iteration on one window; returns (field, info) or raises _Stalled."""
    v = Field(grid, np.repeat(np.asarray(phi, dtype=float)[:, None], grid.nt, axis=1))
    deltas, factors = [], []
    stall = 0
    prev = v
    for it in range(1, MAX_ITER + 1):
        u = gamma_map(k, cls, prev, phi, h, grid, forcing, **kw)
        d = y_norm(Field(grid, u.values - prev.values))
        scale = max(y_norm(u), 1e-300)
        if deltas:
            factors.append(d / deltas[-1] if deltas[-1] > 0 else 0.0)
            stall = stall + 1 if d >= deltas[-1] else 0
            if stall >= STALL_LIMIT or (len(factors) >= 2 and min(factors[-2:]) > 1.0):
                raise _Stalled(factors)
        deltas.append(d)
        if d <= tol * scale or d == 0.0:
            # prev is the returned state; its fixed-point residual is d
            return prev if it > 1 else u, {"iterations": it, "deltas": deltas, "factors": factors,
                                           "residual": d, "relative_residual": d / scale}
        prev = u
    raise _Stalled(factors)


class _Stalled(Exception):
    def __init__(self, factors):
        super().__init__("Picard iteration stalled")
        self.factors = factors


def _run_windows(k, cls, phi, hvec, grid: Grid, tol, forcing, mu=MU_DEFAULT,
                 theta=None, **kw):
    cls = _as_class(k, cls)
    h = _data(hvec, grid.nt)
    report = SolveReport()
    if theta is None:
        if np.any(phi) or np.any(h):
            probe_steps = min(grid.nt - 1, 4 * MIN_STEPS)
            consts = estimate_constants(cls.k, cls, phi, h[:, :probe_steps + 1],
                                        grid.window(0, probe_steps), mu, forcing, **kw)
            theta = select_local_time(consts["r"], consts["C1"], consts["C2"], mu, grid.T, grid.dt)
            report.norms["constants"] = consts
        else:
            theta = grid.T
    steps = max(1, int(round(theta / grid.dt)))
    out = np.empty((grid.nx, grid.nt))
    out[:, 0] = phi
    n0 = 0
    restarts = 0
    state = PicardState(Field(grid, np.zeros((grid.nx, grid.nt))), theta=theta)
    while n0 < grid.nt - 1:
        n1 = min(grid.nt - 1, n0 + steps)
        if n1 - n0 < MIN_STEPS and n1 - n0 < grid.nt - 1:
            if n1 < grid.nt - 1:
                raise ThetaUnderflow(f"window of {n1 - n0} steps below {MIN_STEPS}")
            n0 = max(0, n1 - MIN_STEPS)
        wgrid = grid.window(n0, n1)
        if forcing is not None:
            forcing.offset = n0
        try:
            u, info = _picard_window(cls.k, cls, out[:, n0], h[:, n0:n1 + 1], wgrid, tol, forcing, **kw)
        except _Stalled:
            steps //= 2
            restarts += 1
            if steps < MIN_STEPS:
                raise ContractionFailed("Picard iteration failed to contract at the smallest window")
            continue
        if info["factors"] and max(info["factors"]) > CONTRACTION_TARGET and steps // 2 >= MIN_STEPS:
            steps //= 2
            restarts += 1
            continue
        out[:, n0:n1 + 1] = u.values
        report.windows.append({"t0": n0 * grid.dt, "t1": n1 * grid.dt, "steps": n1 - n0, **info})
        report.iterations += info["iterations"]
        report.contraction.append(max(info["factors"]) if info["factors"] else 0.0)
        n0 = n1
    state.iterate = Field(grid, out)
    state.theta = steps * grid.dt
    state.restarts = restarts
    report.residuals["fixed_point"] = [w["residual"] for w in report.windows]
    report.norms["theta"] = state.theta
    report.norms["restarts"] = restarts
    return state.iterate, report


def solve_kdv(k, cls, phi, hvec, T=None, tol=1e-8, grid: Grid | None = None, **kw):
    """Solve u_t + u_x + u_xxx + u u_x = 0, B_k u = h on ``grid`` (horizon T)."""
    if grid is None:
        raise ValueError("a grid is required")
    if T is not None and abs(T - grid.T) > 1e-12 * grid.T:
        grid = Grid(grid.L, T, grid.nx, grid.nt)
    return _run_windows(k, cls, np.asarray(phi, dtype=float), hvec, grid, tol, None, **kw)


def solve_linearized(k, cls, a_field, phi, f, hvec, grid: Grid, tol=1e-8, **kw):
    """Solve u_t + u_x + u_xxx + (a u)_x = f, B_k u = h by the same iteration."""
    a = a_field.values if isinstance(a_field, Field) else np.asarray(a_field, dtype=float)
    fv = None if f is None else np.asarray(f, dtype=float)
    forcing = _SlicedForcing(a, fv, grid)
    return _run_windows(k, cls, np.asarray(phi, dtype=float), hvec, grid, tol, forcing, **kw)


class _SlicedForcing:
    """Linearized forcing that follows the current window's time offset."""

    def __init__(self, a, f, grid: Grid):
        self.a, self.f, self.grid = a, f, grid
        self.offset = 0

    def __call__(self, v: Field, delta):
        n = v.grid.nt
        sl = slice(self.offset, self.offset + n)
        f = None if self.f is None else self.f[:, sl]
        return linearized_forcing(self.a[:, sl], f)(v, delta)
