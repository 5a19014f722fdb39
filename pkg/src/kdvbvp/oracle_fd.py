"""Finite-difference reference solver.

Crank-Nicolson in time for ``u_xxx + c u_x + delta u``; the nonlinearity
``u u_x`` by a predictor-corrector sweep.  Interior rows use the centred
five-point third-derivative stencil (skewed at the first interior node) and the
centred three-point first derivative; the three boundary functionals replace
the rows at x = 0 and the last two rows.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sps
from scipy.sparse.linalg import splu

from .domain import BoundaryClass, BoundaryData, Field, Grid, fd_weights, validate_class, class_template
from .errors import SingularBoundarySystem
from .manufactured import Manufactured

PIVOT_TOL = 1e-13


def _stencil_row(n, i, offsets, order, h):
    row = np.zeros(n)
    w = np.array(fd_weights(tuple(offsets), order)) / h ** order
    row[i + np.asarray(offsets)] = w
    return row


def _end_row(n, h, end, p):
    """Trace functional d^p u at x=0 (end 0) or x=L (end 1) as a row vector."""
    npts = (1, 4, 5)[p]
    if end == 0:
        return _stencil_row(n, 0, range(npts), p, h)
    return _stencil_row(n, n - 1, range(-npts + 1, 1), p, h)


def boundary_rows(cls: BoundaryClass, n, h, principal_only=False):
    """3 x n matrix of class-ordered normalised boundary functionals."""
    rows = np.zeros((3, n))
    if principal_only:
        for i, (end, p) in enumerate(cls.principal()):
            rows[i] = _end_row(n, h, end, p)
        return rows
    a_n, b_n = cls.normalised_rows()
    for i in range(3):
        for p in range(3):
            if a_n[i, p]:
                rows[i] += a_n[i, p] * _end_row(n, h, 0, p)
            if b_n[i, p]:
                rows[i] += b_n[i, p] * _end_row(n, h, 1, p)
    return rows


def interior_operators(n, h):
    """Sparse D3 and D1 on rows 1..n-3 (rows 0, n-2, n-1 left empty)."""
    D3 = sps.lil_matrix((n, n))
    D1 = sps.lil_matrix((n, n))
    w3c = np.array(fd_weights((-2, -1, 0, 1, 2), 3)) / h ** 3
    w3s = np.array(fd_weights((-1, 0, 1, 2, 3), 3)) / h ** 3
    for i in range(1, n - 2):
        if i == 1:
            D3[i, 0:5] = w3s
        else:
            D3[i, i - 2:i + 3] = w3c
        D1[i, i - 1] = -0.5 / h
        D1[i, i + 1] = 0.5 / h
    return D3.tocsr(), D1.tocsr()


def _factor(M):
    try:
        lu = splu(M.tocsc())
    except RuntimeError as exc:
        raise SingularBoundarySystem(f"boundary system is singular: {exc}") from exc
    d = np.abs(lu.U.diagonal())
    if d.min() <= PIVOT_TOL * d.max():
        raise SingularBoundarySystem(f"boundary system nearly singular (pivot ratio {d.min() / d.max():.2e})")
    return lu


def solve_fd(k, cls, phi, hvec, grid: Grid, nonlinear=True, transport=True, delta=0.0,
             forcing=None, principal_only=False) -> Field:
    """Reference solve of u_t + u_xxx + c u_x + delta u (+ u u_x) = f with B u = h.

    ``hvec`` holds class-ordered normalised data for the full functionals
    (or the principal traces when ``principal_only``).
    """
    if cls is None:
        cls = validate_class(*class_template(k))
    n, dx, dt = grid.nx, grid.dx, grid.dt
    h = np.zeros((3, grid.nt)) if hvec is None else (
        hvec.h if isinstance(hvec, BoundaryData) else np.asarray(hvec, dtype=float))
    D3, D1 = interior_operators(n, dx)
    A = D3 + (D1 if transport else 0 * D1)
    P = sps.diags(np.r_[0.0, np.ones(n - 3), 0.0, 0.0])
    A = A + delta * P
    B = np.zeros((n, n))
    B[[0, n - 2, n - 1]] = boundary_rows(cls, n, dx, principal_only)
    lhs = P + 0.5 * dt * A + sps.csr_matrix(B)
    rhs_op = (P - 0.5 * dt * A).tocsr()
    lu = _factor(lhs)

    u = np.empty((n, grid.nt))
    u[:, 0] = phi
    mask = P.diagonal()
    f = None if forcing is None else np.asarray(forcing, dtype=float)

    def nl(v):
        return mask * v * (D1 @ v)

    for m in range(grid.nt - 1):
        base = rhs_op @ u[:, m]
        if f is not None:
            base = base + 0.5 * dt * mask * (f[:, m] + f[:, m + 1])
        bc = h[:, m + 1]

        def step(src):
            r = base - dt * src
            r[0], r[n - 2], r[n - 1] = bc
            return lu.solve(r)

        if nonlinear:
            pred = step(nl(u[:, m]))
            u[:, m + 1] = step(nl(0.5 * (u[:, m] + pred)))
        else:
            u[:, m + 1] = step(0.0)
    return Field(grid, u)


def discrete_energy(u: Field):
    """Trapezoidal int u^2 dx at every time node."""
    v = u.values
    w = np.full(u.grid.nx, u.grid.dx)
    w[0] = w[-1] = u.grid.dx / 2
    return w @ v ** 2


def mms_convergence(k, cls, w: Manufactured, L=1.0, T=0.05, levels=(32, 64, 128),
                    nt_factor=2, nonlinear=False, transport=True, delta=0.0,
                    principal_only=False, order_tol=0.3):
    """Joint space-time refinement; returns dict with errors and fitted orders.

    ``dt`` is tied to ``dx`` so the order is the common order in space and
    time; ``orders`` holds the successive log2 error ratios.  The study is
    flagged when any ratio strays from the design order 2 by more than
    ``order_tol`` (pre-asymptotic or under-resolved fields).
    """
    if cls is None:
        cls = validate_class(*class_template(k))
    errs, hs = [], []
    for nxm in levels:
        g = Grid(L, T, nxm + 1, nt_factor * nxm + 1)
        f = w.forcing(g, transport, delta, nonlinear)
        hb = w.boundary(cls, g, principal_only)
        exact = w.values(g)
        u = solve_fd(k, cls, exact[:, 0], hb, g, nonlinear, transport, delta, f, principal_only)
        errs.append(float(np.sqrt(g.dx * g.dt * np.sum((u.values - exact) ** 2))
                          / np.sqrt(g.dx * g.dt * np.sum(exact ** 2))))
        hs.append(g.dx)
    errs = np.array(errs)
    orders = np.log(errs[:-1] / errs[1:]) / np.log(np.array(hs[:-1]) / np.array(hs[1:]))
    flagged = bool(np.any(np.abs(orders - 2.0) > order_tol))
    return {"errors": errs.tolist(), "dx": hs, "orders": orders.tolist(),
            "order": float(orders[-1]), "flagged": flagged}
