"""Manufactured solutions: exact fields with matching forcing and boundary data."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import sympy as sp

from .domain import BoundaryClass, Grid

X, T = sp.symbols("x t", real=True)


@dataclass(frozen=True, eq=False)
class Manufactured:
    """Callables for w and the derivatives needed by the KdV-type operators."""
    expr: sp.Expr

    def __post_init__(self):
        fn = lambda e: sp.lambdify((X, T), e, "numpy")
        object.__setattr__(self, "_w", [fn(sp.diff(self.expr, X, p)) for p in range(4)])
        object.__setattr__(self, "_wt", fn(sp.diff(self.expr, T)))

    def _eval(self, f, x, t):
        x = np.asarray(x, dtype=float)
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(f(x, t), np.broadcast(x, t).shape).astype(float)

    def values(self, grid: Grid):
        return self._eval(self._w[0], grid.x[:, None], grid.t[None, :])

    def dx(self, p, x, t):
        return self._eval(self._w[p], x, t)

    def forcing(self, grid: Grid, transport=False, delta=0.0, nonlinear=False):
        """f = w_t + w_xxx + delta w (+ w_x) (+ w w_x) on the grid."""
        x, t = grid.x[:, None], grid.t[None, :]
        w = self._eval(self._w[0], x, t)
        wx = self._eval(self._w[1], x, t)
        f = self._eval(self._wt, x, t) + self._eval(self._w[3], x, t) + delta * w
        if transport:
            f = f + wx
        if nonlinear:
            f = f + w * wx
        return f

    def boundary(self, cls: BoundaryClass, grid: Grid, principal_only=False):
        """Class-ordered normalised boundary data ``B_{k,0} w`` or ``B_k w``."""
        t = grid.t
        tr = {(end, p): self.dx(p, end * grid.L, t) for end in (0, 1) for p in range(3)}
        if principal_only:
            return np.array([tr[e, p] for e, p in cls.principal()])
        a_n, b_n = cls.normalised_rows()
        return np.array([sum(a_n[i, p] * tr[0, p] + b_n[i, p] * tr[1, p] for p in range(3))
                         for i in range(3)])


def manufactured(expr) -> Manufactured:
    """Build from a sympy expression (or string) in ``x`` and ``t``."""
    if isinstance(expr, str):
        expr = sp.sympify(expr, locals={"x": X, "t": T})
    return Manufactured(expr)
