"""Grids, boundary-condition classes, boundary data and trace operators.

Boundary functionals are written row-wise as

    B_i u = sum_j a[i, j] d^j u(0, t) + b[i, j] d^j u(L, t),   i = 0, 1, 2

and each admissible coefficient set falls into exactly one of four classes.
Within a class every row is normalised by its leading coefficient, split into
a principal trace (``apply_Bk0``) and a lower-order remainder (``apply_Bk1``),
and reordered so that the triple reads, e.g. for class 1,
``(u(0), u(L), u_x(L))``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from .errors import (ExcludedSobolevIndex, GridTooCoarse, NoClassMatch,
                     AmbiguousClass)

NONZERO_TOL = 1e-12

# (name, coefficient row, endpoint 0 -> x=0 / 1 -> x=L, principal derivative order)
_ROWS = {
    "A1": (0, 0, 0),
    "A2": (0, 0, 2),
    "B1": (1, 1, 0),
    "B2": (1, 1, 2),
    "C": (2, 1, 1),
}

CLASS_ROWS = {
    1: ("A1", "B1", "C"),
    2: ("A1", "C", "B2"),
    3: ("A2", "B1", "C"),
    4: ("A2", "C", "B2"),
}


def _nz(v):
    return abs(v) > NONZERO_TOL


def _z(v):
    return abs(v) <= NONZERO_TOL


def hypotheses(a, b):
    """Return the dict ``{name: bool}`` for the five coefficient hypotheses."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return {
        "A1": _z(a[0, 2]) and _z(a[0, 1]) and _nz(a[0, 0])
        and _z(b[0, 2]) and _z(b[0, 1]) and _z(b[0, 0]),
        "A2": _nz(a[0, 2]) and _z(b[0, 2]),
        "B1": _z(a[1, 2]) and _z(a[1, 1]) and _z(a[1, 0]) and _nz(b[1, 0])
        and _z(b[1, 2]) and _z(b[1, 1]),
        "B2": _nz(b[1, 2]) and _z(a[1, 2]),
        "C": _z(a[2, 2]) and _z(a[2, 1]) and _nz(b[2, 1]) and _z(b[2, 2]),
    }


@dataclass(frozen=True)
class Grid:
    L: float
    T: float
    nx: int
    nt: int

    def __post_init__(self):
        if self.nx < 8 or self.nt < 8:
            raise GridTooCoarse(f"need nx, nt >= 8, got nx={self.nx}, nt={self.nt}")
        if not (self.L > 0 and self.T > 0):
            raise ValueError("L and T must be positive")

    @property
    def x(self):
        return np.linspace(0.0, self.L, self.nx)

    @property
    def t(self):
        return np.linspace(0.0, self.T, self.nt)

    @property
    def dx(self):
        return self.L / (self.nx - 1)

    @property
    def dt(self):
        return self.T / (self.nt - 1)

    def window(self, n0, n1):
        """Sub-grid over time nodes ``n0..n1`` (inclusive), restarted at t=0."""
        return Grid(self.L, (n1 - n0) * self.dt, self.nx, n1 - n0 + 1)


@dataclass(frozen=True, eq=False)
class BoundaryClass:
    k: int
    a: np.ndarray
    b: np.ndarray

    @property
    def delta(self):
        return 1 if self.k == 4 else 0

    @property
    def rows(self):
        return CLASS_ROWS[self.k]

    def principal(self):
        """List of (endpoint, derivative order) for the class-ordered triple."""
        return [(_ROWS[r][1], _ROWS[r][2]) for r in self.rows]

    def lead(self, r):
        i, end, p = _ROWS[r]
        return (self.a if end == 0 else self.b)[i, p]

    def normalised_rows(self):
        """Class-ordered 3x3 coefficient pairs with unit leading coefficient."""
        a_out = np.zeros((3, 3))
        b_out = np.zeros((3, 3))
        for n, r in enumerate(self.rows):
            i = _ROWS[r][0]
            c = self.lead(r)
            a_out[n] = self.a[i] / c
            b_out[n] = self.b[i] / c
        return a_out, b_out


def validate_class(a, b):
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    if a.shape != (3, 3) or b.shape != (3, 3):
        raise ValueError("coefficient matrices must be 3x3")
    h = hypotheses(a, b)
    matches = [k for k, rows in CLASS_ROWS.items() if all(h[r] for r in rows)]
    if not matches:
        failed = [r for r, ok in h.items() if not ok]
        raise NoClassMatch(f"coefficients satisfy no class; failing hypotheses: {failed}")
    if len(matches) > 1:
        raise AmbiguousClass(f"classes {matches} all match")
    a.setflags(write=False)
    b.setflags(write=False)
    return BoundaryClass(matches[0], a, b)


def class_template(k, a30=0.0, b30=0.0, row1=None, row2=None):
    """Coefficient matrices for class ``k`` with unit leading coefficients.

    ``row1``/``row2`` optionally give the lower-order entries
    ``(a_i0, a_i1, b_i0, b_i1)`` of the A2 / B2 rows (ignored for A1 / B1).
    """
    a = np.zeros((3, 3))
    b = np.zeros((3, 3))
    rows = CLASS_ROWS[k]
    if "A1" in rows:
        a[0, 0] = 1.0
    else:
        a[0, 2] = 1.0
        if row1 is not None:
            a[0, 0], a[0, 1], b[0, 0], b[0, 1] = row1
    if "B1" in rows:
        b[1, 0] = 1.0
    else:
        b[1, 2] = 1.0
        if row2 is not None:
            a[1, 0], a[1, 1], b[1, 0], b[1, 1] = row2
    b[2, 1] = 1.0
    a[2, 0] = a30
    b[2, 0] = b30
    return a, b


def excluded_index(s):
    return abs((s - 0.5) - round(s - 0.5)) < 1e-12 and s > 0


def sobolev_exponents(k, s=0.0):
    """Time-Sobolev exponents of the three class-ordered boundary slots."""
    if excluded_index(s):
        raise ExcludedSobolevIndex(f"s={s} is an excluded compatibility threshold")
    up, mid, lo = (s + 1) / 3, s / 3, (s - 1) / 3
    return {1: (up, up, mid), 2: (up, mid, lo), 3: (lo, up, mid), 4: (lo, lo, mid)}[k]


@dataclass(frozen=True, eq=False)
class BoundaryData:
    """Three class-ordered time signals, shape (3, nt)."""
    h: np.ndarray
    sigma: tuple = (1 / 3, 1 / 3, 0.0)

    def __post_init__(self):
        h = np.asarray(self.h, dtype=float)
        if h.ndim != 2 or h.shape[0] != 3:
            raise ValueError("boundary data must have shape (3, nt)")
        object.__setattr__(self, "h", h)

    @classmethod
    def zeros(cls, nt, k=1, s=0.0):
        return cls(np.zeros((3, nt)), sobolev_exponents(k, s))

    @property
    def h1(self):
        return self.h[0]

    @property
    def h2(self):
        return self.h[1]

    @property
    def h3(self):
        return self.h[2]

    def vanishes_at_start(self, tol=1e-12):
        return bool(np.all(np.abs(self.h[:, 0]) <= tol))

    def __sub__(self, other):
        return BoundaryData(self.h - other.h, self.sigma)

    def __add__(self, other):
        return BoundaryData(self.h + other.h, self.sigma)


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != (self.grid.nx, self.grid.nt):
            raise ValueError(f"field shape {v.shape} does not match grid "
                             f"({self.grid.nx}, {self.grid.nt})")
        if not np.all(np.isfinite(v)):
            raise ValueError("field has non-finite entries")
        object.__setattr__(self, "values", v)


@dataclass(frozen=True, eq=False)
class TraceSet:
    u0: np.ndarray
    u1: np.ndarray
    ux0: np.ndarray
    ux1: np.ndarray
    uxx0: np.ndarray
    uxx1: np.ndarray

    def get(self, end, p):
        return (self.u0, self.ux0, self.uxx0)[p] if end == 0 else (self.u1, self.ux1, self.uxx1)[p]


@lru_cache(maxsize=None)
def fd_weights(offsets, order):
    """Finite-difference weights for the ``order``-th derivative on integer offsets."""
    offsets = np.asarray(offsets, dtype=float)
    n = len(offsets)
    A = np.vander(offsets, n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = factorial(order)
    return tuple(np.linalg.solve(A, rhs))


def _one_sided(values, h, order, npts, at_left):
    w = np.array(fd_weights(tuple(range(npts)), order))
    block = values[:npts] if at_left else values[::-1][:npts]
    sgn = 1.0 if at_left else (-1.0) ** order
    return sgn * np.tensordot(w, block, axes=(0, 0)) / h ** order


def extract_traces(u: Field) -> TraceSet:
    """Boundary traces: 4-point first and 5-point second derivative stencils."""
    if u.grid.nx < 8:
        raise GridTooCoarse("extract_traces needs nx >= 8")
    v, h = u.values, u.grid.dx
    return TraceSet(
        u0=v[0].copy(), u1=v[-1].copy(),
        ux0=_one_sided(v, h, 1, 4, True), ux1=_one_sided(v, h, 1, 4, False),
        uxx0=_one_sided(v, h, 2, 5, True), uxx1=_one_sided(v, h, 2, 5, False),
    )


def _row_value(a_row, b_row, tr: TraceSet):
    out = 0.0
    for j in range(3):
        if a_row[j] != 0.0:
            out = out + a_row[j] * tr.get(0, j)
        if b_row[j] != 0.0:
            out = out + b_row[j] * tr.get(1, j)
    return out + np.zeros_like(tr.u0)


def apply_Bk0(cls: BoundaryClass, tr: TraceSet, s=0.0) -> BoundaryData:
    h = np.array([tr.get(end, p) for end, p in cls.principal()])
    return BoundaryData(h, sobolev_exponents(cls.k, s))


def apply_Bk1(cls: BoundaryClass, tr: TraceSet, s=0.0) -> BoundaryData:
    a_n, b_n = cls.normalised_rows()
    out = []
    for n, (end, p) in enumerate(cls.principal()):
        a_row, b_row = a_n[n].copy(), b_n[n].copy()
        (a_row if end == 0 else b_row)[p] = 0.0
        out.append(_row_value(a_row, b_row, tr))
    return BoundaryData(np.array(out), sobolev_exponents(cls.k, s))


def apply_Bk(cls: BoundaryClass, tr: TraceSet, s=0.0) -> BoundaryData:
    """Full normalised, class-ordered boundary functionals."""
    return apply_Bk0(cls, tr, s) + apply_Bk1(cls, tr, s)


def raw_functionals(a, b, tr: TraceSet):
    """Unnormalised ``B_i u`` in the original row order (direct sum formula)."""
    a = np.asarray(a)
    b = np.asarray(b)
    return np.array([_row_value(a[i], b[i], tr) for i in range(3)])


def class_data_from_raw(cls: BoundaryClass, h_raw) -> np.ndarray:
    """Map raw row data ``B_i u = h_i`` to class-ordered normalised slots."""
    h_raw = np.asarray(h_raw, dtype=float)
    return np.array([h_raw[_ROWS[r][0]] / cls.lead(r) for r in cls.rows])
