"""Whole-line Airy propagator, data extension and Duhamel integral.

Two evaluation paths are provided.  ``airy_group`` and ``duhamel`` act on
padded periodic grids via the FFT and are the direct discretisation of the
multiplier ``e^{(i xi^3 - d) t}``.  ``LineOperator`` evaluates the same
solution by continuous Fourier quadrature (no periodisation) and is what the
interval solvers use, since it returns traces at the exact endpoints.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .domain import BoundaryData, Grid, CLASS_ROWS, _ROWS, sobolev_exponents
from .errors import PadExceeded, QuadratureNotConverged
from .quadrature import (end_derivatives, hat_transform_matrix, panel_nodes, phi1,
                         phi2, tail_estimate, taper_extension)
from .spectral import default_damping

EXT_WIDTH = 0.25
TAIL_TOL = 1e-3
BAND_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class LineField:
    """Samples on ``x0 + i dx`` covering [-L_pad, L + L_pad]; extra axes allowed."""
    x0: float
    dx: float
    values: np.ndarray
    L: float
    L_pad: float

    @property
    def x(self):
        return self.x0 + self.dx * np.arange(self.values.shape[0])

    def norm(self):
        return float(np.sqrt(self.dx * np.sum(np.abs(self.values) ** 2, axis=0)))

    def restrict(self):
        """Values on the original interval nodes."""
        n_pad = int(round(-self.x0 / self.dx))
        n_in = int(round(self.L / self.dx)) + 1
        return self.values[n_pad:n_pad + n_in]


def default_pad(grid: Grid, bandwidth=None):
    xi = np.pi / grid.dx if bandwidth is None else bandwidth
    return 3 * xi ** 2 * grid.T + 2 * grid.L


def extend_zero(phi, grid: Grid, L_pad=None) -> LineField:
    """Zero extension of interval samples onto [-L_pad, L + L_pad]."""
    phi = np.asarray(phi, dtype=float)
    L_pad = default_pad(grid) if L_pad is None else L_pad
    n_pad = int(np.ceil(L_pad / grid.dx))
    pad = np.zeros((n_pad,) + phi.shape[1:])
    vals = np.concatenate([pad, phi, pad])
    return LineField(-n_pad * grid.dx, grid.dx, vals, grid.L, n_pad * grid.dx)


def extend_smooth(phi, grid: Grid, width=None, L_pad=None) -> LineField:
    """Cubic Taylor continuation times a smooth cutoff of length ``width`` on each side."""
    phi = np.asarray(phi, dtype=float)
    width = EXT_WIDTH * grid.L if width is None else width
    L_pad = max(default_pad(grid) if L_pad is None else L_pad, width)
    n_pad = int(np.ceil(L_pad / grid.dx))
    n_w = min(n_pad, max(4, int(np.ceil(width / grid.dx))))
    right = taper_extension(phi, grid.dx, n_w)
    left = taper_extension(phi, grid.dx, n_w, at_left=True)[::-1]
    zeros = np.zeros((n_pad - n_w,) + phi.shape[1:])
    vals = np.concatenate([zeros, left, phi, right, zeros])
    return LineField(-n_pad * grid.dx, grid.dx, vals, grid.L, n_pad * grid.dx)


def effective_bandwidth(values, dx, tol=BAND_TOL):
    """Largest |xi| whose FFT amplitude exceeds ``tol`` times the peak."""
    spec = np.abs(np.fft.rfft(values, axis=0))
    if spec.ndim > 1:
        spec = spec.max(axis=tuple(range(1, spec.ndim)))
    peak = spec.max()
    if peak == 0:
        return 0.0
    idx = np.nonzero(spec > tol * peak)[0][-1]
    return 2 * np.pi * idx / (dx * len(values))


def _wavenumbers(n, dx):
    return 2 * np.pi * np.fft.fftfreq(n, d=dx)


def airy_group(psi: LineField, t, k, delta=None, check_pad=True) -> LineField:
    """Apply ``e^{(i xi^3 - delta) t}`` on the padded periodic grid."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    d = default_damping(k) if delta is None else delta
    xi_eff = effective_bandwidth(psi.values, psi.dx) if check_pad else 0.0
    if 3 * xi_eff ** 2 * t > psi.L_pad:
        raise PadExceeded(f"dispersive reach {3 * xi_eff ** 2 * t:.3g} exceeds pad {psi.L_pad:.3g}")
    xi = _wavenumbers(psi.values.shape[0], psi.dx)
    mult = np.exp((1j * xi ** 3 - d) * t)
    mult = mult.reshape((-1,) + (1,) * (psi.values.ndim - 1))
    out = np.fft.ifft(mult * np.fft.fft(psi.values, axis=0), axis=0).real
    return LineField(psi.x0, psi.dx, out, psi.L, psi.L_pad)


def _etd_coefficients(a, dt):
    z = a * dt
    return np.exp(z), dt * (phi1(z) - phi2(z)), dt * phi2(z)


def duhamel(f: LineField, t, k, delta=None, check_pad=True) -> LineField:
    """``int_0^t W(t - tau) f(tau) d tau`` at every node of the uniform time grid ``t``.

    ``f.values`` has shape (nx_line, nt).  The forcing is taken piecewise
    linear in time and each Fourier mode is integrated exactly.
    """
    d = default_damping(k) if delta is None else delta
    t = np.asarray(t, dtype=float)
    xi_eff = effective_bandwidth(f.values, f.dx) if check_pad else 0.0
    if 3 * xi_eff ** 2 * t[-1] > f.L_pad:
        raise PadExceeded(f"dispersive reach {3 * xi_eff ** 2 * t[-1]:.3g} exceeds pad {f.L_pad:.3g}")
    xi = _wavenumbers(f.values.shape[0], f.dx)
    fh = np.fft.fft(f.values, axis=0)
    e, c0, c1 = _etd_coefficients(1j * xi ** 3 - d, t[1] - t[0])
    F = np.zeros_like(fh)
    for n in range(len(t) - 1):
        F[:, n + 1] = e * F[:, n] + c0 * fh[:, n] + c1 * fh[:, n + 1]
    out = np.fft.ifft(F, axis=0).real
    return LineField(f.x0, f.dx, out, f.L, f.L_pad)


def _xi_nodes(R, T, span, phase=2 * np.pi, npts=16):
    return panel_nodes(R, lambda r: 3 * r * r * T + span, phase, npts)


def _matrix_phi(A):
    """(e^A, phi1(A), phi2(A)) from one exponential of an augmented block matrix."""
    n = A.shape[0]
    big = np.zeros((3 * n, 3 * n))
    big[:n, :n] = A
    big[:n, n:2 * n] = np.eye(n)
    big[n:2 * n, 2 * n:] = np.eye(n)
    E = expm(big)
    return E[:n, :n], E[:n, n:2 * n], E[:n, 2 * n:]


class PolynomialPart:
    """Hermite polynomial matching endpoint derivatives, evolved exactly.

    A polynomial of degree ``2m + 1`` is an exact whole-line solution
    generator: ``-d^3 - delta`` maps it into itself, so its evolution and
    Duhamel integral reduce to a small linear ODE for the coefficients.
    ``m = 3`` balances the smoothness of the remainder against the noise
    amplification of the one-sided derivative estimates.
    """

    def __init__(self, x, t, damping, m=3):
        self.m = m
        self.deg = 2 * m + 1
        self.x = x
        self.dx = x[1] - x[0]
        self.t = t
        n = self.deg + 1
        powers = np.arange(n)
        # rows: derivative p at x=0 then at x=1
        H = np.zeros((2 * (m + 1), n))
        for p in range(m + 1):
            for i in range(p, n):
                c = np.prod(np.arange(i - p + 1, i + 1)) if p else 1.0
                H[p, i] = c * (1.0 if i == p else 0.0)
                H[m + 1 + p, i] = c
        self.Hinv = np.linalg.inv(H)
        self.V = x[:, None] ** powers[None, :]
        D3 = np.zeros((n, n))
        for i in range(3, n):
            D3[i - 3, i] = i * (i - 1) * (i - 2)
        self.M = -D3 - damping * np.eye(n)
        self.dV = {}
        for end in (0, 1):
            for p in range(3):
                row = np.zeros(n)
                for i in range(p, n):
                    c = np.prod(np.arange(i - p + 1, i + 1)) if p else 1.0
                    row[i] = c * (float(end) ** (i - p) if i > p else 1.0)
                self.dV[end, p] = row
        dt = t[1] - t[0]
        self.e, p1, p2 = _matrix_phi(self.M * dt)
        self.c0 = dt * (p1 - p2)
        self.c1 = dt * p2

    def fit(self, g):
        """Coefficients (deg+1, ...) of the Hermite interpolant of sampled ``g``."""
        m = self.m
        left = end_derivatives(g, self.dx, m, at_left=True)
        right = end_derivatives(g, self.dx, m)
        return self.Hinv @ np.array(left + right)

    def evolve(self, c0):
        """Coefficients at every time node for initial coefficients ``c0``."""
        out = np.empty((len(c0), len(self.t)))
        out[:, 0] = c0
        for n in range(len(self.t) - 1):
            out[:, n + 1] = self.e @ out[:, n]
        return out

    def duhamel(self, cf):
        out = np.zeros_like(cf)
        for n in range(cf.shape[1] - 1):
            out[:, n + 1] = self.e @ out[:, n] + self.c0 @ cf[:, n] + self.c1 @ cf[:, n + 1]
        return out


class LineOperator:
    """Continuous-Fourier evaluation of a whole-line solution on (0, 1) x [0, T].

    ``extension`` selects how interval data are continued to the line:

    * "poly": a Hermite polynomial matching the endpoint derivatives is split
      off and evolved exactly; the remainder vanishes to high order at both
      ends and is extended by zero.
    * "smooth": Taylor continuation times a C-infinity cutoff over ``width``.
    * "zero": plain zero extension (transform exact for the piecewise-linear
      interpolant).
    """

    def __init__(self, k, x, t, damping=None, R=None, width=EXT_WIDTH,
                 extension="poly", phase=2 * np.pi, npts=16, tail_tol=TAIL_TOL):
        self.k = k
        self.x = np.asarray(x, dtype=float)
        self.t = np.asarray(t, dtype=float)
        self.dx = self.x[1] - self.x[0]
        self.dt = self.t[1] - self.t[0]
        self.damping = default_damping(k) if damping is None else float(damping)
        if extension not in ("poly", "smooth", "zero"):
            raise ValueError(f"unknown extension {extension!r}")
        self.extension = extension
        self.n_w = max(4, int(np.ceil(width / self.dx))) if extension == "smooth" else 0
        if R is None:
            R = min(1.5 * (np.pi / self.dt) ** (1 / 3), np.pi / self.dx)
        self.R = float(R)
        self.tail_tol = tail_tol
        x_lo = self.x[0] - self.n_w * self.dx
        n_e = len(self.x) + 2 * self.n_w
        span = self.x[-1] - x_lo
        self.xi, self.w = _xi_nodes(self.R, self.t[-1], span + 1.0, phase, npts)
        if extension == "zero":
            self.Fx = hat_transform_matrix(self.xi, x_lo, self.dx, n_e)
        else:
            # extended samples are smooth and compactly supported: the
            # trapezoid sum is spectrally accurate below the grid Nyquist
            xs = x_lo + self.dx * np.arange(n_e)
            wt = np.full(n_e, self.dx)
            wt[0] = wt[-1] = self.dx / 2
            self.Fx = wt[None, :] * np.exp(-1j * np.outer(self.xi, xs))
        self.poly = PolynomialPart(self.x, self.t, self.damping) if extension == "poly" else None
        self.Xe = np.exp(1j * np.outer(self.x, self.xi))
        self.a = 1j * self.xi ** 3 - self.damping
        self.etd = _etd_coefficients(self.a, self.dt)
        self.last_tail = 0.0

    def _extend(self, g):
        g = np.asarray(g, dtype=float)
        if self.n_w == 0:
            return g
        right = taper_extension(g, self.dx, self.n_w)
        left = taper_extension(g, self.dx, self.n_w, at_left=True)[::-1]
        return np.concatenate([left, g, right])

    def transform(self, g):
        """Fourier transform of the extended space samples (axis 0)."""
        return self.Fx @ self._extend(g)

    def _check_tail(self, env, ref):
        tail = tail_estimate(env / np.pi, self.w)
        self.last_tail = float(tail / ref) if ref > 0 else 0.0
        if self.last_tail > self.tail_tol:
            raise QuadratureNotConverged(
                f"line integrand tail {self.last_tail:.2e} exceeds {self.tail_tol:.0e} at R={self.R:.1f}")

    def modes(self, phi, f=None):
        """Solution representation (Qw, C): weighted Fourier modes and polynomial coefficients."""
        nt = len(self.t)
        phi = np.asarray(phi, dtype=float)
        scale = np.abs(phi).max()
        C = None
        if self.poly is not None:
            c0 = self.poly.fit(phi)
            C = self.poly.evolve(c0)
            phi = phi - self.poly.V @ c0
        psi = self.transform(phi)
        Q = np.exp(np.outer(self.a, self.t)) * psi[:, None]
        env = np.abs(psi)
        if f is not None:
            f = np.asarray(f, dtype=float)
            scale += self.t[-1] * np.abs(f).max()
            if self.poly is not None:
                cf = self.poly.fit(f)
                C = C + self.poly.duhamel(cf)
                f = f - self.poly.V @ cf
            fh = self.transform(f)
            e, c0, c1 = self.etd
            F = np.zeros((len(self.xi), nt), dtype=complex)
            for n in range(nt - 1):
                F[:, n + 1] = e * F[:, n] + c0 * fh[:, n] + c1 * fh[:, n + 1]
            Q += F
            env = env + self.t[-1] * np.abs(fh).max(axis=1)
        self._check_tail(env, scale)
        return Q * (self.w / np.pi)[:, None], C

    def field(self, modes):
        Qw, C = modes
        out = (self.Xe @ Qw).real
        return out if C is None else out + self.poly.V @ C

    def trace(self, modes, end, p):
        Qw, C = modes
        xe = self.x[0] if end == 0 else self.x[-1]
        out = (((1j * self.xi) ** p * np.exp(1j * self.xi * xe)) @ Qw).real
        return out if C is None else out + self.poly.dV[end, p] @ C

    def principal_traces(self, modes):
        return np.array([self.trace(modes, _ROWS[r][1], _ROWS[r][2]) for r in CLASS_ROWS[self.k]])


def line_operator_for(k, grid: Grid, delta=None, **kw):
    d = default_damping(k) if delta is None else float(delta)
    x = np.linspace(0.0, 1.0, grid.nx)
    t = np.linspace(0.0, grid.T / grid.L ** 3, grid.nt)
    return LineOperator(k, x, t, d * grid.L ** 3, **kw)


def whole_line_traces(psi, f, k, grid: Grid, delta=None, **kw):
    """Class-ordered principal traces ``B_{k,0} q`` of the whole-line solution (physical units)."""
    op = line_operator_for(k, grid, delta, **kw)
    ff = None if f is None else np.asarray(f) * grid.L ** 3
    h = op.principal_traces(op.modes(psi, ff))
    scale = np.array([grid.L ** -_ROWS[r][2] for r in CLASS_ROWS[k]])
    return BoundaryData(h * scale[:, None], sobolev_exponents(k))
