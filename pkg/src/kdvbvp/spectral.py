"""Characteristic roots, boundary determinants and kernel ratios on s = i rho^3.

With unit interval length the Laplace-transformed linear problem
``s v + d v + v_xxx = 0`` has solutions ``sum_j c_j exp(lambda_j x)`` where the
``lambda_j`` solve ``lambda^3 + d + s = 0`` (``d`` is the damping, zero for
classes 1-3).  The three class-ordered boundary functionals give a 3x3
matrix ``A`` whose row ``i`` is ``lambda_j^p exp(q lambda_j)`` (``q = 1`` for
a functional taken at the right end).  ``Delta`` is ``det A`` and
``Delta_{j,m}`` the determinant of ``A`` with column ``j`` replaced by the
``m``-th unit vector.

All determinants are evaluated as sums of ``coef * exp(E)`` with the largest
``Re E`` factored out, so nothing overflows for large rho, and a convergent
power series in rho replaces direct evaluation near the degenerate point
rho = 0 of classes 1-3.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations, permutations
from math import factorial

import numpy as np

from .errors import DegenerateKernel

SQRT3 = np.sqrt(3.0)
OMEGA = np.array([1j, (SQRT3 - 1j) / 2, -(SQRT3 + 1j) / 2])
RHO_CUTOFF = 1e-3
_SERIES_ORDER = 14

# (derivative order p, evaluated at right end q) per class-ordered row
ROW_SPEC = {
    1: ((0, 0), (0, 1), (1, 1)),
    2: ((0, 0), (1, 1), (2, 1)),
    3: ((2, 0), (0, 1), (1, 1)),
    4: ((2, 0), (1, 1), (2, 1)),
}


def default_damping(k):
    return 1.0 if k == 4 else 0.0


@dataclass(frozen=True)
class SpectralTriple:
    lambda1: complex
    lambda2: complex
    lambda3: complex

    def as_array(self):
        return np.array([self.lambda1, self.lambda2, self.lambda3])


@dataclass(frozen=True)
class KernelRatio:
    value: complex
    weighted: complex
    j: int
    m: int
    k: int
    rho: float


def roots_array(rho, k, damping=None):
    """Ordered roots, shape ``(3,) + rho.shape``.

    For damped classes the roots are ``omega_j * (rho^3 - i d)^(1/3)`` with the
    principal cube root; this is the continuous branch that tends to the
    undamped roots as rho grows (``lambda_1 ~ i rho`` and so on) and starts
    from the cube roots of ``-d`` at rho = 0.
    """
    rho = np.asarray(rho, dtype=float)
    d = default_damping(k) if damping is None else damping
    if d == 0.0:
        lam = np.empty((3,) + rho.shape, dtype=complex)
        re = (SQRT3 / 2) * rho
        lam[0] = 1j * rho
        lam[1] = re - 0.5j * rho
        lam[2] = -re - 0.5j * rho
        return lam
    with np.errstate(divide="ignore", invalid="ignore"):
        big = rho ** 3 > abs(d)
        safe = np.where(big, rho, 1.0)
        far = safe * (1.0 - 1j * d / safe ** 3) ** (1.0 / 3.0)
        near = (rho ** 3 - 1j * d + 0j) ** (1.0 / 3.0)
    c = np.where(big, far, near)
    lam = OMEGA.reshape((3,) + (1,) * rho.ndim) * c
    # the three roots still sum to zero; enforce it on the last one
    lam[2] = -(lam[0] + lam[1])
    return lam


def char_roots(rho, k, damping=None) -> SpectralTriple:
    if rho < 0:
        raise ValueError("rho must be nonnegative")
    lam = roots_array(float(rho), k, damping)
    return SpectralTriple(complex(lam[0]), complex(lam[1]), complex(lam[2]))


# --- symbolic term lists ------------------------------------------------------

def _perm_sign(p):
    s = 1
    p = list(p)
    for i in range(len(p)):
        for j in range(i + 1, len(p)):
            if p[i] > p[j]:
                s = -s
    return s


@lru_cache(maxsize=None)
def _delta_terms(k):
    """Terms of det A: (sign, ((row, col), ...)) over permutations."""
    return tuple((_perm_sign(p), tuple((i, p[i]) for i in range(3)))
                 for p in permutations(range(3)))


@lru_cache(maxsize=None)
def _cofactor_terms(k, j, m):
    """Terms of Delta_{j,m}: cofactor of entry (row m, column j), 1-based j, m."""
    rows = [r for r in range(3) if r != m - 1]
    cols = [c for c in range(3) if c != j - 1]
    sgn = (-1) ** ((m - 1) + (j - 1))
    (r1, r2), (c1, c2) = rows, cols
    return ((sgn, ((r1, c1), (r2, c2))), (-sgn, ((r1, c2), (r2, c1))))


def _eval_terms(terms, k, lam, extra=None):
    """Return (mantissa, scale) with value = mantissa * exp(scale), scale real."""
    spec = ROW_SPEC[k]
    coefs, expos = [], []
    for sgn, entries in terms:
        c = sgn * np.ones_like(lam[0])
        e = np.zeros_like(lam[0])
        for r, col in entries:
            p, q = spec[r]
            if p:
                c = c * lam[col] ** p
            if q:
                e = e + lam[col]
        if extra is not None:
            e = e + extra
        coefs.append(c)
        expos.append(e)
    expos = np.array(expos)
    scale = np.max(expos.real, axis=0)
    mant = np.sum(np.array(coefs) * np.exp(expos - scale), axis=0)
    return mant, scale


# --- small-rho power series (undamped classes only) ---------------------------

def _row_series(k):
    """P[i, n]: coefficient of lambda^n in the entry function of row i."""
    N = _SERIES_ORDER
    P = np.zeros((3, N + 1))
    for i, (p, q) in enumerate(ROW_SPEC[k]):
        if q == 0:
            P[i, p] = 1.0
        else:
            for n in range(p, N + 1):
                P[i, n] = 1.0 / factorial(n - p)
    return P


@lru_cache(maxsize=None)
def _series_poly(k, j=None, m=None):
    """Polynomial coefficients in rho (index = power) by Cauchy-Binet."""
    N = _SERIES_ORDER
    P = _row_series(k)
    Om = OMEGA[None, :] ** np.arange(N + 1)[:, None]
    coef = np.zeros(3 * N + 1, dtype=complex)
    if j is None:
        for S in combinations(range(N + 1), 3):
            dp = np.linalg.det(P[:, S])
            if dp != 0.0:
                coef[sum(S)] += dp * np.linalg.det(Om[list(S), :])
        return coef
    rows = [r for r in range(3) if r != m - 1]
    cols = [c for c in range(3) if c != j - 1]
    sgn = (-1) ** ((m - 1) + (j - 1))
    for S in combinations(range(N + 1), 2):
        dp = np.linalg.det(P[np.ix_(rows, S)])
        if dp != 0.0:
            coef[sum(S)] += sgn * dp * np.linalg.det(Om[np.ix_(list(S), cols)])
    coef[np.abs(coef) < 1e-300] = 0.0
    return coef


def _lowest_power(coef):
    nz = np.nonzero(np.abs(coef) > 1e-14 * np.max(np.abs(coef)))[0]
    return int(nz[0]) if len(nz) else len(coef)


def _poly_reduced(coef, rho, v):
    """sum_n coef[n] rho^(n - v) for n >= v (Horner)."""
    c = coef[v:]
    out = np.zeros_like(rho, dtype=complex)
    for a in c[::-1]:
        out = out * rho + a
    return out


# --- public evaluators --------------------------------------------------------

def delta_scaled(k, rho, damping=None):
    rho = np.asarray(rho, dtype=float)
    lam = roots_array(rho, k, damping)
    mant, scale = _eval_terms(_delta_terms(k), k, lam)
    d = default_damping(k) if damping is None else damping
    if d == 0.0:
        small = rho < RHO_CUTOFF
        if np.any(small):
            ser = _poly_reduced(_series_poly(k), rho, 0)
            mant = np.where(small, ser, mant)
            scale = np.where(small, 0.0, scale)
    return mant, scale


def delta_jm_scaled(k, j, m, rho, damping=None):
    rho = np.asarray(rho, dtype=float)
    lam = roots_array(rho, k, damping)
    mant, scale = _eval_terms(_cofactor_terms(k, j, m), k, lam)
    d = default_damping(k) if damping is None else damping
    if d == 0.0:
        small = rho < RHO_CUTOFF
        if np.any(small):
            ser = _poly_reduced(_series_poly(k, j, m), rho, 0)
            mant = np.where(small, ser, mant)
            scale = np.where(small, 0.0, scale)
    return mant, scale


def delta(k, rho, damping=None):
    """Delta^{+,k}(rho); may overflow to inf beyond rho ~ 800 (use delta_scaled)."""
    mant, scale = delta_scaled(k, rho, damping)
    with np.errstate(over="ignore"):
        out = mant * np.exp(scale)
    return complex(out) if np.ndim(out) == 0 else out


def delta_jm(k, j, m, rho, damping=None):
    mant, scale = delta_jm_scaled(k, j, m, rho, damping)
    with np.errstate(over="ignore"):
        out = mant * np.exp(scale)
    return complex(out) if np.ndim(out) == 0 else out


def log_abs_ratio(k, j, m, rho, damping=None):
    """log |Delta_{j,m} / Delta| without the exp(lambda_2) weight."""
    nm, ns = delta_jm_scaled(k, j, m, rho, damping)
    dm, ds = delta_scaled(k, rho, damping)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(nm)) + ns - np.log(np.abs(dm)) - ds


def weighted_kernel(k, j, m, rho, damping=None):
    """3 rho^2 Delta_{j,m}/Delta, times exp(lambda_2) for j = 2.

    Finite for every rho >= 0: near rho = 0 the undamped determinant vanishes
    like rho^3 and the series form cancels the common powers analytically.
    """
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    d = default_damping(k) if damping is None else damping
    lam = roots_array(rho, k, d)
    extra = lam[1] if j == 2 else None
    nm, ns = _eval_terms(_cofactor_terms(k, j, m), k, lam, extra)
    dm, ds = _eval_terms(_delta_terms(k), k, lam)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        out = 3 * rho ** 2 * (nm / dm) * np.exp(ns - ds)
    if d == 0.0:
        small = rho < RHO_CUTOFF
        if np.any(small):
            num = _series_poly(k, j, m)
            den = _series_poly(k)
            vd = _lowest_power(den)
            vn = _lowest_power(num)
            shift = vn + 2 - vd
            if shift < 0:
                raise DegenerateKernel(f"kernel ({k},{j},{m}) unbounded at rho=0")
            rs = rho[small]
            val = 3 * _poly_reduced(num, rs, vn) * rs ** shift / _poly_reduced(den, rs, vd)
            if j == 2:
                val = val * np.exp(lam[1][small])
            out = out.astype(complex)
            out[small] = val
    if not np.all(np.isfinite(out)):
        raise DegenerateKernel(f"non-finite kernel ({k},{j},{m})")
    return out


def kernel_ratio(k, j, m, rho, damping=None) -> KernelRatio:
    w = complex(weighted_kernel(k, j, m, rho, damping)[0])
    val = w / (3 * rho ** 2) if rho > 0 else complex(np.inf) if w != 0 else 0j
    return KernelRatio(val, w, j, m, k, float(rho))


def roots_general(s, k, damping=None):
    """Unordered roots of lambda^3 + d + s = 0 for complex s, shape (3, n)."""
    s = np.atleast_1d(np.asarray(s, dtype=complex))
    d = default_damping(k) if damping is None else damping
    c = (-(s + d)) ** (1.0 / 3.0)
    w = np.exp(2j * np.pi / 3)
    return np.array([c, c * w, c * w * w])


def verify_nonvanishing(k, samples, tol=1e-10, damping=None):
    """Sample |Delta^k(s)| on Re s >= 0 and flag near-zeros.

    A sample is flagged when ``|Delta|`` falls below ``tol`` times the sum of
    the magnitudes of its expansion terms (a scale-free zero test).  The
    root-coincidence point s = 0 of the undamped classes is skipped.
    """
    s = np.atleast_1d(np.asarray(samples, dtype=complex))
    if np.any(s.real < 0):
        raise ValueError("samples must lie in the closed right half plane")
    d = default_damping(k) if damping is None else damping
    keep = np.ones(s.shape, bool) if d != 0.0 else np.abs(s) > 0
    s = s[keep]
    lam = roots_general(s, k, d)
    mant, scale = _eval_terms(_delta_terms(k), k, lam)
    # magnitude scale: same terms with absolute values
    spec = ROW_SPEC[k]
    total = np.zeros(s.shape)
    for sgn, entries in _delta_terms(k):
        c = np.ones(s.shape, dtype=complex)
        e = np.zeros(s.shape, dtype=complex)
        for r, col in entries:
            p, q = spec[r]
            c = c * lam[col] ** p
            e = e + q * lam[col]
        total = total + np.abs(c) * np.exp(e.real - scale)
    rel = np.abs(mant) / np.where(total > 0, total, 1.0)
    flagged = s[rel <= tol]
    return {
        "k": k,
        "n_samples": int(s.size),
        "min_abs_delta_rel": float(rel.min()) if rel.size else float("nan"),
        "argmin": complex(s[np.argmin(rel)]) if rel.size else None,
        "flagged": flagged.tolist(),
        "ok": flagged.size == 0,
    }
