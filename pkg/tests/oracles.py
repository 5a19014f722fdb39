"""Independent reference computations used by the tests."""
import mpmath as mp
import numpy as np

from kdvbvp.spectral import ROW_SPEC

# printed asymptotic behaviour of |Delta_{j,m} / Delta| as rho -> inf:
# (k, j, m) -> (power of rho, exponential decay rate in units of rho)
S3 = float(np.sqrt(3.0))
_TABLE_ROWS = {
    1: [[(0, S3 / 2), (0, S3), (0, 0)],
        [(0, 0), (0, S3 / 2), (0, 0)],
        [(-1, 0), (-1, S3 / 2), (-1, 0)]],
    2: [[(0, S3 / 2), (-3, S3), (0, 0)],
        [(-1, 0), (-1, S3 / 2), (-1, 0)],
        [(-2, 0), (-2, S3 / 2), (-2, 0)]],
    3: [[(-2, S3 / 2), (-2, S3), (-2, 0)],
        [(0, S3 / 2), (0, S3 / 2), (0, 0)],
        [(-1, 0), (-1, S3 / 2), (-1, 0)]],
    4: [[(-2, S3 / 2), (-2, S3), (-2, 0)],
        [(-1, 0), (-1, S3 / 2), (-1, 0)],
        [(-2, 0), (-2, S3 / 2), (-2, 0)]],
}
# rows of the printed tables are m, columns are j
PRINTED_TABLE = {(k, j, m): _TABLE_ROWS[k][m - 1][j - 1]
                 for k in _TABLE_ROWS for j in (1, 2, 3) for m in (1, 2, 3)}
# entries whose printed form disagrees with 60-digit evaluation
MEASURED_CORRECTIONS = {(2, 2, 1): (0, S3), (3, 1, 2): (0, 0)}


def mp_roots(rho, k, dps=40):
    """Roots of lambda^3 + d + i rho^3 = 0 ordered by continuity from large rho."""
    with mp.workdps(dps):
        d = 1 if k == 4 else 0
        s = 1j * mp.mpf(rho) ** 3
        roots = mp.polyroots([1, 0, 0, d + s], maxsteps=200, extraprec=2 * dps)
        target = [1j * rho, (mp.sqrt(3) - 1j) / 2 * rho, -(mp.sqrt(3) + 1j) / 2 * rho]
        out = []
        for tgt in target:
            best = min(roots, key=lambda r: abs(r - tgt))
            out.append(best)
            roots = [r for r in roots if r is not best]
        return out


def mp_matrix(lam, k):
    rows = []
    for p, q in ROW_SPEC[k]:
        rows.append([l ** p * mp.exp(q * l) for l in lam])
    return mp.matrix(rows)


def mp_delta(rho, k, dps=40):
    with mp.workdps(dps):
        return complex(mp.det(mp_matrix(mp_roots(rho, k, dps), k)))


def mp_delta_jm(rho, k, j, m, dps=40):
    """det of the boundary matrix with column j replaced by the unit vector e_m."""
    with mp.workdps(dps):
        A = mp_matrix(mp_roots(rho, k, dps), k)
        for i in range(3):
            A[i, j - 1] = 1 if i == m - 1 else 0
        return complex(mp.det(A))


def fit_asymptotics(rho, log_abs):
    """Least-squares fit log|r| = a log rho - c rho + b; returns (a, c)."""
    M = np.column_stack([np.log(rho), -rho, np.ones_like(rho)])
    coef, *_ = np.linalg.lstsq(M, log_abs, rcond=None)
    return float(coef[0]), float(coef[1])


def table_ok(measured, expected, slope_tol=0.05, rate_rel=0.05):
    a, c = measured
    ea, ec = expected
    rate_ok = abs(c - ec) <= rate_rel * ec if ec > 0 else abs(c) <= 1e-3
    return abs(a - ea) <= slope_tol and rate_ok


def mp_cofactors(rho, k, dps=60):
    """(Delta, {(j, m): Delta_jm}) from one high-precision root set."""
    with mp.workdps(dps):
        A = mp_matrix(mp_roots(rho, k, dps), k)
        out = {}
        for j in (1, 2, 3):
            for m in (1, 2, 3):
                B = A.copy()
                for i in range(3):
                    B[i, j - 1] = 1 if i == m - 1 else 0
                out[j, m] = complex(mp.det(B))
        return complex(mp.det(A)), out
