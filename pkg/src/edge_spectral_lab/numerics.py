"""Numerical kernels shared by the rest of the package.

Symmetric tridiagonal eigenvalues come from Sturm-sequence bisection and
eigenvectors from inverse iteration; both loops are compiled with numba.
Dense symmetric problems are handled by cyclic Jacobi (reference route) or
LAPACK through :func:`numpy.linalg.eigh` (production route for large Gram
matrices).
"""

from __future__ import annotations

from dataclasses import dataclass

import numba
import numpy as np
from scipy import optimize

# Default tolerances; every public routine accepts an override.
BISECT_RTOL = 1e-13
BISECT_ATOL = 1e-13
INVIT_MAXITER = 50
INVIT_RESID = 1e-10
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 30
PSD_TOL = 1e-12
SQRT_TOL = 1e-10
ISOLATION_TOL = 1e-8


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its contract.

    ``residual`` carries the last residual (or other diagnostic figure)
    when one is meaningful.
    """

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class TriDiag:
    """Real symmetric tridiagonal matrix stored as diagonal + off-diagonal."""

    diag: np.ndarray
    offdiag: np.ndarray

    def __post_init__(self):
        d = np.ascontiguousarray(self.diag, dtype=float)
        e = np.ascontiguousarray(self.offdiag, dtype=float)
        if d.ndim != 1 or d.size < 1:
            raise ValueError("diag must be a non-empty 1-D array")
        if e.shape != (d.size - 1,):
            raise ValueError(f"offdiag must have length {d.size - 1}, got {e.size}")
        if not (np.all(np.isfinite(d)) and np.all(np.isfinite(e))):
            raise ValueError("tridiagonal entries must be finite")
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "offdiag", e)

    @property
    def n(self) -> int:
        return self.diag.size

    def gershgorin(self) -> tuple[float, float]:
        r = np.zeros(self.n)
        r[:-1] += np.abs(self.offdiag)
        r[1:] += np.abs(self.offdiag)
        return float(np.min(self.diag - r)), float(np.max(self.diag + r))

    def norm(self) -> float:
        """Infinity norm (an upper bound on the spectral norm)."""
        r = np.abs(self.diag).copy()
        r[:-1] += np.abs(self.offdiag)
        r[1:] += np.abs(self.offdiag)
        return float(r.max())

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.offdiag * v[1:]
        out[1:] += self.offdiag * v[:-1]
        return out

    def dense(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.nodes, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if x.shape != w.shape:
            raise ValueError("nodes and weights must have the same length")
        if x.size > 1 and np.any(np.diff(x) <= 0):
            raise ValueError("nodes must be strictly increasing")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        object.__setattr__(self, "nodes", x)
        object.__setattr__(self, "weights", w)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def as_symmetric(a: np.ndarray) -> np.ndarray:
    """Return the symmetric matrix whose lower triangle is that of ``a``."""
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
        raise ValueError("expected a non-empty square matrix")
    low = np.tril(a)
    return low + np.tril(a, -1).T


# ---------------------------------------------------------------------------
# Sturm sequences and bisection


@numba.njit(cache=True, nogil=True)
def _sturm(d, e2, x, pivmin):
    count = 0
    q = d[0] - x
    if q < 0.0:
        count += 1
    elif q == 0.0:
        q = pivmin
    for i in range(1, d.size):
        q = d[i] - x - e2[i - 1] / q
        if q < 0.0:
            if q > -pivmin:
                q = -pivmin
            count += 1
        elif q < pivmin:
            q = pivmin
    return count


@numba.njit(cache=True, nogil=True)
def _bisect(d, e2, index, lo, hi, rtol, atol, pivmin):
    # eigenvalue number ``index`` (1-based) lies in [lo, hi)
    for _ in range(200):
        if hi - lo <= max(rtol * max(abs(lo), abs(hi)), atol):
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _sturm(d, e2, mid, pivmin) >= index:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _pivmin(T: TriDiag) -> float:
    e2max = float(np.max(T.offdiag**2)) if T.n > 1 else 0.0
    return np.finfo(float).tiny * max(1.0, e2max)


def sturm_count(T: TriDiag, x: float) -> int:
    """Number of eigenvalues of ``T`` strictly less than ``x``."""
    if not np.isfinite(x):
        raise ValueError("shift must be finite")
    return int(_sturm(T.diag, T.offdiag**2, float(x), _pivmin(T)))


def tridiag_eig_index(
    T: TriDiag,
    index: int,
    lo: float | None = None,
    hi: float | None = None,
    rtol: float = BISECT_RTOL,
    atol: float = BISECT_ATOL,
) -> float:
    """Eigenvalue number ``index`` (1-based, ascending) by bisection.

    Optional ``lo``/``hi`` narrow the starting bracket; they are checked
    against the Sturm count and widened to Gershgorin bounds if wrong.
    """
    if not 1 <= index <= T.n:
        raise ValueError(f"index must be in [1, {T.n}]")
    glo, ghi = T.gershgorin()
    pad = 1e-12 * max(1.0, abs(glo), abs(ghi))
    glo, ghi = glo - pad, ghi + pad
    e2 = T.offdiag**2
    pm = _pivmin(T)
    if lo is None or _sturm(T.diag, e2, lo, pm) >= index:
        lo = glo
    if hi is None or _sturm(T.diag, e2, hi, pm) < index:
        hi = ghi
    if _sturm(T.diag, e2, lo, pm) >= index or _sturm(T.diag, e2, hi, pm) < index:
        raise NumericalError("cannot bracket eigenvalue from Gershgorin bounds")
    return float(_bisect(T.diag, e2, index, float(lo), float(hi), rtol, atol, pm))


def tridiag_eigs(T: TriDiag, count: int, rtol: float = BISECT_RTOL, atol: float = BISECT_ATOL) -> np.ndarray:
    """The ``count`` smallest eigenvalues of ``T`` in ascending order."""
    if not 1 <= count <= T.n:
        raise ValueError(f"count must be in [1, {T.n}]")
    out = np.empty(count)
    lo = None
    for i in range(1, count + 1):
        out[i - 1] = tridiag_eig_index(T, i, lo=lo, rtol=rtol, atol=atol)
        lo = out[i - 1] - max(rtol * abs(out[i - 1]), atol)
    # separate bisections of a tight cluster may come out of order by less
    # than their tolerance; the running maximum stays within that tolerance
    return np.maximum.accumulate(out)


# ---------------------------------------------------------------------------
# inverse iteration


@numba.njit(cache=True, nogil=True)
def _shifted_solve(d, e, mu, rhs, tiny):
    # LU with partial pivoting of the tridiagonal T - mu I (gttrf/gttrs);
    # an exactly zero pivot is replaced by ``tiny`` (eps * ||T||, as in stein)
    n = d.size
    dl = e.copy()
    du = e.copy()
    dd = d - mu
    du2 = np.zeros(max(n - 2, 0))
    piv = np.zeros(n, dtype=np.bool_)
    for i in range(n - 1):
        if abs(dd[i]) >= abs(dl[i]):
            if dd[i] == 0.0:
                dd[i] = tiny
            fact = dl[i] / dd[i]
            dl[i] = fact
            dd[i + 1] -= fact * du[i]
        else:
            fact = dd[i] / dl[i]
            dd[i] = dl[i]
            dl[i] = fact
            temp = du[i]
            du[i] = dd[i + 1]
            dd[i + 1] = temp - fact * dd[i + 1]
            if i < n - 2:
                du2[i] = du[i + 1]
                du[i + 1] = -fact * du[i + 1]
            piv[i] = True
    if dd[n - 1] == 0.0:
        dd[n - 1] = tiny
    x = rhs.copy()
    for i in range(n - 1):
        if piv[i]:
            temp = x[i]
            x[i] = x[i + 1]
            x[i + 1] = temp - dl[i] * x[i + 1]
        else:
            x[i + 1] -= dl[i] * x[i]
    x[n - 1] /= dd[n - 1]
    if n > 1:
        x[n - 2] = (x[n - 2] - du[n - 2] * x[n - 1]) / dd[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (x[i] - du[i] * x[i + 1] - du2[i] * x[i + 2]) / dd[i]
    return x


def inverse_iteration(
    T: TriDiag,
    mu: float,
    resid_tol: float = INVIT_RESID,
    maxiter: int = INVIT_MAXITER,
    isolation: float = ISOLATION_TOL,
) -> np.ndarray:
    """Unit eigenvector of ``T`` for the eigenvalue closest to ``mu``.

    ``mu`` must lie within ``isolation`` of exactly one eigenvalue; a
    cluster of two or more eigenvalues in that window is rejected.
    """
    width = isolation * max(1.0, abs(mu))
    inside = sturm_count(T, mu + width) - sturm_count(T, mu - width)
    if inside != 1:
        raise NumericalError(
            f"shift {mu!r} is not within {width:.1e} of exactly one eigenvalue ({inside} found)"
        )
    n = T.n
    norm = T.norm()
    v = np.ones(n) / np.sqrt(n)
    v[::2] *= -1.0  # avoid accidental orthogonality to smooth eigenvectors
    v += np.linspace(0.0, 1.0, n) / n
    v /= np.linalg.norm(v)
    shift = float(mu)
    if norm == 0.0:
        v = np.zeros(n)
        v[0] = 1.0  # every vector is an eigenvector of the zero matrix
        return v
    # iterate on T / ||T|| so that extreme scales neither overflow nor underflow
    d_s, e_s = T.diag / norm, T.offdiag / norm
    tiny = np.finfo(float).eps
    resid = np.inf
    done = None
    for _ in range(maxiter):
        w = _shifted_solve(d_s, e_s, shift / norm, v, tiny)
        nw = np.linalg.norm(w)
        if not np.isfinite(nw) or nw == 0.0:
            raise NumericalError("inverse iteration produced a non-finite iterate")
        v = w / nw
        tv = T.matvec(v)
        rq = float(v @ tv)
        resid = float(np.linalg.norm(tv - rq * v))
        if done is not None:
            # one polishing step past the tolerance, usually down to roundoff
            return v if resid < done[1] else done[0]
        if resid <= resid_tol * norm:
            done = (v, resid)
    if done is not None:
        return done[0]
    raise NumericalError(f"inverse iteration did not converge in {maxiter} steps", residual=resid)


# ---------------------------------------------------------------------------
# dense symmetric eigenproblems


@numba.njit(cache=True)
def _jacobi(a, tol, max_sweeps):
    n = a.shape[0]
    v = np.eye(n)
    fro = np.sqrt(np.sum(a * a))
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for p in range(n):
            for q in range(p + 1, n):
                off += 2.0 * a[p, q] * a[p, q]
        off = np.sqrt(off)
        if off <= tol * fro or fro == 0.0:
            return a, v, sweep, off
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp = a[k, p]
                    akq = a[k, q]
                    a[k, p] = c * akp - s * akq
                    a[k, q] = s * akp + c * akq
                for k in range(n):
                    apk = a[p, k]
                    aqk = a[q, k]
                    a[p, k] = c * apk - s * aqk
                    a[q, k] = s * apk + c * aqk
                a[p, q] = 0.0
                a[q, p] = 0.0
                for k in range(n):
                    vkp = v[k, p]
                    vkq = v[k, q]
                    v[k, p] = c * vkp - s * vkq
                    v[k, q] = s * vkp + c * vkq
    return a, v, -1, off


def jacobi_eigs(S: np.ndarray, tol: float = JACOBI_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS):
    """Cyclic Jacobi diagonalization of a symmetric matrix.

    Returns ``(w, V)`` with ``w`` ascending and ``S @ V == V @ diag(w)``.
    Practical up to n of a few hundred; :func:`sym_eigh` is the route for
    large matrices.
    """
    a = as_symmetric(S).copy()
    a, v, sweeps, off = _jacobi(a, tol, max_sweeps)
    if sweeps < 0:
        raise NumericalError(f"Jacobi did not converge in {max_sweeps} sweeps", residual=off)
    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return w[order], v[:, order]


def sym_eigh(S: np.ndarray):
    """Symmetric eigendecomposition through LAPACK (ascending)."""
    return np.linalg.eigh(as_symmetric(S))


def sym_sqrt(S: np.ndarray, psd_tol: float = PSD_TOL, eigh=sym_eigh) -> np.ndarray:
    """Principal square root of a positive semidefinite matrix.

    Eigenvalues down to ``-psd_tol * ||S||_2`` are treated as round-off
    and clamped to zero; anything more negative raises.
    """
    S = as_symmetric(S)
    w, V = eigh(S)
    scale = float(np.max(np.abs(w))) if w.size else 0.0
    if w.size and w[0] < -psd_tol * scale:
        raise NumericalError(f"matrix is not PSD: smallest eigenvalue {w[0]:.3e} vs norm {scale:.3e}", residual=float(w[0]))
    r = np.sqrt(np.clip(w, 0.0, None))
    R = (V * r) @ V.T
    return as_symmetric(0.5 * (R + R.T))


# ---------------------------------------------------------------------------
# scalar root finding and quadrature


def brent_root(f, a: float, b: float, tol: float = 1e-12, maxiter: int = 200) -> float:
    """Root of ``f`` in ``[a, b]`` by Brent's method (scipy brentq)."""
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return float(a)
    if fb == 0.0:
        return float(b)
    if fa * fb > 0:
        raise NumericalError(f"no sign change on [{a}, {b}]: f(a)={fa:.3e}, f(b)={fb:.3e}")
    return float(optimize.brentq(f, a, b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=maxiter))


def gauss_legendre(n: int, a: float = -1.0, b: float = 1.0) -> QuadratureRule:
    if n < 1:
        raise ValueError("n must be >= 1")
    if not a < b:
        raise ValueError("need a < b")
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return QuadratureRule(half * x + 0.5 * (a + b), half * w)


def composite_gauss_legendre(edges: np.ndarray, order: int) -> QuadratureRule:
    """Gauss-Legendre rule of the given order on each panel ``[edges[i], edges[i+1]]``."""
    edges = np.asarray(edges, dtype=float)
    x, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
    weights = 0.5 * (hi - lo) * w
    return QuadratureRule(nodes.ravel(), weights.ravel())


def hermite_phi(j: int, x):
    """Normalized Hermite function phi_j (j >= 1), ``phi_1 = pi**-0.25 exp(-x**2/2)``.

    Evaluated by the three-term recurrence on the normalized functions, so
    no Hermite polynomial or factorial is ever formed.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    x = np.asarray(x, dtype=float)
    prev = np.zeros_like(x)
    cur = np.pi**-0.25 * np.exp(-0.5 * x * x)
    for q in range(1, j):
        # cur = phi_q, prev = phi_{q-1}; q counts from 1
        nxt = np.sqrt(2.0 / q) * x * cur - np.sqrt((q - 1) / q) * prev
        prev, cur = cur, nxt
    return cur if cur.ndim else float(cur)
