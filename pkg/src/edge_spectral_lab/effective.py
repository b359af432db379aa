"""Effective Birman-Schwinger operators near a Landau threshold.

The band-j part of the sandwiched resolvent is discretized on momentum
nodes ``k_q`` with positive weights ``w_q``:

    Re T_j(E_j + lam)  ~  sum_q w_q D_q g_q g_q^*,   D_q = 1 / (s_q - lam),

with ``s_q = E_j(k_q) - E_j`` and
``g_q(x, y) = (2 pi)^(-1/2) V^(1/2)(x, y) e^{i k_q y} psi_j(x; k_q)``.
Its nonzero spectrum equals that of the symmetric matrix ``R D R`` where
``R`` is the square root of the weighted Gram matrix of the ``g_q``.
The Cauchy singularity at ``s = lam`` is handled by nodes placed in pairs
``lam +- sigma`` with equal weights and an excluded window
``|s - lam| < eps``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np

from .bands import InverseBand, build_inverse_band, invert_band
from .fiber import DIRICHLET, NEUMANN, FiberSpec, MasterGrid, band_value_and_derivative, limit_mode, modes_on_grid
from .numerics import NumericalError, jacobi_eigs, sym_eigh, sym_sqrt
from .potentials import (
    COMPACT_BUMP,
    RADIAL_POWER,
    SEPARABLE,
    PotentialModel,
    bump_y_rule,
    cosine_transform,
    half_integer_coeffs,
    volume_function,
)

PANEL_ORDER = 6
FIRST_PANEL = 0.02  # k-width of the panel adjacent to a singular point
GRADING = 1.5
MODE_CUTOFF = 1e-9  # modes are truncated (consistently, so the Gram stays PSD) below this relative size
GRAM_PSD_TOL = 1e-10
DROP_TOL = 1e-12
JACOBI_MAX_N = 200  # above this the LAPACK route diagonalizes R D R
OMITTED_TERMS = "cross-band terms and s > s_max contributions are not assembled (bounded by the O(1) term)"


# ---------------------------------------------------------------------------
# quadrature scheme


@dataclass(frozen=True)
class PvScheme:
    """Momentum nodes and weights realizing the principal-value integral.

    Nodes are stored branch by branch with ``s_nodes`` increasing inside each
    branch.  ``pv_denominators`` holds ``1/(lam - s_q)``; the operator
    itself uses ``D_q = 1/(s_q - lam) = -pv_denominators[q]`` because the
    weights are taken in k, where the measure is positive on both band
    orientations.
    """

    j: int
    lam: float
    epsilon: float
    s_nodes: np.ndarray
    k_nodes: np.ndarray
    base_weights: np.ndarray
    k_weights: np.ndarray
    pv_denominators: np.ndarray
    s_max: float
    zone: np.ndarray
    branch: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self) -> int:
        return self.k_nodes.size

    @property
    def D(self) -> np.ndarray:
        return -self.pv_denominators

    def pairs(self) -> list[tuple[int, int]]:
        """Index pairs ``(q, q')`` with ``s_q + s_q' = 2 lam`` in the symmetric zone."""
        return [tuple(p) for p in self.meta.get("pair_index", [])]


def window_exponent(m: float) -> float:
    return 2.0 - 2.0 / m


@dataclass
class _Branch:
    inv: InverseBand
    k_lo: float
    k_hi: float
    sign: int  # +1 if s increases with k


def _graded_edges(a: float, b: float, h_max: float, focus_left: bool, focus_right: bool) -> np.ndarray:
    """Panel edges on [a, b]: geometric from focused ends up to ``h_max``, uniform between."""
    if b <= a:
        return np.array([a])
    left, right = [a], [b]
    if focus_left:
        w = FIRST_PANEL
        while w < h_max and left[-1] + w < b:
            left.append(left[-1] + w)
            w *= GRADING
    if focus_right:
        w = FIRST_PANEL
        while w < h_max and right[-1] - w > left[-1]:
            right.append(right[-1] - w)
            w *= GRADING
    lo, hi = left[-1], right[-1]
    mid = []
    if hi > lo:
        n = max(1, int(math.ceil((hi - lo) / h_max - 1e-12)))
        mid = list(np.linspace(lo, hi, n + 1)[1:-1])
    return np.array(left + mid + right[::-1])


def _panel_rule(edges: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    if edges.size < 2:
        return np.empty(0), np.empty(0)
    t, w = np.polynomial.legendre.leggauss(order)
    lo, hi = edges[:-1, None], edges[1:, None]
    return (0.5 * (hi - lo) * t + 0.5 * (hi + lo)).ravel(), (0.5 * (hi - lo) * w).ravel()


def coverage_k(P: PotentialModel, lam: float, b: float, margin: float = 4.0) -> float:
    """Largest momentum whose mode still sees ``V >= 0.05 |lam|``."""
    if P.kind == COMPACT_BUMP:
        rho = P.R
    else:
        rho = (P.decay_constant() / (0.05 * abs(lam))) ** (1.0 / P.m)
    return b * rho + margin * np.sqrt(b)


def build_pv_scheme(
    inv: InverseBand | list,
    j: int,
    lam: float,
    m: float,
    node_budget: int,
    k_end: float | None = None,
    P: PotentialModel | None = None,
    eps_scale: float = 1.0,
    pair_fraction: float = 0.1,
    s_max: float | None = None,
) -> PvScheme:
    """Three-zone momentum quadrature for ``p.v. int dk (.)/(s(k) - lam)``.

    Parameters
    ----------
    inv : InverseBand or list of InverseBand
        Band inverse(s); Neumann passes both branches.
    lam : float
        Offset from the threshold; negative values sit below it.
    m : float
        Decay exponent; the excluded window has half-width ``eps_scale * |lam|**(2 - 2/m)``.
    node_budget : int
        Upper bound on the number of nodes.
    k_end : float, optional
        Momentum cutoff; defaults to :func:`coverage_k` for ``P``.
    """
    invs = inv if isinstance(inv, (list, tuple)) else [inv]
    spec = invs[0].spec
    b = spec.b
    s_max = 2.0 * b if s_max is None else s_max
    if lam == 0 or not np.isfinite(lam):
        raise ValueError("lam must be finite and nonzero")
    if k_end is None:
        if P is None:
            raise ValueError("give k_end or a potential")
        k_end = coverage_k(P, lam, b)
    branches = []
    for iv in invs:
        if iv.branch == "decreasing":
            k_lo = invert_band(iv, s_max) if iv.s_min < s_max <= iv.s_max else iv.k_range[0]
            k_hi = iv.k_range[1] if spec.bc == NEUMANN else k_end
            branches.append(_Branch(iv, k_lo, k_hi, -1))
        else:
            branches.append(_Branch(iv, iv.k_range[0], k_end, +1))

    theta = window_exponent(m)
    eps = eps_scale * abs(lam) ** theta

    # singular points: crossings s(k) = lam on each branch
    crossings = []
    for bi, br in enumerate(branches):
        s_a, s_b = float(br.inv.s_interp(br.k_lo)), float(br.inv.s_interp(br.k_hi))
        lo_s, hi_s = min(s_a, s_b), max(s_a, s_b)
        if lo_s < lam < hi_s:
            room = min(abs(lam) / 2, 0.45 * (lam - lo_s), 0.45 * (hi_s - lam))
            crossings.append((bi, room))
    n_cross = len(crossings)
    if n_cross and eps >= min(r for _, r in crossings):
        raise NumericalError(f"excluded window {eps:.3e} swallows the pairing zone at lam={lam}")

    n_pairs = max(8, int(pair_fraction * node_budget) // 2) if n_cross else 0
    panel_budget = node_budget - 2 * n_pairs * n_cross

    # interval structure per branch: panels everywhere except the pairing zones
    pieces = []  # (branch index, a, b, focus_left, focus_right)
    pair_specs = []
    for bi, br in enumerate(branches):
        holes = []
        for cbi, room in crossings:
            if cbi == bi:
                k1, k2 = br.inv.k_guess(lam + room), br.inv.k_guess(lam - room)
                ka, kb = min(k1, k2), max(k1, k2)
                pair_specs.append((bi, room, ka, kb))
                holes.append((ka, kb))
        # below threshold the Dirichlet integrand changes scale around rho(|lam|)
        focus = []
        if lam < 0 and spec.bc == DIRICHLET and br.inv.s_min < -lam < br.inv.s_max:
            focus.append(br.inv.k_guess(-lam))
        cuts = sorted([(br.k_lo, False, "edge"), (br.k_hi, False, "edge")]
                      + [(h, True, "hole") for hole in holes for h in hole]
                      + [(f, True, "focus") for f in focus])
        for (a, fa, ta), (c, fc, tc) in zip(cuts[:-1], cuts[1:]):
            if (a, c) in holes:
                continue
            pieces.append((bi, a, c, fa, fc))

    # choose the uniform panel width to respect the budget
    total_len = sum(c - a for _, a, c, _, _ in pieces)
    h_max = 0.5
    for _ in range(60):
        n_nodes = sum((_graded_edges(a, c, h_max, fa, fc).size - 1) * PANEL_ORDER for _, a, c, fa, fc in pieces)
        if n_nodes <= panel_budget:
            break
        h_max *= 1.1
    else:
        raise NumericalError(f"node budget {node_budget} too small for the panel zones")
    # use spare budget to refine
    while True:
        trial = h_max / 1.1
        n_try = sum((_graded_edges(a, c, trial, fa, fc).size - 1) * PANEL_ORDER for _, a, c, fa, fc in pieces)
        if n_try > panel_budget or trial < 0.02:
            break
        h_max = trial
    if n_cross and panel_budget < PANEL_ORDER * len(pieces):
        raise NumericalError(f"node budget {node_budget} too small to honor the pairing")

    ks, wk, zone, bidx = [], [], [], []
    for bi, a, c, fa, fc in pieces:
        x, w = _panel_rule(_graded_edges(a, c, h_max, fa, fc), PANEL_ORDER)
        ks.append(x)
        wk.append(w)
        br = branches[bi]
        s_mid = float(br.inv.s_interp(0.5 * (a + c)))
        zone.append(np.full(x.size, 1 if s_mid > lam else 3))
        bidx.append(np.full(x.size, bi))
    k_panel = np.concatenate(ks) if ks else np.empty(0)
    w_panel = np.concatenate(wk) if wk else np.empty(0)
    z_panel = np.concatenate(zone) if zone else np.empty(0, int)
    b_panel = np.concatenate(bidx) if bidx else np.empty(0, int)
    b_panel = b_panel.astype(int)
    s_panel = np.empty_like(k_panel)
    ds_panel = np.empty_like(k_panel)
    for bi, br in enumerate(branches):
        sel = b_panel == bi
        s_panel[sel] = br.inv.s_interp(k_panel[sel])
        ds_panel[sel] = br.inv.ds_interp(k_panel[sel])

    # pairing zones: Gauss-Legendre in u = log(sigma) on [log eps, log room]
    s_pair, k_pair, w_pair, base_pair, b_pair = [], [], [], [], []
    t, wt = np.polynomial.legendre.leggauss(max(n_pairs, 1))
    for bi, room, ka, kb in pair_specs:
        br = branches[bi]
        ua, ub = math.log(eps), math.log(room)
        sig = np.exp(0.5 * (ub - ua) * t + 0.5 * (ub + ua))
        ws = sig * 0.5 * (ub - ua) * wt
        for sgn in (+1.0, -1.0):
            s = lam + sgn * sig
            k = np.array([br.inv.k_guess(v) for v in s])
            s_pair.append(s)
            k_pair.append(k)
            w_pair.append(ws / np.abs(br.inv.ds_interp(k)))
            base_pair.append(ws)
            b_pair.append(np.full(s.size, bi))
    cat = lambda parts, dt=float: np.concatenate(parts) if parts else np.empty(0, dt)
    s_pair_a, k_pair_a, w_pair_a, base_pair_a = cat(s_pair), cat(k_pair), cat(w_pair), cat(base_pair)
    b_pair_a = cat(b_pair, int)

    s_all = np.concatenate([s_panel, s_pair_a])
    k_all = np.concatenate([k_panel, k_pair_a])
    wk_all = np.concatenate([w_panel, w_pair_a])
    base_all = np.concatenate([w_panel * np.abs(ds_panel), base_pair_a])
    zone_all = np.concatenate([z_panel, np.full(s_pair_a.size, 2)])
    br_all = np.concatenate([b_panel, b_pair_a])

    order = np.lexsort((s_all, br_all))
    s_all, k_all, wk_all, base_all, zone_all, br_all = (a[order] for a in (s_all, k_all, wk_all, base_all, zone_all, br_all))
    if np.any(np.abs(s_all - lam) < eps * (1 - 1e-12)):
        raise NumericalError("a node fell inside the excluded window")
    pv = 1.0 / (lam - s_all)

    # pair bookkeeping after sorting
    inv_order = np.empty_like(order)
    inv_order[order] = np.arange(order.size)
    pair_index = []
    off = s_panel.size
    for c in range(len(pair_specs)):
        base = off + 2 * c * n_pairs
        for i in range(n_pairs):
            pair_index.append((int(inv_order[base + i]), int(inv_order[base + n_pairs + i])))

    if k_all.size > node_budget:
        raise NumericalError(f"scheme uses {k_all.size} nodes, above the budget {node_budget}")
    ln = abs(math.log(abs(lam)))
    meta = {
        "theta": theta,
        "eps": eps,
        "n_pairs": n_pairs,
        "crossings": len(pair_specs),
        "h_max": h_max,
        "k_range": (float(k_all.min()), float(k_all.max())),
        "k_end": float(k_end),
        "s_max": s_max,
        "window_estimate": eps / (lam * lam * math.sqrt(ln)) if n_cross else 0.0,
        "pair_index": pair_index,
        "omitted": OMITTED_TERMS,
    }
    return PvScheme(int(j), float(lam), float(eps if n_cross else 0.0), s_all, k_all, base_all, wk_all, pv,
                    float(s_max), zone_all, br_all, meta)


# ---------------------------------------------------------------------------
# Gram assembly


@dataclass(frozen=True)
class GramOperator:
    scheme: PvScheme
    gram: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)


@numba.njit(cache=True)
def _radial_gram(ks, modes, lo, hi, xs, coef_x, a_x, poly, dmax):
    # G[q, p] = sum_i c_i e^{-z} poly(z) psi_q(x_i) psi_p(x_i),  z = a_i |k_q - k_p|
    n = ks.size
    G = np.zeros((n, n))
    deg = poly.size
    for q in range(n):
        for p in range(q, n):
            d = abs(ks[q] - ks[p])
            if d > dmax:
                continue
            i0 = max(lo[q], lo[p])
            i1 = min(hi[q], hi[p])
            acc = 0.0
            for i in range(i0, i1):
                z = a_x[i] * d
                pz = poly[deg - 1]
                for t in range(deg - 2, -1, -1):
                    pz = pz * z + poly[t]
                acc += coef_x[i] * math.exp(-z) * pz * modes[q, i] * modes[p, i]
            G[q, p] = acc
            G[p, q] = acc
    return G


def _mode_support(modes: np.ndarray, x: np.ndarray, x_max: float = np.inf) -> tuple[np.ndarray, np.ndarray]:
    big = np.abs(modes) > MODE_CUTOFF * np.max(np.abs(modes), axis=1, keepdims=True)
    lo = np.argmax(big, axis=1)
    hi = modes.shape[1] - np.argmax(big[:, ::-1], axis=1)
    if np.isfinite(x_max):
        hi = np.minimum(hi, np.searchsorted(x, x_max, side="right"))
    return lo.astype(np.int64), hi.astype(np.int64)


def gram_unweighted(P: PotentialModel, x: np.ndarray, step: float, ks: np.ndarray, modes: np.ndarray, n_y: int = 48) -> np.ndarray:
    """``<g_q, g_p> = int F(x, k_q - k_p) psi_q psi_p dx`` on a common grid with uniform weights."""
    ks = np.asarray(ks, dtype=float)
    n = ks.size
    if n == 0:
        return np.zeros((0, 0))
    lo, hi = _mode_support(modes, x, P.x_support)
    if P.kind == RADIAL_POWER:
        poly = half_integer_coeffs(P.m)
        if poly is not None:
            nu = 0.5 * (P.m - 1)
            a = np.sqrt(1 + x * x)
            pref = P.C / (2 * np.pi) * 2 * np.sqrt(np.pi) / math.gamma(P.m / 2)
            coef = step * pref * (2 * a * a) ** (-nu) * np.sqrt(np.pi / 2)
            # mode products vanish beyond a momentum offset of ~ 2*(support width)
            return _radial_gram(ks, np.ascontiguousarray(modes), lo, hi, x, coef, a, poly, np.inf)
        G = np.zeros((n, n))
        for q in range(n):
            for p in range(q, n):
                i0, i1 = max(lo[q], lo[p]), min(hi[q], hi[p])
                if i1 <= i0:
                    continue
                F = cosine_transform(P, x[i0:i1], ks[q] - ks[p])
                G[q, p] = G[p, q] = step * np.dot(F, modes[q, i0:i1] * modes[p, i0:i1])
        return G
    if P.kind == SEPARABLE:
        v1 = P.factor_x(x) * step
        M = (modes * v1) @ modes.T
        vh = P.factor_y_hat(ks[:, None] - ks[None, :]) / np.sqrt(2 * np.pi)
        return 0.5 * (M * vh + (M * vh).T)
    # compact bump: F is a positive combination of cosines, so G = A^T A exactly
    inside = x < P.R
    xs = x[inside]
    y, c = bump_y_rule(P, xs, n_y)
    psi = modes[:, inside]  # (n, nx)
    amp = np.sqrt(step * c)  # (nx, ny)
    phase = ks[:, None, None] * y[None, :, :]  # (n, nx, ny)
    base = psi[:, :, None] * amp[None, :, :]
    A_cos = (base * np.cos(phase)).reshape(n, -1)
    A_sin = (base * np.sin(phase)).reshape(n, -1)
    G = A_cos @ A_cos.T + A_sin @ A_sin.T
    return 0.5 * (G + G.T)


def assemble_gram(P: PotentialModel, spec: FiberSpec, scheme: PvScheme, step: float = 0.025, grid: MasterGrid | None = None) -> GramOperator:
    """Weighted Gram matrix ``sqrt(w_q w_p) <g_q, g_p>`` for the scheme's nodes."""
    if not P.y_symmetric:
        raise ValueError("potential must be even in y")
    if grid is None:
        grid = MasterGrid.covering(spec, float(np.max(scheme.k_nodes)), step=step)
    elif grid.spec != spec or grid.k_cover < np.max(scheme.k_nodes) - 1e-9:
        raise NumericalError("master grid incompatible with the scheme nodes")
    _, modes = modes_on_grid(grid, scheme.j, scheme.k_nodes)
    G = gram_unweighted(P, grid.x, grid.step, scheme.k_nodes, modes)
    sw = np.sqrt(scheme.k_weights)
    G = G * sw[:, None] * sw[None, :]
    return GramOperator(scheme, G, {"grid_step": grid.step, "grid_points": grid.x.size, "grid_length": float(grid.x[-1])})


# ---------------------------------------------------------------------------
# spectra and counting


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    trace_norm: float
    meta: dict = field(default_factory=dict, compare=False)


def _sorted_by_magnitude(w: np.ndarray) -> np.ndarray:
    return w[np.lexsort((-w, -np.abs(w)))]


def _diagonalize(M: np.ndarray) -> np.ndarray:
    if M.shape[0] <= JACOBI_MAX_N:
        return jacobi_eigs(M)[0]
    return sym_eigh(M)[0]


def re_tj_spectrum(G: GramOperator) -> SpectrumReport:
    """Nonzero spectrum of ``R D R`` with ``R = gram^(1/2)`` and ``D = 1/(s - lam)``."""
    R = sym_sqrt(G.gram, psd_tol=GRAM_PSD_TOL)
    D = G.scheme.D
    M = (R * D[None, :]) @ R
    M = 0.5 * (M + M.T)
    w = _diagonalize(M)
    scale = np.max(np.abs(w)) if w.size else 0.0
    w = w[np.abs(w) > DROP_TOL * scale] if scale > 0 else w[:0]
    w = _sorted_by_magnitude(w)
    meta = {
        "lambda": G.scheme.lam,
        "eps": G.scheme.epsilon,
        "nodes": G.scheme.n,
        "trace_D_gram": float(np.dot(D, np.diag(G.gram))),
        **{k: v for k, v in G.meta.items()},
    }
    return SpectrumReport(w, float(np.sum(np.abs(w))), meta)


@dataclass(frozen=True)
class CountingReport:
    s: float
    n_plus: int
    n_minus: int


def counting(rep: SpectrumReport, s: float) -> CountingReport:
    if not s > 0:
        raise ValueError("threshold must be positive")
    w = rep.eigenvalues
    return CountingReport(float(s), int(np.sum(w > s)), int(np.sum(w < -s)))


# ---------------------------------------------------------------------------
# SSF bracket


H_PLUS = "H+"
H_MINUS = "H-"


@dataclass(frozen=True)
class SsfBracket:
    """Counts ``n(1+r)`` (lower) and ``n(1-r)`` (upper) for one operator/side.

    ``operator`` is ``H+`` (uses ``n_-``) or ``H-`` (uses ``n_+``);
    ``side`` is ``above`` or ``below`` the threshold.
    """

    lam: float
    r: float
    lower: int
    upper: int
    operator: str
    side: str
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)


@dataclass
class SsfResult:
    """All four brackets at one offset, from one diagonalization."""

    lam: float
    r: float
    spectrum: SpectrumReport
    scheme: PvScheme
    n_minus_hi: int
    n_minus_lo: int
    n_plus_hi: int
    n_plus_lo: int

    def bracket(self, operator: str) -> SsfBracket:
        side = "above" if self.lam > 0 else "below"
        if operator == H_PLUS:
            lo, hi = self.n_minus_hi, self.n_minus_lo
        elif operator == H_MINUS:
            lo, hi = self.n_plus_hi, self.n_plus_lo
        else:
            raise ValueError(f"operator must be {H_PLUS!r} or {H_MINUS!r}")
        meta = {"omitted": OMITTED_TERMS, "nodes": self.scheme.n, "eps": self.scheme.epsilon,
                "trace_norm": self.spectrum.trace_norm}
        return SsfBracket(self.lam, self.r, lo, hi, operator, side, meta)


class SsfSolver:
    """Reuses band inverses across offsets for one (potential, fiber, band) setup."""

    def __init__(self, P: PotentialModel, spec: FiberSpec, j: int = 1, node_budget: int = 1200,
                 grid_step: float = 0.025, pair_fraction: float = 0.1):
        self.P, self.spec, self.j = P, spec, j
        self.node_budget = node_budget
        self.grid_step = grid_step
        self.pair_fraction = pair_fraction
        if spec.bc == DIRICHLET:
            self.invs = [build_inverse_band(spec, j)]
        else:
            self.invs = [build_inverse_band(spec, j, "decreasing"), build_inverse_band(spec, j, "increasing")]

    def scheme(self, lam: float, eps_scale: float = 1.0, node_budget: int | None = None) -> PvScheme:
        return build_pv_scheme(self.invs, self.j, lam, self.P.decay, node_budget or self.node_budget,
                               P=self.P, eps_scale=eps_scale, pair_fraction=self.pair_fraction)

    def spectrum(self, lam: float, eps_scale: float = 1.0, node_budget: int | None = None) -> SpectrumReport:
        sc = self.scheme(lam, eps_scale, node_budget)
        return re_tj_spectrum(assemble_gram(self.P, self.spec, sc, step=self.grid_step))

    def solve(self, lam: float, r: float, eps_scale: float = 1.0, node_budget: int | None = None) -> SsfResult:
        if not 0 < r < 1:
            raise ValueError("r must lie in (0, 1)")
        sc = self.scheme(lam, eps_scale, node_budget)
        rep = re_tj_spectrum(assemble_gram(self.P, self.spec, sc, step=self.grid_step))
        hi, lo = counting(rep, 1 + r), counting(rep, 1 - r)
        return SsfResult(lam, r, rep, sc, hi.n_minus, lo.n_minus, hi.n_plus, lo.n_plus)


def ssf_bracket(P: PotentialModel, spec: FiberSpec, inv, j: int, lam: float, r: float, node_budget: int,
                operator: str = H_PLUS) -> SsfBracket:
    """Counting bracket estimating the spectral shift at ``E_j + lam``.

    ``H+`` (potential added) reads ``n_-``; ``H-`` (potential subtracted)
    reads ``n_+``.  The bracket is ``[n(1+r), n(1-r)]``.
    """
    if lam == 0:
        raise ValueError("lam must be nonzero")
    if not 0 < r < 1:
        raise ValueError("r must lie in (0, 1)")
    sc = build_pv_scheme(inv, j, lam, P.decay, node_budget, P=P)
    rep = re_tj_spectrum(assemble_gram(P, spec, sc))
    hi, lo = counting(rep, 1 + r), counting(rep, 1 - r)
    res = SsfResult(lam, r, rep, sc, hi.n_minus, lo.n_minus, hi.n_plus, lo.n_plus)
    return res.bracket(operator)


# ---------------------------------------------------------------------------
# imaginary part


def g_norm_sq(P: PotentialModel, spec: FiberSpec, j: int, k: float, step: float = 0.0125) -> float:
    """``||g_k||^2 = (1/2pi) int int V psi_j(x;k)^2 dx dy``."""
    grid = MasterGrid.covering(spec, k, step=step)
    _, modes = modes_on_grid(grid, j, [k])
    F0 = cosine_transform(P, grid.x, 0.0)
    return float(grid.step * np.dot(F0, modes[0] ** 2))


def im_tj_trace(P: PotentialModel, spec: FiberSpec, inv: InverseBand, j: int, lam: float) -> float:
    """Magnitude ``pi |rho'(lam)| ||g_{rho(lam)}||^2`` of the rank-one imaginary part."""
    if not lam > 0:
        raise ValueError("lam must be positive")
    k = invert_band(inv, lam)
    dE = band_value_and_derivative(spec, j, k)[1]
    return float(np.pi / abs(dE) * g_norm_sq(P, spec, j, k))


# ---------------------------------------------------------------------------
# Toeplitz-type operator with limit modes


def toeplitz_vj_spectrum(P: PotentialModel, j: int, b: float, k_window: tuple[float, float], n_nodes: int,
                         x_step: float = 0.025, pad: float = 10.0) -> SpectrumReport:
    """Nystrom spectrum of the band-projected potential on the full line.

    Kernel ``(1/2pi) int int W(x,y) e^{-i(k-k')y} psi_inf(x;k) psi_inf(x;k') dy dx``
    with ``psi_inf`` the oscillator modes; uniform k nodes with trapezoid
    weights on ``k_window``.
    """
    ka, kb = k_window
    ks = np.linspace(ka, kb, n_nodes)
    h = (kb - ka) / (n_nodes - 1)
    w = np.full(n_nodes, h)
    w[0] = w[-1] = 0.5 * h
    xa = ka / b - pad / np.sqrt(b)
    xb = kb / b + pad / np.sqrt(b)
    nx = int(math.ceil((xb - xa) / x_step))
    x = np.linspace(xa, xb, nx + 1)
    dx = x[1] - x[0]
    modes = limit_mode(j, ks[:, None], b, x[None, :])
    G = gram_unweighted(P, x, dx, ks, modes)
    sw = np.sqrt(w)
    M = G * sw[:, None] * sw[None, :]
    ev = sym_eigh(M)[0] if n_nodes > JACOBI_MAX_N else jacobi_eigs(M)[0]
    scale = np.max(np.abs(ev)) if ev.size else 0.0
    ev = ev[np.abs(ev) > DROP_TOL * scale] if scale > 0 else ev[:0]
    ev = _sorted_by_magnitude(ev)
    return SpectrumReport(ev, float(np.sum(np.abs(ev))), {"nodes": n_nodes, "k_step": h, "x_step": dx,
                                                            "k_window": (ka, kb)})


def toeplitz_window(P: PotentialModel, lam: float, b: float, margin: float = 6.0) -> tuple[float, float]:
    K = coverage_k(P, lam, b, margin=margin)
    return -K, K


def weyl_count(P: PotentialModel, lam: float, b: float) -> float:
    """Landau-level Weyl prediction ``b * N_full(lam)``."""
    return b * volume_function(P, lam, "full_plane")
