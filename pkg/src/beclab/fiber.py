"""Fiber eigenproblems H(k1) psi = omega psi and bound-state classification.

Every eigenvalue of a fiber is computed; eigenvectors only inside the
window |omega| <= gap_edge + margin (minus the shallow-water flat zone),
since nothing outside can be bound.  Tridiagonal fibers go through LAPACK
stebz/stein, the pentadiagonal shallow-water fibers through banded inverse
iteration with reorthogonalisation inside clusters.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, eig_banded, eigh_tridiagonal, solve_banded

from .errors import BecLabError, EigensolverFailure, InvalidForProfile, ValidationError
from .model import FiberOperator, Grid, HalfLineBC, build_fiber_operator, build_halfline_operator
from .oracles import analytic_state, halfline_state, state_is_valid
from .profiles import ModelSpec

LOCALIZATION_THRESHOLD = 0.9
ARTIFACT_THRESHOLD = 0.6
FLAT_EXCEPTION_SCORE = 0.95
FLAT_EXCEPTION_OVERLAP = 0.9
CLUSTER_RTOL = 1e-9


@dataclass(frozen=True)
class ScanConfig:
    k1_min: float
    k1_max: float
    count: int

    def __post_init__(self):
        if not int(self.count) == self.count or self.count < 8:
            raise ValidationError("scan.count must be an integer >= 8")
        if not self.k1_min < self.k1_max:
            raise ValidationError("scan needs k1_min < k1_max")

    @property
    def k1_values(self):
        return np.linspace(self.k1_min, self.k1_max, int(self.count))

    def to_dict(self):
        return {"k1_min": self.k1_min, "k1_max": self.k1_max, "count": int(self.count)}


@dataclass
class FiberSpectrum:
    """Spectrum of one fiber.

    ``eigenvalues`` is the full sorted spectrum.  The per-state arrays
    (``omega``, ``localization``, ``bound_flags`` ...) cover the eigenpairs
    inside the classification window, sorted by omega and then by
    decreasing localization.
    """

    k1: float
    eigenvalues: np.ndarray
    omega: np.ndarray
    localization: np.ndarray
    edge_score: np.ndarray
    bound_flags: np.ndarray
    artifact: np.ndarray
    flat_exception: np.ndarray
    bound_vectors: np.ndarray
    gap_edge: float
    delta_gap: float
    ch: float
    delta0: float = 0.0
    window: tuple = (0.0, 0.0)
    eigenvectors: np.ndarray | None = None
    kind: str = "dirac"
    meta: dict = field(default_factory=dict)

    @property
    def bound_omegas(self):
        return self.omega[self.bound_flags]

    @property
    def n_bound(self):
        return int(np.count_nonzero(self.bound_flags))

    @property
    def continuum(self):
        return ~self.bound_flags & ~self.artifact

    @property
    def continuum_edge(self):
        """Smallest |omega| among delocalised, non-artifact window states."""
        w = np.abs(self.omega[self.continuum])
        return float(w.min()) if w.size else math.inf

    @property
    def flat_cluster(self):
        return self.eigenvalues[np.abs(self.eigenvalues) < self.delta0] if self.delta0 else self.eigenvalues[:0]


# ------------------------------------------------------------ eigensolvers

def chiral_levels(spec: ModelSpec, grid: Grid):
    """Positive singular values s of the k1-independent hopping part.

    The Dirac fiber is k1 G + K with G = diag(-1 on d, +1 on s) anticommuting
    with K, so its spectrum is -k1 (the kernel of K) and +-sqrt(k1^2 + s^2).
    """
    op = build_fiber_operator(spec, 0.0, grid)
    try:
        lam = eigh_tridiagonal(np.zeros(op.dim), op.band[1, :-1], eigvals_only=True,
                               lapack_driver="sterf")
    except (LinAlgError, ValueError) as exc:
        raise EigensolverFailure(_diagnostics(op, str(exc))) from exc
    M = (op.dim - 1) // 2
    return np.abs(lam[M + 1:])


def _chiral_spectrum(k1, levels):
    r = np.sqrt(k1 * k1 + levels * levels)
    return np.sort(np.concatenate([-r, [-k1], r]))


def _tridiagonal(op: FiberOperator, window, levels=None):
    d, e = op.band[0], op.band[1, :-1]
    try:
        if levels is None:
            allw = eigh_tridiagonal(d, e, eigvals_only=True, lapack_driver="sterf")
        else:
            allw = _chiral_spectrum(op.k1, levels)
        if window[1] > window[0]:
            w, v = eigh_tridiagonal(d, e, select="v", select_range=window, lapack_driver="stebz")
        else:
            w, v = np.empty(0), np.empty((d.size, 0))
    except (LinAlgError, ValueError) as exc:
        raise EigensolverFailure(_diagnostics(op, str(exc))) from exc
    return allw, w, v


def _band_norm(op):
    b = op.band
    rows = np.abs(b[0]).copy()
    for d in range(1, b.shape[0]):
        rows[d:] += np.abs(b[d, : b.shape[1] - d])
        rows[: b.shape[1] - d] += np.abs(b[d, : b.shape[1] - d])
    return float(rows.max())


def _diagnostics(op, msg):
    return (f"{msg} (kind={op.kind}, k1={op.k1}, dim={op.dim}, bandwidth={op.bandwidth}, "
            f"norm={_band_norm(op):.3e})")


def banded_inverse_iteration(band, lam, iterations=3, seed=0):
    """Eigenvectors of the real symmetric band matrix for given eigenvalues.

    ``band`` is in lower form (band[d, c] = A[c + d, c]).  Vectors of
    eigenvalues closer than 1e-3 ||A|| are kept mutually orthogonal.
    """
    b = band.shape[0] - 1
    n = band.shape[1]
    full = np.zeros((2 * b + 1, n))
    for d in range(b + 1):
        full[b + d, : n - d] = band[d, : n - d]
        full[b - d, d:] = band[d, : n - d]
    scale = max(np.abs(full).sum(axis=0).max(), 1.0)
    ortol = 1e-3 * scale
    rng = np.random.default_rng(seed)
    V = np.empty((n, len(lam)))
    for i, lm in enumerate(lam):
        near = [j for j in range(i) if abs(lam[j] - lm) < ortol]
        Vc = V[:, near]
        x = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        shift = lm
        for _ in range(iterations):
            A = full.copy()
            A[b] -= shift
            for attempt in range(4):
                try:
                    y = solve_banded((b, b), A, x, check_finite=False)
                    break
                except LinAlgError:
                    shift += 4.0 * np.finfo(float).eps * scale * (attempt + 1)
                    A = full.copy()
                    A[b] -= shift
            else:
                raise EigensolverFailure(f"inverse iteration singular at omega={lm:.6g}")
            if near:
                y -= Vc @ (Vc.T @ y)
                y -= Vc @ (Vc.T @ y)
            nrm = np.linalg.norm(y)
            if not np.isfinite(nrm) or nrm == 0:
                raise EigensolverFailure(f"inverse iteration broke down at omega={lm:.6g}")
            x = y / nrm
        V[:, i] = x
    return V


def _banded(op: FiberOperator, window, delta0):
    try:
        allw = eig_banded(op.band, lower=True, eigvals_only=True, check_finite=False)
    except (LinAlgError, ValueError) as exc:
        raise EigensolverFailure(_diagnostics(op, str(exc))) from exc
    aw = np.abs(allw)
    sel = np.flatnonzero((aw <= window[1]) & (aw >= delta0))
    lam = allw[sel]
    V = banded_inverse_iteration(op.band, lam)
    R = op.real_matrix
    res = np.linalg.norm(R @ V - V * lam, axis=0) if lam.size else np.zeros(0)
    if res.size and res.max() > 1e-8 * _band_norm(op):
        raise EigensolverFailure(_diagnostics(op, f"eigenvector residual {res.max():.2e}"))
    return allw, lam, V


def _separate_clusters(op, w, V):
    """Rotate near-degenerate eigenvectors to diagonalise position."""
    if w.size < 2:
        return w, V
    tol = CLUSTER_RTOL * max(_band_norm(op), 1.0)
    R = None
    i = 0
    w = w.copy()
    while i < w.size:
        j = i + 1
        while j < w.size and w[j] - w[j - 1] < tol:
            j += 1
        if j - i > 1:
            R = op.real_matrix if R is None else R
            X = V[:, i:j]
            Q = X.T @ (op.positions[:, None] * X)
            _, rot = np.linalg.eigh(0.5 * (Q + Q.T))
            X = X @ rot
            V[:, i:j] = X
            w[i:j] = np.einsum("ij,ij->j", X, R @ X)
        i = j
    return w, V


def _scores(op, V, halfline=False):
    p = V * V
    x = op.positions
    L = op.half_width
    if halfline:
        inner = x <= 0.5 * L
        outer = x >= 0.75 * L
    else:
        inner = np.abs(x) <= 0.5 * L
        outer = np.abs(x) >= 0.75 * L
    tot = p.sum(axis=0)
    return p[inner].sum(axis=0) / tot, p[outer].sum(axis=0) / tot


# ------------------------------------------------------- Ch calibration

def residual_norm(op: FiberOperator, vec, omega):
    vec = np.asarray(vec, dtype=complex)
    r = op.matrix @ vec - omega * vec
    return float(np.linalg.norm(r) / np.linalg.norm(vec))


def analytic_residual(spec: ModelSpec, label, k1, grid: Grid):
    """||(H(k1) - omega) psi|| / ||psi|| for a closed-form state on the grid."""
    st = analytic_state(label, spec, k1, grid)
    op = build_fiber_operator(spec, k1, grid)
    return residual_norm(op, op.sample(st.evaluator), st.omega)


def calibrate_ch(spec: ModelSpec, grid: Grid, k1_values=None):
    """Observed size C h of the discretisation residual on this grid.

    Maximum analytic-state residual over reference fibers at the gap scale
    (k1 = 0, +-m~); falls back to h when the profile admits no closed-form
    interface state.
    """
    if k1_values is None:
        k = spec.m_tilde
        k1_values = (-k, 0.0, k)
    labels = ("DiracL", "DiracR") if spec.is_dirac else ("SW_L", "SW_R")
    res = [analytic_residual(spec, lab, k1, grid)
           for lab in labels for k1 in k1_values if state_is_valid(lab, spec, k1)]
    return float(max(res)) if res else float(grid.h)


def calibrate_ch_halfline(bc: HalfLineBC, m_plus, grid: Grid):
    """Residual of the exact edge state at the fiber where it decays at rate m+.

    That fiber is k1 = m+ (1 - Re z) / Im z (k1 = 0 when Im z = 0); falls
    back to h when the state there is not bound.
    """
    z = bc.z
    k1 = m_plus * (1.0 - z.real) / z.imag if abs(z.imag) > 1e-9 else 0.0
    try:
        ev, om = halfline_state(bc, m_plus, k1)
    except InvalidForProfile:
        return float(grid.h)
    op = build_halfline_operator(bc, m_plus, k1, grid)
    return residual_norm(op, _sample_halfline(op, ev), om)


def _sample_halfline(op, evaluator):
    U = op.meta["rotation"]
    out = np.zeros(op.dim)
    for c, row in ((0, 1), (1, 0)):  # label "phi2" -> row 1 of U psi
        idx = np.flatnonzero(op.components == c)
        out[idx] = (U @ np.asarray(evaluator(op.positions[idx])).real)[row]
    return out


def delta_gap_from(ch):
    return max(3.0 * ch, 1e-3)


def flat_zone_from(ch):
    return max(3.0 * ch, 1e-8)


# ------------------------------------------------------ flat-band exception

def flat_band_candidate(spec: ModelSpec, grid: Grid):
    """Discrete chiral state of the C-grid (solver basis) or None.

    eta follows the Crank-Nicolson recursion of the profile, u is minus/plus
    its midpoint average and v = 0; it is exact at k1 = 0.
    """
    prof = spec.profile
    if spec.is_dirac or prof.is_constant or not prof.is_monotone:
        return None, None
    label = "SW_L" if prof.is_nondecreasing else "SW_R"
    sig = 1.0 if label == "SW_L" else -1.0
    h = grid.h
    f = prof(grid.midpoints)
    num = 1.0 / h - 0.5 * sig * f
    den = 1.0 / h + 0.5 * sig * f
    if np.any(num <= 0) or np.any(den <= 0):
        return None, None
    n = grid.n
    logr = np.log(num) - np.log(den)
    cum = np.concatenate([[0.0], np.cumsum(logr)])
    eta = np.exp(cum - cum[n])
    u = -sig * 0.5 * (eta[:-1] + eta[1:])
    vec = np.zeros(3 * (2 * n) + 1)
    vec[0::3] = eta
    vec[1::3] = u
    return vec / np.linalg.norm(vec), label


# ------------------------------------------------------------------ solves

def _classify(op, kind, k1, allw, w, V, gap, ch, delta0, window, keep_vectors, halfline=False,
              extra=None):
    w, V = _separate_clusters(op, w, V)
    loc, edge = _scores(op, V, halfline)
    dgap = delta_gap_from(ch)
    bound = (loc >= LOCALIZATION_THRESHOLD) & (np.abs(w) < gap - dgap)
    artifact = (edge > ARTIFACT_THRESHOLD) & ~bound
    flat = np.zeros(w.size, dtype=bool)
    if extra is not None:
        ev, evec, eloc, eedge = extra
        w = np.append(w, ev)
        V = np.column_stack([V, evec])
        loc = np.append(loc, eloc)
        edge = np.append(edge, eedge)
        bound = np.append(bound, True)
        artifact = np.append(artifact, False)
        flat = np.append(flat, True)
    order = np.lexsort((-loc, w))
    w, V, loc, edge, bound, artifact, flat = (w[order], V[:, order], loc[order], edge[order],
                                              bound[order], artifact[order], flat[order])
    return FiberSpectrum(
        k1=float(k1), eigenvalues=np.sort(allw), omega=w, localization=loc, edge_score=edge,
        bound_flags=bound, artifact=artifact, flat_exception=flat,
        bound_vectors=V[:, bound].copy(), gap_edge=float(gap), delta_gap=dgap, ch=float(ch),
        delta0=float(delta0), window=window, eigenvectors=V if keep_vectors else None, kind=kind)


def window_half_width(gap):
    return gap + 0.1 * max(1.0, gap)


def solve_fiber(spec: ModelSpec, k1, grid: Grid, ch=None, keep_vectors=False,
                levels=None) -> FiberSpectrum:
    """Eigen-decompose one fiber and flag interface-bound states.

    ``levels`` (Dirac only) are precomputed :func:`chiral_levels` of the grid;
    scans pass them to avoid a full eigenvalue solve per fiber.
    """
    if ch is None:
        ch = calibrate_ch(spec, grid)
    op = build_fiber_operator(spec, k1, grid)
    gap = math.hypot(float(k1), spec.m_tilde)
    W = window_half_width(gap)
    if spec.is_dirac:
        allw, w, V = _tridiagonal(op, (-W, W), levels)
        return _classify(op, "dirac", k1, allw, w, V, gap, ch, 0.0, (-W, W), keep_vectors)
    delta0 = flat_zone_from(ch)
    allw, w, V = _banded(op, (-W, W), delta0)
    extra = None
    cand, label = flat_band_candidate(spec, grid)
    if cand is not None:
        R = op.real_matrix
        Rc = R @ cand
        wc = float(cand @ Rc)
        res = float(np.linalg.norm(Rc - wc * cand))
        if abs(wc) < delta0 and res <= delta0:
            loc, edge = _scores(op, cand[:, None])
            st = analytic_state(label, spec, k1, grid)
            ref = op.to_solver_basis(op.sample(st.evaluator))
            ov = abs(np.vdot(ref, cand)) / np.linalg.norm(ref)
            if loc[0] > FLAT_EXCEPTION_SCORE and ov > FLAT_EXCEPTION_OVERLAP:
                extra = (wc, cand, loc[0], edge[0])
    return _classify(op, "shallow_water", k1, allw, w, V, gap, ch, delta0, (-W, W),
                     keep_vectors, extra=extra)


def solve_halfline(bc: HalfLineBC, m_plus, k1, grid: Grid, ch=None, keep_vectors=False):
    """Half-line Dirac fiber with psi(0) in span(v0)."""
    if ch is None:
        ch = calibrate_ch_halfline(bc, m_plus, grid)
    op = build_halfline_operator(bc, m_plus, k1, grid)
    gap = math.hypot(float(k1), float(m_plus))
    W = window_half_width(gap)
    allw, w, V = _tridiagonal(op, (-W, W))
    return _classify(op, "halfline", k1, allw, w, V, gap, ch, 0.0, (-W, W), keep_vectors,
                     halfline=True)


def thread_count(threads=None):
    if threads is None:
        env = os.environ.get("BEC_LAB_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _map_ordered(fn, items, threads):
    def run(k1):
        try:
            return fn(k1)
        except BecLabError as exc:
            exc.args = (f"k1={k1!r}: {exc}",)
            raise

    threads = thread_count(threads)
    if threads == 1:
        return [run(k) for k in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(run, items))


def _k1_values(k1_range):
    if isinstance(k1_range, ScanConfig):
        return k1_range.k1_values
    if isinstance(k1_range, dict):
        return ScanConfig(**k1_range).k1_values
    return np.asarray(k1_range, dtype=float)


def scan_fibers(spec: ModelSpec, k1_range, grid: Grid, threads=None, ch=None):
    """Independent fiber solves over a k1 grid, returned in k1 order."""
    ks = _k1_values(k1_range)
    if ch is None:
        ch = calibrate_ch(spec, grid)
    levels = chiral_levels(spec, grid) if spec.is_dirac else None
    return _map_ordered(lambda k: solve_fiber(spec, k, grid, ch=ch, levels=levels), ks, threads)


def scan_halfline(bc: HalfLineBC, m_plus, k1_range, grid: Grid, threads=None, ch=None):
    ks = _k1_values(k1_range)
    if ch is None:
        ch = calibrate_ch_halfline(bc, m_plus, grid)
    return _map_ordered(lambda k: solve_halfline(bc, m_plus, k, grid, ch=ch), ks, threads)
