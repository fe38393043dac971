"""Edge channels, Fermi line, intersection numbers and the index report."""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .bulk import BulkIndexResult, bulk_index
from .errors import (AmbiguousLink, BecLabError, BoundaryCaseImZZero, TangentialCrossing,
                     ValidationError)
from .fiber import ScanConfig, scan_fibers, scan_halfline
from .model import Grid, HalfLineBC, default_grid
from .oracles import merging_point
from .profiles import ModelSpec
from .quadrature import QuadratureConfig

LINK_OVERLAP = 0.8
AMBIGUITY_MARGIN = 0.05
BRIDGE_STEPS = 5
TANGENT_SLOPE = 1e-6
DEFAULT_EPSILON_FRACTION = 0.1


@dataclass(frozen=True)
class FermiLine:
    """mu_eps(k1) = -eps + sqrt(k1^2 + m~^2), just below the upper band."""

    epsilon: float
    m_tilde: float

    def __post_init__(self):
        if not (0.0 < self.epsilon < self.m_tilde):
            raise ValidationError(f"Fermi line needs 0 < eps < m~, got eps={self.epsilon}, "
                                  f"m~={self.m_tilde}")

    @classmethod
    def from_fraction(cls, m_tilde, fraction=DEFAULT_EPSILON_FRACTION):
        if not 0.0 < fraction < 1.0:
            raise ValidationError("fermi_epsilon_fraction must lie in (0, 1)")
        return cls(fraction * m_tilde, m_tilde)

    def __call__(self, k1):
        return -self.epsilon + np.hypot(k1, self.m_tilde)

    def derivative(self, k1):
        return np.asarray(k1) / np.hypot(k1, self.m_tilde)

    def to_dict(self):
        return {"epsilon": self.epsilon, "m_tilde": self.m_tilde}


def default_scan(m_tilde, epsilon, count=81):
    """Symmetric scan wide enough to contain the crossing of omega = -k1.

    That crossing sits at k1 = -(m~^2 - eps^2) / (2 eps); a quarter margin is
    added, and the scan never gets narrower than 3 m~.
    """
    half = max(3.0 * m_tilde, 1.25 * (m_tilde ** 2 - epsilon ** 2) / (2.0 * epsilon))
    return ScanConfig(-half, half, count)


# ------------------------------------------------------------------ channels

@dataclass(frozen=True)
class ChannelSample:
    k1: float
    omega: float
    fiber: int  # index into the scan
    state: int  # column of that fiber's bound_vectors


@dataclass
class EdgeChannel:
    """A traced dispersion branch.

    ``segments`` are runs of linked samples on consecutive fibers; several
    segments occur only when a branch was bridged across a short stretch
    where it is too close to the band edge to be flagged bound.
    """

    id: int
    segments: list
    start: dict
    end: dict

    @property
    def samples(self):
        return [s for seg in self.segments for s in seg]

    @property
    def k1(self):
        return np.array([s.k1 for s in self.samples])

    @property
    def omega(self):
        return np.array([s.omega for s in self.samples])

    @property
    def n_samples(self):
        return sum(len(seg) for seg in self.segments)

    @classmethod
    def from_curve(cls, k1, omega, id=0):
        """Single-segment channel from sampled curve values (no vectors)."""
        seg = [ChannelSample(float(k), float(w), i, -1) for i, (k, w) in enumerate(zip(k1, omega))]
        bnd = {"kind": "scan_boundary"}
        return cls(id, [seg], dict(bnd, k1=seg[0].k1), dict(bnd, k1=seg[-1].k1))


def _check_uniform(k1):
    if k1.size < 2:
        return
    dk = np.diff(k1)
    if np.any(dk <= 0) or np.max(np.abs(dk - dk.mean())) > 1e-9 * max(1.0, abs(dk.mean())):
        raise ValidationError("trace_channels needs a uniform increasing k1 grid")


def _link(Va, Vb, k1a, issues):
    """Greedy maximal-overlap matching between bound states of adjacent fibers."""
    if Va.shape[1] == 0 or Vb.shape[1] == 0:
        return {}
    O = np.abs(Va.T @ Vb)
    for i in range(O.shape[0]):
        row = np.sort(O[i][O[i] >= LINK_OVERLAP])[::-1]
        if row.size > 1 and row[0] - row[1] < AMBIGUITY_MARGIN:
            msg = (f"ambiguous link at k1={k1a:.6g}: overlaps {row[0]:.3f} and {row[1]:.3f}; "
                   "taking the larger")
            warnings.warn(msg, AmbiguousLink, stacklevel=3)
            issues.append(msg)
    pairs = [(-O[i, j], i, j) for i in range(O.shape[0]) for j in range(O.shape[1])
             if O[i, j] >= LINK_OVERLAP]
    pairs.sort()
    links, used = {}, set()
    for _, i, j in pairs:
        if i not in links and j not in used:
            links[i] = j
            used.add(j)
    return links


def _endpoint(scan, sample, at_scan_end):
    if at_scan_end:
        return {"kind": "scan_boundary", "k1": sample.k1}
    band = "+" if sample.omega > 0 else "-"
    return {"kind": "merges_into_band", "band": band, "k1": sample.k1}


def _density(scan, s):
    v = scan[s.fiber].bound_vectors[:, s.state]
    return v * v


def trace_channels(scan, bridge_steps=BRIDGE_STEPS, issues=None):
    """Link bound eigenpairs across adjacent fibers into channels.

    Links need |<a|b>| >= 0.8.  A branch that stops inside the scan and one
    that starts at most ``bridge_steps`` fibers later with matching density
    profile (Bhattacharyya overlap >= 0.8) are joined as one channel.
    """
    if len(scan) == 0:
        raise ValidationError("scan is empty")
    issues = [] if issues is None else issues
    k1 = np.array([f.k1 for f in scan])
    _check_uniform(k1)
    nf = len(scan)
    pieces = []
    open_at = {}  # state index in current fiber -> piece
    for i, fib in enumerate(scan):
        omegas = fib.bound_omegas
        nxt = {}
        links = _link(scan[i - 1].bound_vectors, fib.bound_vectors, scan[i - 1].k1, issues) if i else {}
        inv = {j: a for a, j in links.items()}
        for j in range(omegas.size):
            s = ChannelSample(float(fib.k1), float(omegas[j]), i, j)
            if j in inv and inv[j] in open_at:
                piece = open_at[inv[j]]
                piece.append(s)
            else:
                piece = [s]
                pieces.append(piece)
            nxt[j] = piece
        open_at = nxt
    # bridge short interruptions of the same branch
    pieces.sort(key=lambda p: (p[0].fiber, p[0].omega))
    chains = [[p] for p in pieces]
    joined = True
    while joined:
        joined = False
        for a in chains:
            tail = a[-1][-1]
            if tail.fiber == nf - 1:
                continue
            best = None
            for b in chains:
                if b is a:
                    continue
                head = b[0][0]
                gap = head.fiber - tail.fiber
                if head.fiber == 0 or not 1 < gap <= bridge_steps + 1:
                    continue
                p, q = _density(scan, tail), _density(scan, head)
                bc = float(np.sum(np.sqrt(p * q)))
                if bc >= LINK_OVERLAP and (best is None or bc > best[0]):
                    best = (bc, b)
            if best is not None:
                a.extend(best[1])
                chains.remove(best[1])
                joined = True
                break
    chains.sort(key=lambda c: (c[0][0].fiber, c[0][0].omega))
    out = []
    for cid, segs in enumerate(chains):
        first, last = segs[0][0], segs[-1][-1]
        out.append(EdgeChannel(cid, segs, _endpoint(scan, first, first.fiber == 0),
                               _endpoint(scan, last, last.fiber == nf - 1)))
    return out


# ------------------------------------------------------------ intersections

@dataclass(frozen=True)
class Crossing:
    k1: float
    sign: int
    slope: float


@dataclass(frozen=True)
class IntersectionResult:
    total: int
    crossings: tuple


def intersection_number(channel: EdgeChannel, fermi: FermiLine) -> IntersectionResult:
    """Signed crossings of the channel with the Fermi line.

    A crossing is a sign change of g = omega - mu_eps between consecutive
    samples of one segment; its sign is that of the secant slope of g.
    """
    if channel.n_samples < 2:
        raise ValidationError("intersection_number needs a channel with >= 2 samples")
    crossings = []
    for seg in channel.segments:
        k = np.array([s.k1 for s in seg])
        g = np.array([s.omega for s in seg]) - fermi(k)
        nz = np.flatnonzero(g != 0.0)
        for p, q in zip(nz[:-1], nz[1:]):
            if g[p] * g[q] >= 0:
                continue
            slope = (g[q] - g[p]) / (k[q] - k[p])
            kc = k[p] - g[p] / slope
            if abs(slope) < TANGENT_SLOPE:
                raise TangentialCrossing(f"near-tangential crossing at k1={kc:.6g}; refine the scan")
            crossings.append(Crossing(float(kc), 1 if slope > 0 else -1, float(slope)))
    return IntersectionResult(sum(c.sign for c in crossings), tuple(crossings))


def edge_index(channels, fermi: FermiLine) -> int:
    """-sum_j I(mu_eps, omega_j) over channels with at least two samples."""
    return -sum(intersection_number(c, fermi).total for c in channels if c.n_samples >= 2)


# ------------------------------------------------------------------ reports

@dataclass
class ChannelSummary:
    id: int
    n_samples: int
    k1_min: float
    k1_max: float
    intersection: int
    crossings: list
    start: dict
    end: dict
    n_segments: int

    @property
    def contributing(self):
        return self.intersection != 0

    def to_dict(self):
        return {
            "id": self.id,
            "n_samples": self.n_samples,
            "n_segments": self.n_segments,
            "k1_range": [self.k1_min, self.k1_max],
            "intersection": self.intersection,
            "contribution": -self.intersection,
            "crossings": [{"k1": c.k1, "sign": c.sign} for c in self.crossings],
            "start": self.start,
            "end": self.end,
        }


def summarize(channel: EdgeChannel, fermi: FermiLine | None):
    res = (intersection_number(channel, fermi) if fermi is not None and channel.n_samples >= 2
           else IntersectionResult(0, ()))
    k = channel.k1
    return ChannelSummary(channel.id, channel.n_samples, float(k.min()), float(k.max()),
                          res.total, list(res.crossings), channel.start, channel.end,
                          len(channel.segments))


@dataclass
class IndexReport:
    bulk: BulkIndexResult | None
    edge_index: int | None
    channels: list
    bec_holds: bool | None
    diagnostics: dict
    channel_data: list = field(default_factory=list, repr=False)
    scan: list = field(default_factory=list, repr=False)
    fermi: FermiLine | None = None

    @property
    def n_channels(self):
        return len(self.channels)

    @property
    def n_contributing(self):
        return sum(1 for c in self.channels if c.contributing)

    def to_dict(self):
        return {
            "bulk": None if self.bulk is None else self.bulk.to_dict(),
            "edge_index": self.edge_index,
            "bec_holds": self.bec_holds,
            "n_channels": self.n_channels,
            "n_contributing": self.n_contributing,
            "per_channel": [c.to_dict() for c in self.channels],
            "diagnostics": self.diagnostics,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def summary_line(self):
        def fmt(v):
            return "n/a" if v is None else f"{v:+d}"

        b = None if self.bulk is None else self.bulk.chern_rounded
        verdict = {True: "HOLDS", False: "FAILS", None: "n/a"}[self.bec_holds]
        return f"bulk={fmt(b)} edge={fmt(self.edge_index)} BEC: {verdict}"


def _stage(label, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except BecLabError as exc:
        exc.args = (f"[{label}] {exc}",)
        raise


def edge_report(spec: ModelSpec, scan_config=None, grid=None, epsilon_fraction=None,
                threads=None, bulk=None) -> IndexReport:
    """Scan, trace and count; ``bulk`` (if given) sets the BEC verdict."""
    frac = DEFAULT_EPSILON_FRACTION if epsilon_fraction is None else epsilon_fraction
    fermi = FermiLine.from_fraction(spec.m_tilde, frac)
    if scan_config is None:
        scan_config = default_scan(spec.m_tilde, fermi.epsilon)
    elif isinstance(scan_config, dict):
        scan_config = ScanConfig(**scan_config)
    ks = scan_config.k1_values
    if grid is None:
        nz = np.abs(ks[ks != 0])
        grid = default_grid(spec, float(np.abs(ks).max()), float(nz.min()) if nz.size else None)
    scan = _stage("scan", scan_fibers, spec, scan_config, grid, threads)
    issues = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AmbiguousLink)
        channels = _stage("trace", trace_channels, scan, issues=issues)
    summaries = _stage("intersect", lambda: [summarize(c, fermi) for c in channels])
    idx = -sum(s.intersection for s in summaries)
    for s in summaries:
        for end in (s.start, s.end):
            if end["kind"] == "scan_boundary":
                issues.append(f"channel {s.id} reaches the scan boundary at k1={end['k1']:.6g} "
                              "without merging")
    f0 = scan[0]
    diag = {
        "sector": spec.sector.value,
        "profile": spec.profile.to_dict(),
        "m_tilde": spec.m_tilde,
        "grid": grid.to_dict(),
        "scan": scan_config.to_dict(),
        "fermi": fermi.to_dict(),
        "fermi_epsilon_fraction": frac,
        "ch": f0.ch,
        "delta_gap": f0.delta_gap,
        "delta0": f0.delta0,
        "bound_states": int(sum(f.n_bound for f in scan)),
        "warnings": issues,
    }
    if not spec.profile.is_monotone:
        diag["hypotheses"] = ("profile is not monotone: the edge index is computed but lies "
                              "outside the monotone-profile setting where it is guaranteed")
    bec = None if bulk is None else bool(bulk.chern_rounded == idx)
    return IndexReport(bulk, idx, summaries, bec, diag, channels, scan, fermi)


def bec_report(spec: ModelSpec, quadrature_config=QuadratureConfig(), scan_config=None,
               grid=None, epsilon_fraction=None, threads=None) -> IndexReport:
    """Bulk index, edge index and their comparison."""
    lo, hi = spec.profile.asymptotes
    if spec.profile.is_constant or not lo * hi < 0:
        raise ValidationError("bec_report needs opposite-sign asymptotes")
    bulk = _stage("bulk", bulk_index, spec, quadrature_config)
    rep = edge_report(spec, scan_config, grid, epsilon_fraction, threads, bulk=bulk)
    rep.diagnostics["quadrature"] = quadrature_config.to_dict()
    return rep


# ---------------------------------------------------------------- half-plane

def halfline_default_scan(bc: HalfLineBC, m_plus):
    """[-K, K] with K = max(4 m+, 1.5 |k1*|) at spacing 0.1 m+."""
    half = 4.0 * m_plus
    if abs(bc.z.imag) >= 1e-9:
        half = max(half, 1.5 * abs(merging_point(bc.z, m_plus)[0]))
    n = int(math.ceil(10.0 * half / m_plus))
    return ScanConfig(-half, half, 2 * n + 1)


def halfline_default_grid(m_plus):
    return Grid(30.0 / m_plus, min(0.05 / m_plus, 0.05))


def halfplane_channels(bc: HalfLineBC, m_plus, scan_config=None, grid=None, threads=None):
    scan_config = halfline_default_scan(bc, m_plus) if scan_config is None else scan_config
    if isinstance(scan_config, dict):
        scan_config = ScanConfig(**scan_config)
    grid = halfline_default_grid(m_plus) if grid is None else grid
    scan = scan_halfline(bc, m_plus, scan_config, grid, threads)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", AmbiguousLink)
        return trace_channels(scan), scan


def halfplane_edge_index(bc: HalfLineBC, m_plus, scan_config=None, method="traced",
                         grid=None, threads=None) -> int:
    """Signed count of merging points on the positive band.

    A channel born from the positive band (it exists to the right of its
    merging point) counts +1, one dying into it counts -1.
    """
    if not m_plus > 0:
        raise ValidationError("m_plus must be positive")
    if abs(bc.z.imag) < 1e-9:
        raise BoundaryCaseImZZero("Im z = 0 lies between the two tabulated cases")
    if method == "analytic":
        _, w_star = merging_point(bc.z, m_plus)
        born = bc.z.imag > 0  # bound for k1 >= k1*
        return (1 if born else -1) if w_star > 0 else 0
    if method != "traced":
        raise ValidationError("method must be 'traced' or 'analytic'")
    channels, _ = halfplane_channels(bc, m_plus, scan_config, grid, threads)
    return merging_count(channels)


def merging_count(channels):
    """+1 per channel born from the positive band, -1 per channel dying into it."""
    total = 0
    for c in channels:
        if c.start.get("band") == "+" and c.start["kind"] == "merges_into_band":
            total += 1
        if c.end.get("band") == "+" and c.end["kind"] == "merges_into_band":
            total -= 1
    return total
