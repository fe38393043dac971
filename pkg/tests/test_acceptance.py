"""Acceptance criteria 1-11, one PASS/FAIL line each."""
import json
import math
import time

import numpy as np
import pytest

from beclab.bulk import boundary_degree, bulk_index, chern_half
from beclab.cli import main
from beclab.edge import bec_report, halfplane_channels, halfplane_edge_index
from beclab.fiber import ScanConfig, analytic_residual
from beclab.model import (Grid, HalfLineBC, build_fiber_operator, parity_operator,
                          particle_hole_operator)
from beclab.oracles import (halfplane_formulas, momentum_triple, random_hermitian, spin1_D,
                            verify_spin1_identity)
from beclab.profiles import ModelSpec, Profile

pytestmark = pytest.mark.slow

SCAN = ScanConfig(-2.0, 2.0, 81)
FRACTION = 0.3
DIRAC_GRID = Grid(40.0, 0.02)
SW_GRID = Grid(40.0, 0.025)
TOL = 5e-3

DIRAC_TANH = ModelSpec("dirac", Profile.tanh(-1, 1))
SW = ModelSpec("shallow_water", Profile.sign(1.0))
PROFILES = {
    "sgn(x2)": Profile.sign(1.0),
    "tanh(x2/5)": Profile.tanh(-1, 1, 5.0),
    "tabulated ramp": Profile.tabulated([-3.0, -1.0, 0.0, 1.0, 3.0], [-1.0, -0.8, 0.0, 0.8, 1.0]),
}


def timed(fn, *args, **kwargs):
    t0 = time.perf_counter()
    out = fn(*args, **kwargs)
    return out, time.perf_counter() - t0


@pytest.fixture(scope="module")
def dirac_run():
    return timed(bec_report, DIRAC_TANH, scan_config=SCAN, grid=DIRAC_GRID,
                 epsilon_fraction=FRACTION)


@pytest.fixture(scope="module")
def profile_runs():
    return {name: bec_report(ModelSpec("dirac", p), scan_config=SCAN, grid=DIRAC_GRID,
                             epsilon_fraction=FRACTION) for name, p in PROFILES.items()}


@pytest.fixture(scope="module")
def sw_run():
    return timed(bec_report, SW, scan_config=SCAN, grid=SW_GRID, epsilon_fraction=FRACTION)


def test_criterion_01_half_chern(verdict):
    rows, ok = [], True
    cases = [(DIRAC_TANH, m, math.copysign(0.5, m)) for m in (0.5, 1, 3, -0.5, -1, -3)]
    cases += [(SW, f, f) for f in (1.0, -1.0)]
    for spec, m, want in cases:
        c, dt = timed(chern_half, spec, m)
        good = abs(c - want) <= 1e-6 and dt < 5.0
        ok &= good
        rows.append(f"{spec.sector.value}({m:+g})={c:+.7f}/{dt:.2f}s")
    verdict(1, ok, "; ".join(rows))


def test_criterion_02_bulk_indices(verdict):
    d = bulk_index(DIRAC_TANH)
    s = bulk_index(SW)
    ok = (d.chern_rounded == 1 and abs(d.chern_glued - 1) <= 1e-3
          and s.chern_rounded == 2 and abs(s.chern_glued - 2) <= 1e-3)
    verdict(2, ok, f"dirac {d.chern_glued:+.7f} -> {d.chern_rounded:+d}, "
                   f"shallow water {s.chern_glued:+.7f} -> {s.chern_rounded:+d}")


def test_criterion_03_degree(verdict):
    rows, ok = [], True
    for m in (0.5, 1.0, 3.0, -0.5, -1.0, -3.0):
        deg = boundary_degree(DIRAC_TANH, m)
        twice = round(2 * chern_half(DIRAC_TANH, m))
        ok &= deg == np.sign(m) and twice == deg
        rows.append(f"m={m:+g}: deg={deg:+d} 2c={twice:+d}")
    verdict(3, ok, "; ".join(rows))


def test_criterion_04_dirac_edge(verdict, dirac_run):
    rep, dt = dirac_run
    dev = max(np.max(np.abs(c.omega + c.k1)) for c in rep.channel_data) if rep.channel_data else np.inf
    ok = (rep.n_channels == 1 and dev <= TOL and rep.edge_index == 1 and rep.bec_holds
          and dt < 60.0)
    verdict(4, ok, f"channels={rep.n_channels} max|omega+k1|={dev:.2e} "
                   f"{rep.summary_line()} runtime={dt:.1f}s")


def test_criterion_05_profile_independence(verdict, dirac_run, profile_runs):
    ref, _ = dirac_run

    def key(r):
        return (r.bulk.chern_rounded, r.edge_index, r.bec_holds, r.n_contributing)

    rows = [f"{name}: {r.summary_line()} channels={r.n_channels} contributing={r.n_contributing}"
            for name, r in profile_runs.items()]
    ok = all(key(r) == key(ref) for r in profile_runs.values())
    verdict(5, ok, "; ".join(rows))


def _sw_branch_deviation(channel):
    k, w = channel.k1, channel.omega
    far = np.abs(k) >= 0.1
    if not far.any():
        return np.inf, np.inf
    return (float(np.max(np.abs(w[far] + k[far]))),
            float(np.max(np.abs(w[far] - np.sign(k[far])))))


def test_criterion_06_shallow_water_edge(verdict, sw_run):
    rep, dt = sw_run
    devs = [_sw_branch_deviation(c) for c in rep.channel_data]
    a = min((d[0] for d in devs), default=np.inf)
    b = min((d[1] for d in devs), default=np.inf)
    coverage = all(
        any(np.any(np.isclose(c.k1, k)) for c in rep.channel_data)
        for k in SCAN.k1_values[np.abs(SCAN.k1_values) >= 0.1])
    ok = (rep.n_channels == 2 and a <= TOL and b <= TOL and coverage
          and rep.edge_index == 2 and rep.bec_holds)
    verdict(6, ok, f"channels={rep.n_channels} max|omega_a+k1|={a:.2e} "
                   f"max|omega_b-sgn k1|={b:.2e} {rep.summary_line()} runtime={dt:.0f}s")


def test_criterion_07_halfplane_family(verdict):
    upper = [math.pi * j / 10 for j in range(1, 10)]
    rows, ok = [], True
    for phi in upper + [-p for p in upper]:
        bc = HalfLineBC.from_angle(phi)
        channels, _ = halfplane_channels(bc, 1.0)
        idx = halfplane_edge_index(bc, 1.0)
        dev = max((float(np.max(np.abs(c.omega - [halfplane_formulas(bc.z, 1.0, k).omega
                                                    for k in c.k1])))
                   for c in channels), default=np.inf)
        if phi > 0:
            good = len(channels) >= 1 and dev <= TOL and idx == 1
            rows.append(f"phi={phi / math.pi:+.1f}pi idx={idx} dev={dev:.1e}")
        else:
            good = len(channels) == 0 and idx == 0
            bands = ",".join(c.end.get("band", "none") for c in channels)
            rows.append(f"phi={phi / math.pi:+.1f}pi idx={idx} bound_channels={len(channels)} "
                        f"(dev={dev:.1e}, merges into band {bands})")
        ok &= good
    verdict(7, ok, "; ".join(rows))


def test_criterion_08_energy_window(verdict, dirac_run, profile_runs):
    total = inside = 0
    for rep in [dirac_run[0], *profile_runs.values()]:
        mt = rep.diagnostics["m_tilde"]
        for f in rep.scan:
            w2 = f.bound_omegas ** 2
            k2 = f.k1 ** 2
            total += w2.size
            inside += int(np.count_nonzero((k2 - TOL ** 2 <= w2) & (w2 < k2 + mt ** 2)))
    verdict(8, total > 0 and inside == total, f"{inside}/{total} bound Dirac eigenvalues in window")


def test_criterion_09_essential_edges(verdict, dirac_run, sw_run):
    worst = {}
    for name, rep in (("dirac", dirac_run[0]), ("shallow_water", sw_run[0])):
        mt = rep.diagnostics["m_tilde"]
        worst[name] = max(abs(f.continuum_edge - math.hypot(f.k1, mt)) for f in rep.scan)
    sw_scan = sw_run[0].scan
    cluster = all(f.flat_cluster.size > 0 for f in sw_scan)
    stray = sum(int(np.count_nonzero(f.bound_flags & (np.abs(f.omega) <= f.delta0)
                                     & ~f.flat_exception)) for f in sw_scan)
    ok = max(worst.values()) <= 2e-2 and cluster and stray == 0
    verdict(9, ok, f"edge deviation dirac={worst['dirac']:.2e} sw={worst['shallow_water']:.2e}; "
                   f"flat cluster in every fiber={cluster}; stray flat bound states={stray}")


def test_criterion_10_identity(verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    worst = max(verify_spin1_identity(*(random_hermitian(rng, 8) for _ in range(3)))
                for _ in range(100))
    dt = time.perf_counter() - t0
    commuting = [np.diag(np.arange(8.0) - s) for s in (1, 3, 6)]
    dmax = float(np.max(np.abs(spin1_D(*commuting))))
    ok = worst <= 1e-10 and dmax == 0.0 and dt < 2.0
    verdict(10, ok, f"max residual {worst:.2e} over 100 triples in {dt:.2f}s; commuting |D|={dmax}")


def _ph_gap(spec, k1, grid):
    Hp = build_fiber_operator(spec, k1, grid).real_matrix.toarray()
    Hm = build_fiber_operator(spec, -k1, grid).real_matrix.toarray()
    C = particle_hole_operator(spec, grid).toarray()
    spec_gap = np.max(np.abs(np.linalg.eigvalsh(Hp) + np.linalg.eigvalsh(Hm)[::-1]))
    return max(spec_gap, float(np.max(np.abs(C @ Hp @ C + Hm))))


def test_criterion_11_properties(verdict, sw_run, tmp_path_factory):
    g = Grid(8.0, 0.1)
    ph = max(_ph_gap(s, k, g) for s in (DIRAC_TANH, SW) for k in (0.3, 1.2))
    # parity of the numerically bound shallow-water states
    rep = sw_run[0]
    fib = next(f for f in rep.scan if np.isclose(f.k1, 0.5))
    op = build_fiber_operator(SW, 0.5, SW_GRID)
    P = parity_operator(SW, SW_GRID)
    labels = []
    for w, v in zip(fib.bound_omegas, fib.bound_vectors.T):
        v = op.gauge * v
        labels.append((round(float(w), 2), round(float(np.vdot(v, P @ v).real / np.vdot(v, v).real))))
    parity_ok = sorted(labels) == [(-0.5, 1), (1.0, -1)]
    orders = {}
    for spec, lab in ((DIRAC_TANH, "DiracL"), (SW, "SW_L"), (SW, "SW_a")):
        r1 = analytic_residual(spec, lab, 0.5, Grid(16.0, 0.1))
        r2 = analytic_residual(spec, lab, 0.5, Grid(16.0, 0.05))
        orders[lab] = math.log2(r1 / r2)
    out = tmp_path_factory.mktemp("determinism")
    cfg = out / "cfg.json"
    cfg.write_text(json.dumps({"model": DIRAC_TANH.to_dict(),
                               "scan": {"k1_min": -2.0, "k1_max": 2.0, "count": 21},
                               "grid": {"L": 16.0, "h": 0.05}, "fermi_epsilon_fraction": FRACTION}))
    blobs = []
    for _ in range(2):
        assert main(["bec", "--config", str(cfg), "--out", str(out / "run")]) == 0
        blobs.append((out / "run" / "report.json").read_bytes()
                     + (out / "run" / "channels.csv").read_bytes()
                     + (out / "run" / "spectra.csv").read_bytes())
    same = blobs[0] == blobs[1]
    ok = ph <= 1e-10 and parity_ok and min(orders.values()) >= 0.9 and same
    verdict(11, ok, f"particle-hole {ph:.1e}; parity {labels}; residual orders "
                    + ", ".join(f"{k}={v:.2f}" for k, v in orders.items())
                    + f"; byte-identical reruns={same}")
