"""``bec-lab``: configuration, orchestration and result files."""
from __future__ import annotations

import argparse
import copy
import csv
import json
import math
import sys
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .bulk import bulk_index
from .edge import (DEFAULT_EPSILON_FRACTION, IndexReport, bec_report, edge_report,
                   halfline_default_grid, halfplane_channels, halfplane_edge_index,
                   merging_count)
from .errors import BecLabError, ConfigError, NumericalFailure, ValidationError
from .fiber import ScanConfig
from .model import Grid, HalfLineBC, default_grid
from .oracles import (analytic_state, halfplane_formulas, merging_point, momentum_triple,
                      random_hermitian, spin1_D, valid_labels, verify_spin1_identity)
from .profiles import ModelSpec
from .quadrature import QuadratureConfig

COMMANDS = ("bulk", "edge", "bec", "halfplane", "identity", "oracles")
IDENTITY_TOL = 1e-10


# ------------------------------------------------------------------ config

def parse_complex(s):
    """'0-1i', '0.5+0.2j', [re, im] or {"angle": phi} / {"angle_pi": phi/pi}."""
    if isinstance(s, (list, tuple)) and len(s) == 2:
        return complex(float(s[0]), float(s[1]))
    if isinstance(s, dict):
        if "angle" in s:
            phi = float(s["angle"])
        elif "angle_pi" in s:
            phi = math.pi * float(s["angle_pi"])
        else:
            raise ValueError("expected 'angle' or 'angle_pi'")
        return complex(math.cos(phi), math.sin(phi))
    if isinstance(s, (int, float, complex)) and not isinstance(s, bool):
        return complex(s)
    if isinstance(s, str):
        return complex(s.replace(" ", "").replace("i", "j"))
    raise ValueError(f"cannot read {s!r} as a complex number")


def _num(d, key, path, default=None, positive=True, integer=False):
    path = path.rstrip(".")
    full = f"{path}.{key}" if path else key
    v = d.get(key, default)
    if v is None:
        raise ConfigError(full, "missing")
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(full, f"expected a number, got {v!r}")
    if integer and int(v) != v:
        raise ConfigError(full, "expected an integer")
    if not math.isfinite(v) or (positive and v <= 0):
        raise ConfigError(full, f"must be positive and finite, got {v!r}")
    return int(v) if integer else float(v)


def _obj(d, key, path):
    v = d.get(key)
    if v is None:
        return None
    if not isinstance(v, dict):
        raise ConfigError(f"{path}{key}", "expected an object")
    return v


def _wrap(path, fn, *args):
    try:
        return fn(*args)
    except ConfigError:
        raise
    except (ValidationError, ValueError, TypeError, KeyError) as exc:
        raise ConfigError(path, str(exc)) from None


def _scan_from(d, path):
    if d is None:
        return None
    k0 = _num(d, "k1_min", path, positive=False)
    k1 = _num(d, "k1_max", path, positive=False)
    n = _num(d, "count", path, integer=True)
    return _wrap(path, ScanConfig, k0, k1, n)


def _grid_from(d, path):
    if d is None:
        return None
    return _wrap(path, Grid, _num(d, "L", path), _num(d, "h", path))


@dataclass(frozen=True)
class OutputConfig:
    dir: str = "bec-lab-out"
    report: str = "report.json"
    channels: str = "channels.csv"
    spectra: str = "spectra.csv"

    def to_dict(self):
        return {"dir": self.dir, "report": self.report, "channels": self.channels,
                "spectra": self.spectra}


@dataclass(frozen=True)
class HalfPlaneConfig:
    m_plus: float = 1.0
    z: tuple = (1j,)
    scan: ScanConfig | None = None
    grid: Grid | None = None

    def to_dict(self):
        return {"m_plus": self.m_plus, "z": [[w.real, w.imag] for w in self.z],
                "scan": None if self.scan is None else self.scan.to_dict(),
                "grid": None if self.grid is None else self.grid.to_dict()}


@dataclass(frozen=True)
class IdentityConfig:
    n: int = 8
    trials: int = 100

    def to_dict(self):
        return {"n": self.n, "trials": self.trials}


@dataclass(frozen=True)
class RunConfig:
    model: ModelSpec | None = None
    scan: ScanConfig | None = None
    grid: Grid | None = None
    quadrature: QuadratureConfig = QuadratureConfig()
    fermi_epsilon_fraction: float = DEFAULT_EPSILON_FRACTION
    outputs: OutputConfig = OutputConfig()
    seed: int = 0
    halfplane: HalfPlaneConfig = HalfPlaneConfig()
    identity: IdentityConfig = IdentityConfig()
    oracle_k1: tuple = (0.5,)

    def to_dict(self):
        return {
            "model": None if self.model is None else self.model.to_dict(),
            "scan": None if self.scan is None else self.scan.to_dict(),
            "grid": None if self.grid is None else self.grid.to_dict(),
            "quadrature": self.quadrature.to_dict(),
            "fermi_epsilon_fraction": self.fermi_epsilon_fraction,
            "outputs": self.outputs.to_dict(),
            "seed": self.seed,
            "halfplane": self.halfplane.to_dict(),
            "identity": self.identity.to_dict(),
            "oracle_k1": list(self.oracle_k1),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d, base_dir=None):
        if not isinstance(d, dict):
            raise ConfigError("<root>", "configuration must be a JSON object")
        known = set(cls.__dataclass_fields__)
        for key in d:
            if key not in known:
                raise ConfigError(key, "unknown field")
        model = None
        if d.get("model") is not None:
            model = _wrap("model", ModelSpec.from_dict, _obj(d, "model", ""), base_dir)
        q = _obj(d, "quadrature", "") or {}
        quad = _wrap("quadrature", QuadratureConfig,
                     _num(q, "tol", "quadrature", 1e-7),
                     _num(q, "max_panels", "quadrature", 2 ** 20, integer=True))
        frac = _num(d, "fermi_epsilon_fraction", "", DEFAULT_EPSILON_FRACTION)
        if not 0.0 < frac < 1.0:
            raise ConfigError("fermi_epsilon_fraction", "must lie in (0, 1)")
        o = _obj(d, "outputs", "") or {}
        for k, v in o.items():
            if k not in OutputConfig.__dataclass_fields__:
                raise ConfigError(f"outputs.{k}", "unknown field")
            if not isinstance(v, str) or not v:
                raise ConfigError(f"outputs.{k}", "expected a non-empty string")
        outputs = OutputConfig(**o)
        seed = d.get("seed", 0)
        if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
            raise ConfigError("seed", "expected a non-negative integer")
        hp = _obj(d, "halfplane", "") or {}
        zs = hp.get("z", [[0.0, 1.0]])
        if not isinstance(zs, list) or not zs:
            raise ConfigError("halfplane.z", "expected a non-empty list")
        zvals = []
        for i, zz in enumerate(zs):
            zc = _wrap(f"halfplane.z[{i}]", parse_complex, zz)
            _wrap(f"halfplane.z[{i}]", HalfLineBC, zc)
            zvals.append(zc)
        half = HalfPlaneConfig(_num(hp, "m_plus", "halfplane", 1.0), tuple(zvals),
                               _scan_from(_obj(hp, "scan", "halfplane."), "halfplane.scan"),
                               _grid_from(_obj(hp, "grid", "halfplane."), "halfplane.grid"))
        idc = _obj(d, "identity", "") or {}
        n = _num(idc, "n", "identity", 8, integer=True)
        if n > 64:
            raise ConfigError("identity.n", "must be <= 64")
        ident = IdentityConfig(n, _num(idc, "trials", "identity", 100, integer=True))
        ok1 = d.get("oracle_k1", [0.5])
        if not isinstance(ok1, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool)
                                                for v in ok1):
            raise ConfigError("oracle_k1", "expected a list of numbers")
        return cls(model, _scan_from(_obj(d, "scan", ""), "scan"), _grid_from(_obj(d, "grid", ""), "grid"),
                   quad, frac, outputs, seed, half, ident, tuple(float(v) for v in ok1))


def bundled_config_names():
    root = resources.files("beclab") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def load_raw_config(path):
    """Config dict and its base directory; bundled names are accepted."""
    p = Path(path)
    if not p.exists():
        name = p.name if p.name.endswith(".json") else p.name + ".json"
        res = resources.files("beclab") / "configs" / name
        if not res.is_file():
            raise ConfigError("--config", f"no such file or bundled config: {path}")
        text = res.read_text()
        base = None
    else:
        text = p.read_text()
        base = p.parent
    try:
        return json.loads(text), base
    except json.JSONDecodeError as exc:
        raise ConfigError("--config", f"invalid JSON: {exc}") from None


def apply_override(raw, item):
    """key.sub=value with value parsed as JSON when possible."""
    if "=" not in item:
        raise ConfigError("--override", f"expected key=value, got {item!r}")
    key, val = item.split("=", 1)
    try:
        value = json.loads(val)
    except json.JSONDecodeError:
        value = val
    parts = key.strip().split(".")
    node = raw
    for part in parts[:-1]:
        if node.get(part) is None:
            node[part] = {}
        node = node[part]
        if not isinstance(node, dict):
            raise ConfigError(key, "cannot override inside a non-object field")
    node[parts[-1]] = value
    return raw


# ------------------------------------------------------------------ writers

def _fmt(v):
    return repr(float(v))


def write_channels_csv(report: IndexReport, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["channel_id", "k1", "omega"])
        for ch in report.channel_data:
            for s in ch.samples:
                w.writerow([ch.id, _fmt(s.k1), _fmt(s.omega)])


def write_spectra_csv(scan, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k1", "omega", "bound_flag", "localization"])
        for f in scan:
            for om, b, loc in zip(f.omega, f.bound_flags, f.localization):
                w.writerow([_fmt(f.k1), _fmt(om), int(b), _fmt(loc)])


def _channel_columns(report: IndexReport, k1):
    cols = []
    for ch in report.channel_data:
        col = np.full(k1.size, np.nan)
        for s in ch.samples:
            col[s.fiber] = s.omega
        cols.append(col)
    return cols


def emit_plot_data(report: IndexReport, outdir):
    """Column files for dispersion plots and their rescaled variant.

    dispersion.dat: k1, upper/lower band edge, Fermi line, one column per
    channel (nan where absent).  dispersion_rescaled.dat: tanh(k1) and every
    energy divided by sqrt(k1^2 + m~^2).  channels.dat: long format.
    """
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    k1 = np.array([f.k1 for f in report.scan])
    mt = report.diagnostics["m_tilde"]
    edge = np.hypot(k1, mt)
    mu = report.fermi(k1) if report.fermi is not None else np.full(k1.size, np.nan)
    cols = [edge, -edge, mu] + _channel_columns(report, k1)
    names = ["band_edge_upper", "band_edge_lower", "mu_epsilon"] + \
            [f"channel_{c.id}" for c in report.channel_data]
    paths = {}
    views = (("dispersion.dat", "k1", k1, np.ones_like(k1)),
             ("dispersion_rescaled.dat", "tanh_k1", np.tanh(k1), edge))
    for fname, xname, x, scale in views:
        p = out / fname
        with open(p, "w") as fh:
            fh.write("# " + " ".join([xname] + names) + "\n")
            for i in range(k1.size):
                row = [x[i]] + [c[i] / scale[i] for c in cols]
                fh.write(" ".join(_fmt(v) for v in row) + "\n")
        paths[fname] = p
    p = out / "channels.dat"
    with open(p, "w") as fh:
        fh.write("# channel_id k1 omega\n")
        for ch in report.channel_data:
            for s in ch.samples:
                fh.write(f"{ch.id} {_fmt(s.k1)} {_fmt(s.omega)}\n")
    paths["channels.dat"] = p
    return paths


def _write_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# --------------------------------------------------------------- scenarios

def _need_model(cfg):
    if cfg.model is None:
        raise ConfigError("model", "this command needs a model")
    return cfg.model


def _run_bulk(cfg, out, args):
    res = bulk_index(_need_model(cfg), cfg.quadrature)
    _write_json(out / cfg.outputs.report, {"bulk": res.to_dict(), "config": cfg.to_dict()})
    return f"bulk={res.chern_rounded:+d} edge=n/a BEC: n/a"


def _edge_like(cfg, out, args, with_bulk):
    spec = _need_model(cfg)
    if with_bulk:
        rep = bec_report(spec, cfg.quadrature, cfg.scan, cfg.grid, cfg.fermi_epsilon_fraction)
    else:
        rep = edge_report(spec, cfg.scan, cfg.grid, cfg.fermi_epsilon_fraction)
    d = rep.to_dict()
    d["config"] = cfg.to_dict()
    _write_json(out / cfg.outputs.report, d)
    write_channels_csv(rep, out / cfg.outputs.channels)
    write_spectra_csv(rep.scan, out / cfg.outputs.spectra)
    if args.emit_plot_data:
        emit_plot_data(rep, args.emit_plot_data)
    return rep.summary_line()


def _run_halfplane(cfg, out, args):
    hp = cfg.halfplane
    zs = hp.z if args.z is None else (parse_complex(args.z),)
    rows, chan_rows = [], []
    for z in zs:
        bc = HalfLineBC(z)
        grid = hp.grid or halfline_default_grid(hp.m_plus)
        channels, scan = halfplane_channels(bc, hp.m_plus, hp.scan, grid)
        traced = merging_count(channels)
        analytic = halfplane_edge_index(bc, hp.m_plus, method="analytic")
        k_star, w_star = merging_point(z, hp.m_plus)
        dev = 0.0
        for ch in channels:
            ref = np.array([halfplane_formulas(z, hp.m_plus, k).omega for k in ch.k1])
            dev = max(dev, float(np.max(np.abs(ch.omega - ref))))
            for s in ch.samples:
                chan_rows.append([_fmt(z.real), _fmt(z.imag), ch.id, _fmt(s.k1), _fmt(s.omega)])
        rows.append({"z": [z.real, z.imag], "k1_star": k_star, "omega_star": w_star,
                     "n_channels": len(channels), "max_dispersion_deviation": dev,
                     "edge_index": traced, "edge_index_analytic": analytic,
                     "ch": scan[0].ch, "grid": grid.to_dict()})
    _write_json(out / cfg.outputs.report, {"halfplane": rows, "m_plus": hp.m_plus,
                                          "config": cfg.to_dict()})
    with open(out / cfg.outputs.channels, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re_z", "im_z", "channel_id", "k1", "omega"])
        w.writerows(chan_rows)
    parts = [f"z={r['z'][0]:+.4f}{r['z'][1]:+.4f}i edge={r['edge_index']:+d}" for r in rows]
    return "; ".join(parts)


def _run_identity(cfg, out, args):
    rng = np.random.default_rng(cfg.seed)
    n = cfg.identity.n
    res = [verify_spin1_identity(*(random_hermitian(rng, n) for _ in range(3)))
           for _ in range(cfg.identity.trials)]
    diag = [np.diag(rng.integers(-4, 5, size=n).astype(float)) for _ in range(3)]
    d_norm = float(np.linalg.norm(spin1_D(*diag)))
    mom = verify_spin1_identity(*momentum_triple(0.7, np.tanh, n=min(n * 2, 64)))
    worst = max(res + [mom])
    _write_json(out / cfg.outputs.report, {
        "identity": {"n": n, "trials": cfg.identity.trials, "seed": cfg.seed,
                     "max_residual": max(res), "residuals": res,
                     "commuting_D_norm": d_norm, "momentum_triple_residual": mom},
        "config": cfg.to_dict()})
    line = f"identity: max residual {worst:.2e} over {len(res)} trials, commuting |D|={d_norm:.1e}"
    if worst > IDENTITY_TOL:
        raise NumericalFailure(line)
    return line


def _run_oracles(cfg, out, args):
    spec = _need_model(cfg)
    k1s = cfg.oracle_k1
    grid = cfg.grid or default_grid(spec, max(abs(k) for k in k1s) or None)
    written = []
    odir = out / "oracles"
    odir.mkdir(parents=True, exist_ok=True)
    for k1 in k1s:
        for lab in valid_labels(spec, k1):
            st = analytic_state(lab, spec, k1, grid)
            p = odir / f"{lab}_k1_{k1:+.4f}.csv"
            with open(p, "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                nc = st.spinor.shape[0]
                w.writerow(["x2"] + [f"{part}{c}" for c in range(nc) for part in ("re", "im")]
                           + [f"omega={st.omega!r}"])
                for i, x in enumerate(st.x):
                    row = [_fmt(x)]
                    for c in range(nc):
                        row += [_fmt(st.spinor[c, i].real), _fmt(st.spinor[c, i].imag)]
                    w.writerow(row)
            written.append(p.name)
    _write_json(out / cfg.outputs.report, {"oracles": written, "grid": grid.to_dict(),
                                          "config": cfg.to_dict()})
    return f"oracles: wrote {len(written)} state files"


RUNNERS = {
    "bulk": _run_bulk,
    "edge": lambda c, o, a: _edge_like(c, o, a, False),
    "bec": lambda c, o, a: _edge_like(c, o, a, True),
    "halfplane": _run_halfplane,
    "identity": _run_identity,
    "oracles": _run_oracles,
}


def run_scenario(config: RunConfig, command, args=None):
    """Run one command; returns the summary line (errors propagate)."""
    if command not in RUNNERS:
        raise ValidationError(f"unknown command {command!r}")
    args = args or argparse.Namespace(emit_plot_data=None, z=None)
    out = Path(config.outputs.dir)
    out.mkdir(parents=True, exist_ok=True)
    return RUNNERS[command](config, out, args)


def build_parser():
    p = argparse.ArgumentParser(prog="bec-lab", description="Bulk and edge indices of "
                                "Dirac and shallow-water interface models.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON config path or bundled name (%s)"
                   % ", ".join(bundled_config_names()))
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE",
                   help="set a dotted config field; VALUE is parsed as JSON when possible")
    p.add_argument("--emit-plot-data", metavar="DIR", help="write gnuplot-ready column files")
    p.add_argument("--z", help="half-plane boundary phase, e.g. 0-1i")
    p.add_argument("--out", help="output directory (overrides outputs.dir)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw, base = load_raw_config(args.config) if args.config else ({}, None)
        raw = copy.deepcopy(raw)
        for item in args.override:
            apply_override(raw, item)
        if args.out:
            apply_override(raw, "outputs.dir=" + json.dumps(args.out))
        cfg = RunConfig.from_dict(raw, base)
        print(run_scenario(cfg, args.command, args))
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except BecLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
