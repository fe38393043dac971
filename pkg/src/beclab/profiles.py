"""Mass / Coriolis profiles and the model specification."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError

PROFILE_KINDS = ("constant", "sign", "tanh", "tabulated")


def _logcosh(y):
    a = np.abs(y)
    return a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)


@dataclass(frozen=True)
class Profile:
    """Scalar function of x2 with known asymptotes.

    Build with the ``constant``, ``sign``, ``tanh`` or ``tabulated``
    constructors.  Instances are immutable and vectorised in ``x``.
    """

    kind: str
    value: float = 0.0
    amplitude: float = 0.0
    asymptote_minus: float = 0.0
    asymptote_plus: float = 0.0
    length_scale: float = 1.0
    x: tuple = ()
    values: tuple = ()

    def __post_init__(self):
        if self.kind not in PROFILE_KINDS:
            raise ValidationError(f"unknown profile kind {self.kind!r}")
        if self.kind == "tanh" and not self.length_scale > 0:
            raise ValidationError("tanh length_scale must be positive")
        if self.kind == "tabulated":
            xs = np.asarray(self.x, dtype=float)
            vs = np.asarray(self.values, dtype=float)
            if xs.ndim != 1 or xs.size < 2 or xs.shape != vs.shape:
                raise ValidationError("tabulated profile needs >= 2 matching (x, value) pairs")
            if not (np.all(np.isfinite(xs)) and np.all(np.isfinite(vs))):
                raise ValidationError("tabulated profile has non-finite entries")
            if np.any(np.diff(xs) <= 0):
                raise ValidationError("tabulated x grid must be strictly increasing")
        lo, hi = self.asymptotes
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValidationError("profile asymptotes must be finite")
        if self.kind != "constant" and not lo * hi < 0:
            raise ValidationError(
                f"asymptotes must have opposite signs, got ({lo}, {hi})")

    # constructors -------------------------------------------------------
    @classmethod
    def constant(cls, value):
        return cls("constant", value=float(value))

    @classmethod
    def sign(cls, amplitude=1.0):
        return cls("sign", amplitude=float(amplitude))

    @classmethod
    def tanh(cls, asymptote_minus=-1.0, asymptote_plus=1.0, length_scale=1.0):
        return cls("tanh", asymptote_minus=float(asymptote_minus),
                   asymptote_plus=float(asymptote_plus), length_scale=float(length_scale))

    @classmethod
    def tabulated(cls, x, values):
        return cls("tabulated", x=tuple(float(t) for t in x),
                   values=tuple(float(t) for t in values))

    @classmethod
    def from_csv(cls, path):
        """Two-column CSV (x2, value); a non-numeric header line is skipped."""
        path = Path(path)
        try:
            data = np.loadtxt(path, delimiter=",", ndmin=2)
        except ValueError:
            data = np.loadtxt(path, delimiter=",", ndmin=2, skiprows=1)
        if data.shape[1] != 2:
            raise ValidationError(f"{path}: expected two columns, got {data.shape[1]}")
        return cls.tabulated(data[:, 0], data[:, 1])

    # evaluation ---------------------------------------------------------
    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return np.full_like(x, self.value)
        if self.kind == "sign":
            return self.amplitude * np.sign(x)
        if self.kind == "tanh":
            c, a = self._center_halfwidth()
            return c + a * np.tanh(x / self.length_scale)
        return np.interp(x, self.x, self.values)

    def derivative(self, x):
        """m'(x).  The jump of the sign profile is not represented (returns 0)."""
        x = np.asarray(x, dtype=float)
        if self.kind in ("constant", "sign"):
            return np.zeros_like(x)
        if self.kind == "tanh":
            _, a = self._center_halfwidth()
            ell = self.length_scale
            return a / ell / np.cosh(x / ell) ** 2
        xs = np.asarray(self.x)
        g = np.gradient(np.asarray(self.values), xs)
        inside = (x >= xs[0]) & (x <= xs[-1])
        return np.where(inside, np.interp(x, xs, g), 0.0)

    def primitive(self, x):
        """Integral of the profile from 0 to x."""
        x = np.asarray(x, dtype=float)
        if self.kind == "constant":
            return self.value * x
        if self.kind == "sign":
            return self.amplitude * np.abs(x)
        if self.kind == "tanh":
            c, a = self._center_halfwidth()
            ell = self.length_scale
            return c * x + a * ell * _logcosh(x / ell)
        return self._table_primitive(x) - self._table_primitive(np.zeros(()))

    def _table_primitive(self, x):
        # exact integral of the clamped piecewise-linear interpolant, from x[0]
        xs = np.asarray(self.x)
        vs = np.asarray(self.values)
        fn = np.concatenate([[0.0], np.cumsum(0.5 * (vs[1:] + vs[:-1]) * np.diff(xs))])
        i = np.clip(np.searchsorted(xs, x, side="right") - 1, 0, xs.size - 2)
        t = x - xs[i]
        slope = (vs[i + 1] - vs[i]) / (xs[i + 1] - xs[i])
        inner = fn[i] + vs[i] * t + 0.5 * slope * t * t
        left = (x - xs[0]) * vs[0]
        right = fn[-1] + (x - xs[-1]) * vs[-1]
        return np.where(x < xs[0], left, np.where(x > xs[-1], right, inner))

    def _center_halfwidth(self):
        lo, hi = self.asymptote_minus, self.asymptote_plus
        return 0.5 * (hi + lo), 0.5 * (hi - lo)

    # metadata -----------------------------------------------------------
    @property
    def asymptotes(self):
        if self.kind == "constant":
            return self.value, self.value
        if self.kind == "sign":
            return -self.amplitude, self.amplitude
        if self.kind == "tanh":
            return self.asymptote_minus, self.asymptote_plus
        return self.values[0], self.values[-1]

    @property
    def is_constant(self):
        return self.kind == "constant"

    @property
    def is_nondecreasing(self):
        if self.kind == "constant":
            return True
        if self.kind == "tabulated":
            return bool(np.all(np.diff(self.values) >= 0))
        lo, hi = self.asymptotes
        return hi >= lo

    @property
    def is_nonincreasing(self):
        if self.kind == "constant":
            return True
        if self.kind == "tabulated":
            return bool(np.all(np.diff(self.values) <= 0))
        lo, hi = self.asymptotes
        return hi <= lo

    @property
    def is_monotone(self):
        return self.is_nondecreasing or self.is_nonincreasing

    @property
    def is_odd(self):
        """True when m(-x) = -m(x) holds exactly for this parametrisation."""
        if self.kind == "sign":
            return True
        if self.kind == "tanh":
            return self.asymptote_minus == -self.asymptote_plus
        if self.kind == "tabulated":
            xs, vs = np.asarray(self.x), np.asarray(self.values)
            return bool(np.array_equal(xs, -xs[::-1]) and np.array_equal(vs, -vs[::-1]))
        return self.value == 0.0

    # serialisation ------------------------------------------------------
    def to_dict(self):
        if self.kind == "constant":
            return {"kind": "constant", "value": self.value}
        if self.kind == "sign":
            return {"kind": "sign", "amplitude": self.amplitude}
        if self.kind == "tanh":
            return {"kind": "tanh", "asymptote_minus": self.asymptote_minus,
                    "asymptote_plus": self.asymptote_plus, "length_scale": self.length_scale}
        return {"kind": "tabulated", "x": list(self.x), "values": list(self.values)}

    @classmethod
    def from_dict(cls, d, base_dir=None):
        if not isinstance(d, dict) or "kind" not in d:
            raise ValidationError("profile must be an object with a 'kind' field")
        kind = d["kind"]
        try:
            if kind == "constant":
                return cls.constant(d["value"])
            if kind == "sign":
                return cls.sign(d.get("amplitude", 1.0))
            if kind == "tanh":
                return cls.tanh(d.get("asymptote_minus", -1.0), d.get("asymptote_plus", 1.0),
                                d.get("length_scale", 1.0))
            if kind == "tabulated":
                if "csv" in d:
                    p = Path(d["csv"])
                    if base_dir is not None and not p.is_absolute():
                        p = Path(base_dir) / p
                    return cls.from_csv(p)
                return cls.tabulated(d["x"], d["values"])
        except KeyError as exc:
            raise ValidationError(f"profile of kind {kind!r} is missing field {exc}") from None
        raise ValidationError(f"unknown profile kind {kind!r}")


class Sector(str, enum.Enum):
    DIRAC = "dirac"
    SHALLOW_WATER = "shallow_water"


@dataclass(frozen=True)
class ModelSpec:
    sector: Sector
    profile: Profile

    def __post_init__(self):
        object.__setattr__(self, "sector", Sector(self.sector))

    @property
    def is_dirac(self):
        return self.sector is Sector.DIRAC

    @property
    def block(self):
        return 2 if self.is_dirac else 3

    @property
    def m_tilde(self):
        lo, hi = self.profile.asymptotes
        return min(abs(lo), abs(hi))

    def to_dict(self):
        return {"sector": self.sector.value, "profile": self.profile.to_dict()}

    @classmethod
    def from_dict(cls, d, base_dir=None):
        try:
            sector = Sector(d["sector"])
        except (KeyError, ValueError):
            raise ValidationError("model.sector must be 'dirac' or 'shallow_water'") from None
        return cls(sector, Profile.from_dict(d.get("profile"), base_dir=base_dir))
