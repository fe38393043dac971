"""Closed-form ground truth used to check the numerics.

Interface states of both sectors, effective Schroedinger potentials and the
energy window they imply, essential-spectrum thresholds, half-line edge
dispersions, and the spin-1 operator identity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ImZZero, InvalidForProfile, NotApplicable, NotHermitian, ValidationError
from .model import SPIN1, Grid, HalfLineBC
from .profiles import ModelSpec

STATE_LABELS = ("DiracL", "DiracR", "SW_L", "SW_R", "SW_a", "SW_b")


@dataclass(frozen=True)
class AnalyticState:
    label: str
    k1: float
    omega: float
    evaluator: Callable
    x: np.ndarray
    spinor: np.ndarray  # (ncomp, len(x)), unit l2 norm on the grid nodes


def _validity(label, spec: ModelSpec, k1):
    prof = spec.profile
    if label.startswith("Dirac") != spec.is_dirac:
        return "label belongs to the other sector"
    if prof.is_constant:
        return "constant profile has no interface"
    if label in ("DiracL", "SW_L") and not prof.is_nondecreasing:
        return "left mover needs a non-decreasing profile"
    if label in ("DiracR", "SW_R") and not prof.is_nonincreasing:
        return "right mover needs a non-increasing profile"
    if label in ("SW_a", "SW_b"):
        if prof.kind != "sign" or prof.amplitude <= 0:
            return "needs f(x2) = f sgn(x2) with f > 0"
        if label == "SW_b" and k1 == 0:
            return "decay rate |k1| vanishes at k1 = 0"
    return None


def state_is_valid(label, spec, k1):
    return label in STATE_LABELS and _validity(label, spec, float(k1)) is None


def _raw_evaluator(label, spec: ModelSpec, k1):
    prof = spec.profile
    if label in ("DiracL", "DiracR", "SW_L", "SW_R"):
        left = label.endswith("L")
        sgn = -1.0 if left else 1.0

        def ev(x):
            x = np.asarray(x, dtype=float)
            g = np.exp(sgn * prof.primitive(x))
            if spec.is_dirac:
                return np.stack([g, sgn * g]).astype(complex)
            return np.stack([g, sgn * g, np.zeros_like(g)]).astype(complex)

        return ev, (-k1 if left else k1)
    f = prof.amplitude
    if label == "SW_a":
        def ev(x):
            g = np.exp(-f * np.abs(np.asarray(x, dtype=float)))
            return np.stack([g, -g, np.zeros_like(g)]).astype(complex)

        return ev, -k1
    s = math.copysign(1.0, k1)
    kap = abs(k1)

    def ev(x):
        x = np.asarray(x, dtype=float)
        g = np.exp(-kap * np.abs(x))
        return np.stack([np.zeros_like(g), np.sign(x) * s * g, 1j * g])

    return ev, f * s


def analytic_state(label, spec: ModelSpec, k1, grid: Grid) -> AnalyticState:
    """Closed-form interface state sampled on the grid nodes, unit l2 norm."""
    if label not in STATE_LABELS:
        raise ValidationError(f"unknown state label {label!r}")
    k1 = float(k1)
    why = _validity(label, spec, k1)
    if why:
        raise InvalidForProfile(f"{label}: {why}")
    raw, omega = _raw_evaluator(label, spec, k1)
    x = grid.nodes
    vals = raw(x)
    norm = float(np.linalg.norm(vals))
    if not np.isfinite(norm) or norm == 0:
        raise InvalidForProfile(f"{label} is not normalisable on this grid")

    def evaluator(xx):
        return raw(xx) / norm

    return AnalyticState(label, k1, float(omega), evaluator, x, vals / norm)


def valid_labels(spec: ModelSpec, k1=1.0):
    return [lab for lab in STATE_LABELS if state_is_valid(lab, spec, k1)]


# ------------------------------------------------------ effective potentials

@dataclass(frozen=True)
class EffectivePotentials:
    k1: float
    x: np.ndarray
    W_s: np.ndarray
    W_d: np.ndarray
    omega_s: float
    omega_d: float


def effective_potentials(spec: ModelSpec, k1, grid: Grid) -> EffectivePotentials:
    """W_{s/d}(x2) = k1^2 + m^2 -+ ... with m' from the profile; infima on the grid."""
    if not spec.is_dirac:
        raise NotApplicable("effective potentials are derived for the Dirac fiber")
    x = grid.nodes
    m = spec.profile(x)
    dm = spec.profile.derivative(x)
    base = k1 * k1 + m * m
    Ws = base + dm
    Wd = base - dm
    return EffectivePotentials(float(k1), x, Ws, Wd, float(Ws.min()), float(Wd.min()))


def energy_window_check(spec: ModelSpec, k1, omega, tol=0.0):
    """k1^2 - tol <= omega^2 < k1^2 + m~^2."""
    if not spec.is_dirac or not spec.profile.is_monotone:
        raise NotApplicable("energy window holds for monotone Dirac profiles")
    w2 = omega * omega
    k2 = k1 * k1
    return bool(k2 - tol <= w2 < k2 + spec.m_tilde ** 2)


@dataclass(frozen=True)
class SpectrumEdge:
    threshold: float
    has_zero_band: bool


def essential_spectrum_edge(spec: ModelSpec, k1) -> SpectrumEdge:
    return SpectrumEdge(math.hypot(float(k1), spec.m_tilde), not spec.is_dirac)


# --------------------------------------------------------------- half-line

@dataclass(frozen=True)
class HalfPlaneFormula:
    omega: float
    kappa: float  # Im(kappa) = -a; the state behaves like exp(Im(kappa) x2)
    decay: float  # a = k1 Im z + m+ Re z
    bound: bool
    merging: tuple | None


def merging_point(z, m_plus):
    z = complex(z)
    if abs(z.imag) < 1e-12:
        raise ImZZero("merging point undefined for Im z = 0")
    return (-(z.real / z.imag) * m_plus, m_plus / z.imag)


def halfplane_formulas(z, m_plus, k1) -> HalfPlaneFormula:
    z = complex(z)
    HalfLineBC(z)
    a = k1 * z.imag + m_plus * z.real
    omega = -k1 * z.real + m_plus * z.imag
    merging = merging_point(z, m_plus) if abs(z.imag) >= 1e-12 else None
    return HalfPlaneFormula(float(omega), float(-a), float(a), bool(a >= 0), merging)


def halfline_state(bc: HalfLineBC, m_plus, k1):
    """Evaluator of the half-line edge state t exp(-a x2) (unnormalised)."""
    f = halfplane_formulas(bc.z, m_plus, k1)
    if not f.decay > 0:
        raise InvalidForProfile("half-line state is not square-summable at this k1")
    t = bc.real_direction()

    def ev(x):
        g = np.exp(-f.decay * np.asarray(x, dtype=float))
        return np.stack([t[0] * g, t[1] * g])

    return ev, f.omega


# -------------------------------------------------------- spin-1 identity

def _check_hermitian(*mats):
    n = None
    for A in mats:
        A = np.asarray(A)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise NotHermitian("inputs must be square matrices")
        if n is None:
            n = A.shape[0]
        elif A.shape[0] != n:
            raise ValidationError("matrices must share one dimension")
        if np.max(np.abs(A - A.conj().T), initial=0.0) > 1e-12 * max(1.0, np.max(np.abs(A))):
            raise NotHermitian("input is not Hermitian to 1e-12")
    if n > 64:
        raise ValidationError("matrix size is limited to n <= 64")
    return n


def spin1_D(d1, d2, d3):
    """Remainder operator D of the identity, spin-major 3n x 3n blocks.

    Block (3, 2) carries +i[d1^2, d3]; with that sign D equals
    d^2 (d.S) - (d.S)^3 exactly.
    """
    def c(a, b):
        return a @ b - b @ a

    return np.block([
        [1j * (d1 @ d3 @ d2 - d2 @ d3 @ d1), c(d3 @ d3, d1), c(d3 @ d3, d2)],
        [c(d2 @ d2, d1), 1j * (d3 @ d2 @ d1 - d1 @ d2 @ d3), -1j * c(d2 @ d2, d3)],
        [c(d1 @ d1, d2), 1j * c(d1 @ d1, d3), 1j * (d2 @ d1 @ d3 - d3 @ d1 @ d2)],
    ])


def verify_spin1_identity(d1, d2, d3):
    """Relative residual of (d.S) d^2 (d.S) = (d.S)^4 + (dS D + D* dS)/2."""
    n = _check_hermitian(d1, d2, d3)
    d1, d2, d3 = (np.asarray(a, dtype=complex) for a in (d1, d2, d3))
    dS = sum(np.kron(S, d) for S, d in zip(SPIN1, (d1, d2, d3)))
    dsq = np.kron(np.eye(3), d1 @ d1 + d2 @ d2 + d3 @ d3)
    D = spin1_D(d1, d2, d3)
    lhs = dS @ dsq @ dS
    dS2 = dS @ dS
    rhs = dS2 @ dS2 + 0.5 * (dS @ D + D.conj().T @ dS)
    assert lhs.shape == (3 * n, 3 * n)
    return float(np.linalg.norm(lhs - rhs) / (1.0 + np.linalg.norm(lhs)))


def random_hermitian(rng, n):
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return 0.5 * (a + a.conj().T)


def momentum_triple(k1, profile, n=16, h=0.25):
    """(k1 1, centred -i d/dx stencil, diag f) on an n-point grid."""
    x = (np.arange(n) - 0.5 * (n - 1)) * h
    shift = np.eye(n, k=1)
    p = -1j * (shift - shift.T) / (2.0 * h)
    return k1 * np.eye(n), p, np.diag(profile(x))
