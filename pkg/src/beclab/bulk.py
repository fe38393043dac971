"""Berry curvature, half-Chern numbers, glued bulk index and boundary degree."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateLoop, GaplessPoint, QuadratureDivergence, ValidationError
from .model import spin_matrices
from .profiles import ModelSpec
from .quadrature import QuadratureConfig, QuadResult, integrate_rectangle

HEMISPHERES = ("plus", "minus")


def _hemisphere_sign(hemisphere):
    if hemisphere not in HEMISPHERES:
        raise ValidationError(f"hemisphere must be 'plus' or 'minus', got {hemisphere!r}")
    return 1.0 if hemisphere == "plus" else -1.0


def projector_and_derivatives(spec: ModelSpec, mass_value, k1, k2):
    """Positive-band projector P and dP/dk1, dP/dk2, stacked over points.

    Closed forms: Dirac P = (H + r)/(2r); shallow water P = H (H + r) / (2 r^2),
    differentiated with dH/dk_i = S_i and dr/dk_i = d_i / r.
    """
    S = np.stack(spin_matrices(spec.sector))
    k1 = np.atleast_1d(np.asarray(k1, dtype=float))
    k2 = np.atleast_1d(np.asarray(k2, dtype=float))
    m = float(mass_value)
    H = k1[:, None, None] * S[0] + k2[:, None, None] * S[1] + m * S[2]
    r = np.sqrt(k1 * k1 + k2 * k2 + m * m)
    if np.any(r < 1e-14):
        raise GaplessPoint("curvature requested at a gapless point")
    r3 = r[:, None, None]
    n = S.shape[1]
    if spec.is_dirac:
        P = 0.5 * np.eye(n) + H / (2.0 * r3)
        dP = [S[i] / (2.0 * r3) - H * (d / (2.0 * r ** 3))[:, None, None]
              for i, d in enumerate((k1, k2))]
        return P, dP[0], dP[1]
    N = H @ H + r3 * H
    P = N / (2.0 * r3 ** 2)
    dP = []
    for i, d in enumerate((k1, k2)):
        dr = (d / r)[:, None, None]
        dN = S[i] @ H + H @ S[i] + dr * H + r3 * S[i]
        dP.append(dN / (2.0 * r3 ** 2) - N * (d / r ** 4)[:, None, None])
    return P, dP[0], dP[1]


def _curvature_plus(spec, mass_value, k1, k2):
    P, d1, d2 = projector_and_derivatives(spec, mass_value, k1, k2)
    comm = d1 @ d2 - d2 @ d1
    return np.einsum("pij,pji->p", P, comm).imag


def berry_curvature(spec: ModelSpec, mass_value, k, hemisphere="plus"):
    """F(k) = Im tr(P [d1 P, d2 P]).

    On the minus hemisphere the chart k -> (k1, -k2) is pulled back, which
    gives F_minus(k1, k2) = -F(k1, -k2).  Vectorised over k = (k1, k2).
    """
    sign = _hemisphere_sign(hemisphere)
    k1, k2 = (np.asarray(t, dtype=float) for t in k)
    shape = np.broadcast(k1, k2).shape
    k1b, k2b = (np.broadcast_to(t, shape).ravel() for t in (k1, k2))
    F = sign * _curvature_plus(spec, mass_value, k1b, sign * k2b)
    return F.reshape(shape) if shape else float(F[0])


def integrate_curvature(spec: ModelSpec, mass_value, hemisphere="plus",
                        quadrature_config=QuadratureConfig()) -> QuadResult:
    """(1/2pi) times the integral of F over R^2, via k = s rho / (1 - rho)."""
    m = float(mass_value)
    if m == 0.0:
        raise GaplessPoint("mass_value = 0 closes the gap at k = 0")
    s = abs(m)
    sign = _hemisphere_sign(hemisphere)

    def integrand(rho, theta):
        k = s * rho / (1.0 - rho)
        jac = s / (1.0 - rho) ** 2
        F = sign * _curvature_plus(spec, m, k * np.cos(theta), sign * k * np.sin(theta))
        return F * k * jac / (2.0 * math.pi)

    return integrate_rectangle(integrand, (0.0, 1.0), (0.0, 2.0 * math.pi), quadrature_config)


def chern_half(spec: ModelSpec, mass_value, quadrature_config=QuadratureConfig()):
    return integrate_curvature(spec, mass_value, "plus", quadrature_config).value


def boundary_degree(spec: ModelSpec, mass_value, hemisphere="plus", n_samples=256):
    """Degree of the equatorial limit map read off a large momentum loop.

    The planar part (e1, e2) is followed along (K cos t, +-K sin t) with
    K = 1e3 max(|m|, 1); its winding, times the chart sign and the sign of
    e3 on the loop (which side of the equator the cap lies), is the degree.
    """
    if int(n_samples) < 64:
        raise ValidationError("n_samples must be >= 64")
    sign = _hemisphere_sign(hemisphere)
    m = float(mass_value)
    K = 1e3 * max(abs(m), 1.0)
    t = 2.0 * math.pi * np.arange(int(n_samples)) / int(n_samples)
    d = np.stack([K * np.cos(t), sign * K * np.sin(t), np.full_like(t, m)])
    e = d / np.linalg.norm(d, axis=0)
    planar = np.hypot(e[0], e[1])
    if np.min(planar) < 1e-8:
        raise DegenerateLoop("planar part of e vanishes on the loop")
    phi = np.arctan2(e[1], e[0])
    dphi = np.diff(np.append(phi, phi[0]))
    dphi = (dphi + math.pi) % (2.0 * math.pi) - math.pi
    total = math.fsum(dphi) / (2.0 * math.pi)
    winding = round(total)
    if abs(total - winding) >= 0.1:
        raise DegenerateLoop(f"accumulated angle {total:.3f} turns is not near an integer")
    s3 = np.sign(e[2])
    if s3[0] == 0 or np.any(s3 != s3[0]):
        raise DegenerateLoop("loop touches the equator, cap orientation undefined")
    return int(sign * winding * s3[0])


@dataclass(frozen=True)
class BulkIndexResult:
    c_half_plus: float
    c_half_minus: float
    chern_glued: float
    chern_rounded: int
    quadrature_error_estimate: float
    degree_plus: int
    degree_minus: int

    def to_dict(self):
        return {
            "c_half_plus": self.c_half_plus,
            "c_half_minus": self.c_half_minus,
            "chern_glued": self.chern_glued,
            "chern_rounded": self.chern_rounded,
            "quadrature_error_estimate": self.quadrature_error_estimate,
            "degree_plus": self.degree_plus,
            "degree_minus": self.degree_minus,
        }


def bulk_index(spec: ModelSpec, quadrature_config=QuadratureConfig()) -> BulkIndexResult:
    """Glue the two half-Chern numbers over the compactified momentum sphere."""
    lo, hi = spec.profile.asymptotes
    if spec.profile.is_constant or not lo * hi < 0:
        raise ValidationError("bulk index needs a non-constant profile with opposite-sign asymptotes")
    plus = integrate_curvature(spec, hi, "plus", quadrature_config)
    minus_chart = integrate_curvature(spec, lo, "plus", quadrature_config)
    # the minus cap enters with the reversed chart orientation
    minus_cap = integrate_curvature(spec, lo, "minus", quadrature_config)
    glued = plus.value + minus_cap.value
    err = plus.error + minus_cap.error + minus_chart.error
    rounded = int(round(glued))
    if abs(glued - rounded) > 1e-3:
        raise QuadratureDivergence(f"glued Chern number {glued!r} is not within 1e-3 of an integer")
    return BulkIndexResult(plus.value, minus_chart.value, glued, rounded, err,
                           boundary_degree(spec, hi, "plus"), boundary_degree(spec, lo, "minus"))
