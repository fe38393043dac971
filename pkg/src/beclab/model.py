"""Spin matrices and Hamiltonian builders (planar, fibered, half-line).

Fibered operators live on a staggered grid over [-L, L]: nodes x_j = j h
(j = -n..n) and midpoints (j + 1/2) h.

* Dirac: chiral components s = (u + v)/sqrt2 on midpoints, d = (u - v)/sqrt2
  on nodes.  The fiber reads [[k1, m + d/dx], [m - d/dx, -k1]] in (s, d) and
  is real symmetric tridiagonal once the unknowns are interleaved.
* Shallow water: eta on nodes, u and v on midpoints (Arakawa C-grid).  With
  v = i w the matrix becomes real symmetric with bandwidth 2.

Both layouts are free of lattice doublers and keep the exact kernel states
of the continuum problem.  Every operator is stored as a real symmetric
band plus a diagonal gauge (entries 1 or i) mapping back to the physical
basis, so Hermiticity holds by construction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import BadGrid, GaplessPoint, IllConditionedBC, NotApplicable, ValidationError
from .profiles import ModelSpec, Sector

SQRT2 = math.sqrt(2.0)

PAULI = (
    np.array([[0, 1], [1, 0]], dtype=complex),
    np.array([[0, -1j], [1j, 0]], dtype=complex),
    np.array([[1, 0], [0, -1]], dtype=complex),
)

SPIN1 = (
    np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=complex),
    np.array([[0, 0, 1], [0, 0, 0], [1, 0, 0]], dtype=complex),
    np.array([[0, 0, 0], [0, 0, -1j], [0, 1j, 0]], dtype=complex),
)


def spin_matrices(sector):
    return PAULI if Sector(sector) is Sector.DIRAC else SPIN1


# ---------------------------------------------------------------- planar ---

def build_planar_hamiltonian(spec: ModelSpec, mass_value, k):
    """(k1, k2, mass) . sigma  or  . S for the constant-coefficient model."""
    s1, s2, s3 = spin_matrices(spec.sector)
    k1, k2 = k
    return k1 * s1 + k2 * s2 + float(mass_value) * s3


@dataclass(frozen=True)
class BlochPoint:
    k: tuple
    d: np.ndarray
    e: np.ndarray
    P: np.ndarray


def positive_band_projector(spec: ModelSpec, H, r):
    """Projector onto the +|d| eigenvector given H = d.S and r = |d|."""
    n = H.shape[-1]
    eye = np.eye(n)
    if spec.is_dirac:
        return (H + r * eye) / (2.0 * r)
    # eigenvalues of H are -r, 0, r; H (H + r) / (2 r^2) keeps only +r
    return (H @ H + r * H) / (2.0 * r * r)


def bloch_point(spec: ModelSpec, mass_value, k):
    k1, k2 = float(k[0]), float(k[1])
    d = np.array([k1, k2, float(mass_value)])
    r = float(np.linalg.norm(d))
    # the separation of the positive band is r in both sectors
    if spec.is_dirac and r < 1e-14:
        raise GaplessPoint(f"|d| = {r:.3e} at k = {(k1, k2)}")
    if not spec.is_dirac and r <= 1e-12:
        raise GaplessPoint(f"positive band not separated at k = {(k1, k2)}")
    H = build_planar_hamiltonian(spec, mass_value, (k1, k2))
    return BlochPoint((k1, k2), d, d / r, positive_band_projector(spec, H, r))


# ------------------------------------------------------------------ grid ---

@dataclass(frozen=True)
class Grid:
    """Uniform truncation grid on [-L, L] (or [0, L] for the half-line)."""

    L: float
    h: float

    def __post_init__(self):
        L, h = self.L, self.h
        if not (np.isfinite(L) and np.isfinite(h) and L > 0 and h > 0):
            raise BadGrid(f"need L > 0 and h > 0, got L={L}, h={h}")
        if L / h < 16:
            raise BadGrid(f"L/h = {L / h:.3g} < 16")

    @property
    def n(self):
        return int(math.floor(self.L / self.h + 1e-9))

    @property
    def nodes(self):
        n = self.n
        return np.arange(-n, n + 1) * self.h

    @property
    def midpoints(self):
        n = self.n
        return (np.arange(-n, n) + 0.5) * self.h

    @property
    def n_sites(self):
        return 2 * self.n + 1

    def to_dict(self):
        return {"L": self.L, "h": self.h}


def default_grid(spec: ModelSpec, k1_absmax=None, k1_absmin=None):
    """Grid resolving both decay scales of the interface states.

    L = max(10/m~, 10/max|k1|) and h = min(0.05/m~, 0.05).  For shallow
    water the odd state decays like exp(-|k1| |x2|); L is raised so that
    it stays localised down to |k1| = k1_absmin (default 0.1).
    """
    mt = spec.m_tilde
    if mt <= 0:
        raise ValidationError("default grid needs a gapped profile")
    L = 10.0 / mt
    if k1_absmax:
        L = max(L, 10.0 / abs(k1_absmax))
    if not spec.is_dirac:
        L = max(L, 4.0 / (k1_absmin or 0.1))
    h = min(0.05 / mt, 0.05)
    return Grid(float(L), float(h))


# ------------------------------------------------------- fiber operators ---

@dataclass(frozen=True)
class FiberOperator:
    """Discretised fiber H(k1).

    ``band[d, c]`` holds the real symmetric entry R[c + d, c];
    the physical matrix is diag(gauge) R diag(gauge)^*.
    """

    kind: str
    k1: float
    band: np.ndarray
    gauge: np.ndarray
    positions: np.ndarray
    components: np.ndarray
    labels: tuple
    half_width: float
    meta: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.band.shape[1]

    @property
    def bandwidth(self):
        return self.band.shape[0] - 1

    @property
    def real_matrix(self):
        dim, b = self.dim, self.bandwidth
        diags = [self.band[0]]
        offs = [0]
        for d in range(1, b + 1):
            diags += [self.band[d, : dim - d], self.band[d, : dim - d]]
            offs += [-d, d]
        return sp.diags(diags, offs, shape=(dim, dim), format="csr")

    @property
    def matrix(self):
        R = self.real_matrix
        if np.all(self.gauge == 1):
            return R
        G = sp.diags(self.gauge)
        return (G @ R @ G.conj()).tocsr()

    def to_solver_basis(self, vec):
        return np.conj(self.gauge) * vec if vec.ndim == 1 else np.conj(self.gauge)[:, None] * vec

    def to_physical_basis(self, vec):
        return self.gauge * vec if vec.ndim == 1 else self.gauge[:, None] * vec

    def sample(self, evaluator):
        """Physical-basis vector of a continuum spinor x -> (ncomp, len(x))."""
        out = np.zeros(self.dim, dtype=complex)
        for c, label in enumerate(self.labels):
            idx = np.flatnonzero(self.components == c)
            vals = np.asarray(evaluator(self.positions[idx]), dtype=complex)
            out[idx] = self._component(label, vals)
        return out

    def _component(self, label, vals):
        if self.kind == "dirac":
            u, v = vals
            return (u + v) / SQRT2 if label == "s" else (u - v) / SQRT2
        if self.kind == "shallow_water":
            return vals[("eta", "u", "v").index(label)]
        raise NotApplicable("sampling is defined for full-line fibers only")


def _check_grid(grid):
    if not isinstance(grid, Grid):
        raise BadGrid("grid must be a Grid instance")
    return grid


def build_fiber_operator(spec: ModelSpec, k1, grid: Grid) -> FiberOperator:
    _check_grid(grid)
    k1 = float(k1)
    h = grid.h
    x = grid.nodes
    xm = grid.midpoints
    m = spec.profile(xm)
    M = xm.size
    if spec.is_dirac:
        dim = 2 * M + 1
        band = np.zeros((2, dim))
        band[0, 0::2] = -k1
        band[0, 1::2] = k1
        band[1, 0 : dim - 1 : 2] = -1.0 / h + 0.5 * m
        band[1, 1 : dim - 1 : 2] = 1.0 / h + 0.5 * m
        pos = np.empty(dim)
        pos[0::2] = x
        pos[1::2] = xm
        comp = np.zeros(dim, dtype=np.int8)
        comp[1::2] = 1
        return FiberOperator("dirac", k1, band, np.ones(dim, dtype=complex), pos, comp,
                             ("d", "s"), grid.L, {"grid": grid})
    dim = 3 * M + 1
    band = np.zeros((3, dim))
    c = 3 * np.arange(M)
    band[1, c] = 0.5 * k1
    band[2, c] = 1.0 / h
    band[1, c + 1] = m
    band[2, c + 1] = 0.5 * k1
    band[1, c + 2] = -1.0 / h
    pos = np.empty(dim)
    pos[0::3] = x
    pos[1::3] = xm
    pos[2::3] = xm
    comp = np.zeros(dim, dtype=np.int8)
    comp[1::3] = 1
    comp[2::3] = 2
    gauge = np.ones(dim, dtype=complex)
    gauge[2::3] = 1j
    return FiberOperator("shallow_water", k1, band, gauge, pos, comp, ("eta", "u", "v"),
                         grid.L, {"grid": grid})


def parity_operator(spec: ModelSpec, grid: Grid):
    """Pi = diag(1, 1, -1) (x) Pi_2 on the shallow-water C-grid."""
    if spec.is_dirac:
        raise NotApplicable("parity is defined for the shallow-water operator only")
    _check_grid(grid)
    n = grid.n
    M = 2 * n
    dim = 3 * M + 1
    j = np.arange(M + 1)
    i = np.arange(M)
    rows = np.concatenate([3 * j, 3 * i + 1, 3 * i + 2])
    cols = np.concatenate([3 * (M - j), 3 * (M - 1 - i) + 1, 3 * (M - 1 - i) + 2])
    vals = np.concatenate([np.ones(M + 1), np.ones(M), -np.ones(M)])
    return sp.csr_matrix((vals, (rows, cols)), shape=(dim, dim))


def particle_hole_operator(spec: ModelSpec, grid: Grid):
    """Unitary C with C H(k1) C^-1 = -H(-k1) on the discrete fiber.

    Dirac: sigma_1 with complex conjugation; on the real (s, d) layout this is
    +1 on s and -1 on d.  Shallow water: diag(1, 1, -1) site-wise.
    """
    _check_grid(grid)
    M = 2 * grid.n
    if spec.is_dirac:
        c = np.ones(2 * M + 1)
        c[0::2] = -1.0
    else:
        c = np.ones(3 * M + 1)
        c[2::3] = -1.0
    return sp.diags(c, format="csr")


# -------------------------------------------------------------- half-line ---

@dataclass(frozen=True)
class HalfLineBC:
    """Self-adjoint boundary condition psi(0) in span(v0), v0 = (i + z, 1 + i z)."""

    z: complex

    def __post_init__(self):
        z = complex(self.z)
        object.__setattr__(self, "z", z)
        if not np.isfinite(z) or abs(abs(z) - 1.0) > 1e-12:
            raise ValidationError(f"|z| must be 1 to 1e-12, got {abs(z)!r}")

    @classmethod
    def from_angle(cls, phi):
        return cls(complex(math.cos(phi), math.sin(phi)))

    @property
    def v0(self):
        z = self.z
        return np.array([1j + z, 1 + 1j * z])

    @property
    def domain_vector(self):
        """Boundary vector actually imposed: v0 evaluated at -conj(z).

        Only this choice reproduces omega = -k1 Re z + m+ Im z with decay
        rate k1 Im z + m+ Re z for k1 s1 - i d/dx s2 + m+ s3; the two agree
        whenever Re z = 0.
        """
        w = -np.conj(self.z)
        return np.array([1j + w, 1 + 1j * w])

    def real_direction(self):
        """Unit real vector t spanning the imposed boundary subspace."""
        v0 = self.domain_vector
        c = v0[np.argmax(np.abs(v0))]
        if abs(c) < 1e-12:
            raise IllConditionedBC("v0 vanishes")
        t = v0 * np.conj(c) / abs(c)
        if np.max(np.abs(t.imag)) > 1e-12 * np.linalg.norm(t):
            raise IllConditionedBC("boundary vector has no real representative")
        t = t.real
        return t / np.linalg.norm(t)

    def rotation(self):
        """Real rotation U, commuting with sigma_2, mapping span(v0) to e_2."""
        t = self.real_direction()
        beta = 0.5 * math.pi - math.atan2(t[1], t[0])
        c, s = math.cos(beta), math.sin(beta)
        return np.array([[c, -s], [s, c]])


def build_halfline_operator(bc: HalfLineBC, m_plus, k1, grid: Grid) -> FiberOperator:
    """k1 sigma1 + p2 sigma2 + m+ sigma3 on [0, L] with psi(0) in span(v0).

    After the rotation U the condition reads phi_1(0) = 0 and the fiber is
    [[b, a - d/dx], [a + d/dx, -b]].  phi_1 lives on nodes j h (j = 1..n),
    phi_2 on midpoints (j - 1/2) h; the matrix is real tridiagonal.
    """
    _check_grid(grid)
    if not m_plus > 0:
        raise ValidationError("m_plus must be positive")
    U = bc.rotation()
    Hk = np.array([[m_plus, k1], [k1, -m_plus]], dtype=float)
    Mr = U @ Hk @ U.T
    b, a = Mr[0, 0], Mr[0, 1]
    h = grid.h
    n = grid.n
    dim = 2 * n
    band = np.zeros((2, dim))
    band[0, 0::2] = -b
    band[0, 1::2] = b
    band[1, 0 : dim - 1 : 2] = 0.5 * a + 1.0 / h
    band[1, 1 : dim - 1 : 2] = 0.5 * a - 1.0 / h
    j = np.arange(1, n + 1)
    pos = np.empty(dim)
    pos[0::2] = (j - 0.5) * h
    pos[1::2] = j * h
    comp = np.zeros(dim, dtype=np.int8)
    comp[1::2] = 1
    return FiberOperator("halfline", float(k1), band, np.ones(dim, dtype=complex), pos, comp,
                         ("phi2", "phi1"), grid.L,
                         {"grid": grid, "rotation": U, "a": a, "b": b, "m_plus": float(m_plus),
                          "z": bc.z})
