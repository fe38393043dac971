import numpy as np
import pytest
from hypothesis import given, strategies as st

from beclab.errors import BadGrid, GaplessPoint, NotApplicable, ValidationError
from beclab.fiber import solve_fiber
from beclab.model import (PAULI, SPIN1, Grid, HalfLineBC, bloch_point, build_fiber_operator,
                          build_halfline_operator, build_planar_hamiltonian, default_grid,
                          parity_operator, particle_hole_operator, spin_matrices)
from beclab.profiles import ModelSpec, Profile

DIRAC = ModelSpec("dirac", Profile.tanh(-1, 1))
SW = ModelSpec("shallow_water", Profile.sign(1.0))
mom = st.floats(-3, 3, allow_nan=False)
mass = st.floats(0.1, 3, allow_nan=False).flatmap(lambda m: st.sampled_from([m, -m]))


def test_spin_matrices_hermitian_and_entries():
    for S in PAULI + SPIN1:
        assert np.array_equal(S, S.conj().T)
    S1, S2, S3 = SPIN1
    assert S1[0, 1] == S1[1, 0] == 1 and S2[0, 2] == S2[2, 0] == 1
    assert S3[1, 2] == -1j and S3[2, 1] == 1j
    assert spin_matrices("dirac") is PAULI


def test_planar_dirac_at_origin():
    H = build_planar_hamiltonian(DIRAC, 1.0, (0.0, 0.0))
    np.testing.assert_array_equal(H, np.diag([1.0, -1.0]))


@given(k1=mom, k2=mom, m=mass)
def test_planar_spectra(k1, k2, m):
    r = np.sqrt(k1 ** 2 + k2 ** 2 + m ** 2)
    w = np.linalg.eigvalsh(build_planar_hamiltonian(DIRAC, m, (k1, k2)))
    np.testing.assert_allclose(w, [-r, r], atol=1e-12)
    w = np.linalg.eigvalsh(build_planar_hamiltonian(SW, m, (k1, k2)))
    np.testing.assert_allclose(w, [-r, 0, r], atol=1e-12)


@given(k1=mom, k2=mom, m=mass)
def test_bloch_point_invariants(k1, k2, m):
    for spec in (DIRAC, SW):
        b = bloch_point(spec, m, (k1, k2))
        assert abs(np.linalg.norm(b.e) - 1) < 1e-12
        np.testing.assert_allclose(b.P @ b.P, b.P, atol=1e-12)
        np.testing.assert_allclose(b.P, b.P.conj().T, atol=1e-12)
    b = bloch_point(DIRAC, m, (k1, k2))
    ref = 0.5 * (np.eye(2) + sum(e * s for e, s in zip(b.e, PAULI)))
    np.testing.assert_allclose(b.P, ref, atol=1e-12)


def test_bloch_point_examples():
    np.testing.assert_allclose(bloch_point(DIRAC, 1.0, (0, 0)).P, np.diag([1.0, 0.0]))
    with pytest.raises(GaplessPoint):
        bloch_point(DIRAC, 0.0, (0, 0))
    with pytest.raises(GaplessPoint):
        bloch_point(SW, 0.0, (0, 0))


@given(k1=mom, k2=mom)
def test_sw_projector_against_eigendecomposition(k1, k2):
    b = bloch_point(SW, 1.0, (k1, k2))
    w, v = np.linalg.eigh(build_planar_hamiltonian(SW, 1.0, (k1, k2)))
    top = v[:, -1:]
    np.testing.assert_allclose(b.P, top @ top.conj().T, atol=1e-12)
    assert np.linalg.matrix_rank(b.P, tol=1e-9) == 1
    assert np.trace(b.P).real == pytest.approx(1.0)


def test_projector_derivative_second_order():
    k = np.array([0.3, -0.7])
    exact = None
    errs = []
    for spec in (DIRAC, SW):
        for step in (1e-2, 5e-3):
            def P(dk):
                return bloch_point(spec, 0.8, tuple(k + dk)).P
            d = np.array([step, 0.0])
            fd = (P(d) - P(-d)) / (2 * step)
            exact = (P(d / 64) - P(-d / 64)) / (2 * step / 64)
            errs.append(np.abs(fd - exact).max())
        ratio = errs[-2] / errs[-1]
        assert 3.5 < ratio < 4.5


def test_grid_validation():
    with pytest.raises(BadGrid):
        Grid(1.0, 0.1)
    with pytest.raises(BadGrid):
        Grid(-1.0, 0.01)
    g = Grid(2.0, 0.125)
    assert g.n == 16 and g.n_sites == 33
    assert g.nodes[0] == -2.0 and g.nodes[-1] == 2.0


def test_default_grid():
    g = default_grid(DIRAC, 2.0)
    assert (g.L, g.h) == (10.0, 0.05)
    assert default_grid(ModelSpec("dirac", Profile.tanh(-2, 2)), 4.0).h == 0.025
    assert default_grid(SW, 2.0).L >= 40.0


@pytest.mark.parametrize("spec", [DIRAC, SW])
@pytest.mark.parametrize("k1", [-1.3, 0.0, 0.4])
def test_fiber_operator_exactly_hermitian(spec, k1):
    M = build_fiber_operator(spec, k1, Grid(4.0, 0.1)).matrix.toarray()
    assert np.array_equal(M, M.conj().T)


def test_fiber_dimensions():
    g = Grid(4.0, 0.1)
    assert build_fiber_operator(DIRAC, 0.0, g).dim == 2 * (2 * g.n) + 1
    assert build_fiber_operator(SW, 0.0, g).dim == 3 * (2 * g.n) + 1


def test_dirac_tanh_bound_eigenvalue():
    from scipy.linalg import eigh_tridiagonal
    op = build_fiber_operator(DIRAC, 0.5, Grid(20.0, 0.05))
    w = eigh_tridiagonal(op.band[0], op.band[1, :-1], eigvals_only=True)
    assert np.min(np.abs(w + 0.5)) < 0.05 ** 2


def test_constant_mass_spectrum_gap():
    spec = ModelSpec("dirac", Profile.constant(1.0))
    s = solve_fiber(spec, 0.0, Grid(20.0, 0.05), keep_vectors=True)
    assert s.n_bound == 0
    genuine = ~s.artifact
    assert np.min(np.abs(s.omega[genuine])) >= 1.0 - s.ch - 1e-12
    # the only state inside the gap is the truncation-end zero mode of the stencil
    inside = np.abs(s.omega) < 0.99
    assert inside.sum() == 1 and s.artifact[inside].all()
    assert s.edge_score[inside][0] > 0.99


@pytest.mark.parametrize("spec", [DIRAC, SW, ModelSpec("dirac", Profile.tanh(-0.5, 2, 0.7))])
@given(k1=mom)
def test_particle_hole_symmetry(spec, k1):
    g = Grid(3.0, 0.1)
    C = particle_hole_operator(spec, g)
    Hp = build_fiber_operator(spec, k1, g).matrix
    Hm = build_fiber_operator(spec, -k1, g).matrix
    assert abs(C @ Hp @ C + Hm).max() < 1e-14
    wp = np.linalg.eigvalsh(Hp.toarray())
    wm = np.linalg.eigvalsh(Hm.toarray())
    np.testing.assert_allclose(np.sort(wp), np.sort(-wm), atol=1e-10)


@given(k1=mom, k2=mom, f=mass)
def test_sw_planar_spectrum_symmetric(k1, k2, f):
    w = np.linalg.eigvalsh(build_planar_hamiltonian(SW, f, (k1, k2)))
    np.testing.assert_allclose(w, -w[::-1], atol=1e-12)


def test_sw_interface_fiber_not_symmetric_at_fixed_k1():
    # the interface channel omega = -k1 has no +k1 partner at the same k1
    g = Grid(6.0, 0.05)
    w = np.linalg.eigvalsh(build_fiber_operator(SW, 0.5, g).matrix.toarray())
    assert np.min(np.abs(w + 0.5)) < 1e-3
    assert np.min(np.abs(w - 0.5)) > 1e-2


def test_parity():
    g = Grid(3.0, 0.1)
    P = parity_operator(SW, g)
    assert abs(P @ P - np.eye(P.shape[0])).max() == 0
    for prof in (Profile.sign(1.0), Profile.tanh(-2, 2, 0.5)):
        H = build_fiber_operator(ModelSpec("shallow_water", prof), 0.7, g).matrix
        assert abs(P @ H @ P - H).max() <= 1e-12 * abs(H).max()
    H = build_fiber_operator(ModelSpec("shallow_water", Profile.constant(1.0)), 0.7, g).matrix
    assert abs(P @ H @ P - H).max() > 0.1
    with pytest.raises(NotApplicable):
        parity_operator(DIRAC, g)


def test_halfline_bc_validation():
    with pytest.raises(ValidationError):
        HalfLineBC(1.1)
    bc = HalfLineBC.from_angle(0.3)
    assert abs(abs(bc.z) - 1) < 1e-15
    assert np.linalg.norm(bc.v0) > 0


@given(phi=st.floats(-3.1, 3.1))
def test_halfline_rotation_maps_boundary_vector(phi):
    bc = HalfLineBC.from_angle(phi)
    t = bc.real_direction()
    w = bc.domain_vector
    assert abs(w[0] * t[1] - w[1] * t[0]) < 1e-12 * np.linalg.norm(w)
    U = bc.rotation()
    np.testing.assert_allclose(U @ t, [0.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(U @ PAULI[1][:2, :2].imag @ U.T, PAULI[1].imag, atol=1e-12)


def test_halfline_operator_hermitian():
    op = build_halfline_operator(HalfLineBC(1j), 1.0, 0.4, Grid(5.0, 0.1))
    M = op.matrix.toarray()
    assert np.array_equal(M, M.T)
    with pytest.raises(ValidationError):
        build_halfline_operator(HalfLineBC(1j), -1.0, 0.4, Grid(5.0, 0.1))
