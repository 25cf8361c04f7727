import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, strategies as st

from gdm_rd.core import (SpaceTimeDofs, TimeGrid, assemble_mass, assemble_stiffness,
                         cell_quadrature, cell_tensors, delta_derivative, discrete_norm,
                         face_average, integrate, interpolate_initial, time_reconstruction)
from gdm_rd.cr import build_cr
from gdm_rd.errors import NonPositiveTensor, NonSymmetricTensor, OutOfRangeTime, QuadratureFailure
from gdm_rd.hmm import build_hmm
from gdm_rd.mesh import generate_mesh, single_cell_mesh, triangular_mesh
from gdm_rd.physics import glioma_initial


def _builders(mesh):
    out = [build_hmm(mesh)]
    if mesh.is_simplicial:
        out.append(build_cr(mesh))
    return out


# quadrature ----------------------------------------------------------------

@pytest.mark.parametrize("p, q", [(0, 0), (1, 0), (2, 1), (3, 2), (5, 0), (1, 4)])
def test_cell_quadrature_exact_for_degree_5(small_mesh, p, q):
    """int over [-1, 1]^2 of x^p y^q: product of 1D integrals."""
    exact = np.prod([(1 - (-1) ** (k + 1)) / (k + 1) for k in (p, q)])
    got = integrate(small_mesh, lambda x, y: x ** p * y ** q).sum()
    assert got == pytest.approx(exact, abs=1e-13)


def test_quadrature_weights_sum_to_cell_measure(small_mesh):
    rule = cell_quadrature(small_mesh)
    per_cell = np.bincount(rule.cell, weights=rule.weights, minlength=small_mesh.n_cells)
    np.testing.assert_allclose(per_cell, small_mesh.cell_measure, rtol=1e-13)


def test_face_average_cubic(unit_square):
    # bottom face y = 0 from (0,0) to (1,0): average of x^3 is 1/4
    avg = face_average(unit_square, lambda x, y: x ** 3 + y)
    assert avg[0] == pytest.approx(0.25, abs=1e-15)


def test_quadrature_failure_on_nan(unit_square):
    with pytest.raises(QuadratureFailure):
        integrate(unit_square, lambda x, y: np.where(x > 0.5, np.nan, x))


# mass ----------------------------------------------------------------------

def test_hmm_mass_one_cell(unit_square):
    M = assemble_mass(build_hmm(unit_square)).toarray()
    expected = np.zeros((5, 5))
    expected[0, 0] = 1.0
    np.testing.assert_allclose(M, expected, atol=1e-15)


def test_hmm_mass_2x2():
    d = build_hmm(generate_mesh("rectangular", 1.0, 2))
    diag = assemble_mass(d).diagonal()
    np.testing.assert_allclose(diag[:4], 1.0)
    np.testing.assert_allclose(diag[4:], 0.0)
    assert assemble_mass(d).nnz <= d.ndof


def test_cr_mass_reference_triangle():
    """Edge-midpoint-rule masses against a 7-point quadrature of the basis products."""
    m = single_cell_mesh([(0, 0), (1, 0), (0, 1)])
    d = build_cr(m)
    rule = cell_quadrature(m)
    vals = d.basis_values(0, rule.points)  # (nq, 3)
    oracle = np.einsum("q,qi,qj->ij", rule.weights, vals, vals)
    M = np.zeros((3, 3))
    M[np.ix_(d.cell_dofs[0], d.cell_dofs[0])] = oracle
    np.testing.assert_allclose(assemble_mass(d).toarray(), M, atol=1e-15)
    np.testing.assert_allclose(np.diag(M), 1 / 6)


# stiffness -----------------------------------------------------------------

def test_stiffness_kills_constants(small_mesh):
    for d in _builders(small_mesh):
        S = assemble_stiffness(d, np.array([[2.0, 0.3], [0.3, 1.0]]))
        assert np.abs(S @ np.full(d.ndof, 3.0)).max() < 1e-12
        assert abs(S - S.T).max() < 1e-13


def test_zero_eigenvalue_rejected(unit_square):
    d = build_hmm(unit_square)
    with pytest.raises(NonPositiveTensor):
        assemble_stiffness(d, np.diag([1.0, 0.0]))
    with pytest.raises(NonSymmetricTensor):
        assemble_stiffness(d, np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_cell_tensors_forms(unit_square):
    A = np.diag([2.0, 1.0])
    for src in (A, A[None], lambda p, t: np.broadcast_to(A, (len(p), 2, 2))):
        np.testing.assert_array_equal(cell_tensors(unit_square, src)[0], A)
    with pytest.raises(ValueError):
        cell_tensors(unit_square, np.ones((3, 2, 2)))


@pytest.mark.parametrize("kind", ["rectangular", "triangular", "hexagonal", "kershaw"])
def test_stiffness_kernel_is_constants(kind):
    m = generate_mesh(kind, 1.0, 4)
    for d in _builders(m):
        S = assemble_stiffness(d, np.eye(2)).toarray()
        w = np.linalg.eigvalsh(S)
        tol = 1e-10 * w.max()
        assert np.sum(w < tol) == 1


@pytest.mark.parametrize("kind", ["rectangular", "triangular", "hexagonal", "kershaw"])
def test_norm_quadratic_form_positive_definite(kind):
    m = generate_mesh(kind, 1.0, 4)
    assert m.n_cells <= 100
    for d in _builders(m):
        Q = (d.mass() + d.identity_stiffness()).toarray()
        # whole space (Neumann) and zero-boundary subspace (Dirichlet)
        assert np.linalg.eigvalsh(Q).min() > 1e-10
        I = d.interior_dofs
        assert np.linalg.eigvalsh(d.identity_stiffness().toarray()[np.ix_(I, I)]).min() > 1e-10


# interpolation -------------------------------------------------------------

def test_interpolate_one(small_mesh):
    d = build_hmm(small_mesh)
    v = interpolate_initial(d, lambda x, y: np.ones_like(x))
    np.testing.assert_allclose(v[:d.n_cells], 1.0, rtol=1e-14)
    np.testing.assert_array_equal(v[d.n_cells:], 0.0)


def test_interpolate_x_average(unit_square):
    v = interpolate_initial(build_hmm(unit_square), lambda x, y: x)
    assert v[0] == pytest.approx(0.5, abs=1e-15)


def test_interpolate_glioma_peak():
    # a small cell centred on the first Gaussian peak (1, 3)
    h = 0.01
    m = single_cell_mesh([(1 - h, 3 - h), (1 + h, 3 - h), (1 + h, 3 + h), (1 - h, 3 + h)])
    v = interpolate_initial(build_hmm(m), glioma_initial)
    tails = glioma_initial(1.0, 3.0) - 0.8
    # second-order correction of the cell average: -(0.1 + 0.3) h^2 / 3 * 0.8 * 2
    assert v[0] == pytest.approx(0.8 + tails, abs=1e-4)
    assert tails < 1e-3


def test_interpolant_consistent_under_refinement():
    f = lambda x, y: np.exp(-x * x - 2 * y * y) + 0.3 * np.sin(3 * x)
    exact = integrate(generate_mesh("rectangular", 1.0, 64), f).sum()
    errs = []
    for n in (2, 4, 8):
        d = build_cr(triangular_mesh(1.0, n))
        v = interpolate_initial(d, f)
        errs.append(abs(np.ones(d.ndof) @ (d.mass() @ v) - exact))
    assert errs[0] > errs[1] > errs[2]


# discrete norm -------------------------------------------------------------

def test_discrete_norm_zero(small_mesh):
    d = build_hmm(small_mesh)
    assert discrete_norm(d, np.zeros(d.ndof)) == 0.0


def test_discrete_norm_constant_unit_square(unit_square):
    assert discrete_norm(build_hmm(unit_square), np.full(5, 2.0)) == pytest.approx(2.0, abs=1e-12)


@given(st.floats(-10, 10, allow_nan=False))
def test_discrete_norm_homogeneous(alpha):
    d = build_hmm(generate_mesh("kershaw", 1.0, 3))
    v = np.random.default_rng(3).normal(size=d.ndof)
    assert discrete_norm(d, alpha * v) == pytest.approx(abs(alpha) * discrete_norm(d, v),
                                                        rel=1e-12, abs=1e-14)


def test_discrete_norm_shape_check(unit_square):
    with pytest.raises(ValueError):
        discrete_norm(build_hmm(unit_square), np.zeros(3))


# time ----------------------------------------------------------------------

def test_time_grid_uniform():
    g = TimeGrid.uniform(1.0, 0.3)
    assert g.n_steps == 4 and g.final_time == pytest.approx(1.0)
    assert g.dt_max == pytest.approx(0.25)
    assert TimeGrid.uniform(0.0, 0.1).n_steps == 0


@pytest.mark.parametrize("t", [[0.0, 0.5, 0.5], [0.1, 0.2], [0.0, 0.3, 0.2]])
def test_time_grid_invalid(t):
    with pytest.raises(ValueError):
        TimeGrid(np.array(t))


@given(st.lists(st.floats(0.01, 2.0), min_size=1, max_size=8))
def test_time_grid_dt_max(steps):
    g = TimeGrid(np.concatenate([[0.0], np.cumsum(steps)]))
    assert g.dt_max == pytest.approx(max(steps))
    assert np.all(np.diff(g.instants) > 0)


def _dofs():
    g = TimeGrid(np.array([0.0, 0.5, 1.5, 2.0]))
    vals = np.arange(4.0)[:, None] * np.ones((4, 3))
    return SpaceTimeDofs(g, vals)


@pytest.mark.parametrize("t, n", [(0.0, 0), (0.2, 1), (0.5, 1), (0.5000001, 2), (1.5, 2),
                                  (1.7, 3), (2.0, 3)])
def test_time_reconstruction_left_continuous(t, n):
    np.testing.assert_array_equal(time_reconstruction(_dofs(), t), np.full(3, float(n)))


def test_time_reconstruction_out_of_range():
    with pytest.raises(OutOfRangeTime):
        time_reconstruction(_dofs(), 2.5)
    with pytest.raises(OutOfRangeTime):
        time_reconstruction(_dofs(), -0.1)


def test_delta_derivative():
    s = _dofs()
    np.testing.assert_allclose(delta_derivative(s, 1), 1.0)
    const = SpaceTimeDofs(s.grid, np.ones((4, 3)))
    for n in range(3):
        np.testing.assert_array_equal(delta_derivative(const, n), 0.0)
    with pytest.raises(OutOfRangeTime):
        delta_derivative(s, 3)


def test_space_time_shape_check():
    with pytest.raises(ValueError):
        SpaceTimeDofs(TimeGrid.uniform(1.0, 0.5), np.zeros((2, 4)))
