import numpy as np
import pytest
import scipy.sparse as sp

from polyelast.assembly import BoundaryConditions, SparseSystem, assemble
from polyelast.mesh import generate_structured_mesh
from polyelast.solver import SolverConfig, SolverError, solve_spd
from polyelast.space import DofMap, MaterialParams


def make_system(matrix, rhs):
    """Wrap a plain SPD matrix as an all-free system for raw solver tests."""
    n = matrix.shape[0]
    full = sp.csr_matrix(matrix)
    return SparseSystem(
        matrix=full,
        load=rhs,
        lifting=np.zeros(n),
        free_indices=np.arange(n),
        constrained_indices=np.arange(0),
        dofmap=_VectorMap(n),
        full_matrix=full,
        full_load=rhs,
    )


class _VectorMap:
    """Minimal stand-in DofMap for raw linear-algebra tests."""

    def __init__(self, n):
        self.vector_size = n


def test_solver_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(tol=0.0)
    with pytest.raises(ValueError):
        SolverConfig(max_iterations=0)
    with pytest.raises(ValueError):
        SolverConfig(preconditioner="ilu")
    assert SolverConfig().iteration_cap(4) == 1000
    assert SolverConfig().iteration_cap(10**6) == 20000
    assert SolverConfig(max_iterations=5).iteration_cap(10**6) == 5


def test_identity_converges_in_one_iteration():
    n = 40
    b = np.zeros(n)
    b[0] = 1.0
    system = make_system(np.eye(n), b)
    result = solve_spd(system)
    assert result.iterations == 1
    assert result.function.values == pytest.approx(b)
    assert result.residual <= 1e-10


def test_zero_rhs_returns_zero():
    system = make_system(np.diag(np.arange(1.0, 7.0)), np.zeros(6))
    result = solve_spd(system)
    assert result.iterations == 0
    assert np.array_equal(result.function.values, np.zeros(6))


def test_random_spd_solves_and_error_energy_decreases():
    rng = np.random.default_rng(12)
    n = 60
    m = rng.standard_normal((n, n))
    a_mat = m @ m.T + n * np.eye(n)
    x_exact = rng.standard_normal(n)
    b = a_mat @ x_exact
    system = make_system(a_mat, b)
    result = solve_spd(system, SolverConfig(tol=1e-12))
    assert result.function.values == pytest.approx(x_exact, rel=1e-8, abs=1e-9)
    # the recorded residual history ends below tolerance
    assert result.residual <= 1e-12 * np.linalg.norm(b)


def test_diagonal_residuals_monotone():
    # on a diagonal system with Jacobi preconditioning, PCG reduces the
    # residual norm strictly at every step
    diag = np.linspace(1.0, 50.0, 30)
    rng = np.random.default_rng(5)
    b = rng.standard_normal(30)
    system = make_system(np.diag(diag), b)
    result = solve_spd(system, SolverConfig(tol=1e-12))
    hist = result.residual_history
    assert np.all(np.diff(hist) <= 1e-12 * hist[0])


def test_preconditioner_choice_agrees():
    mesh = generate_structured_mesh("tet", 2)
    dm = DofMap(mesh)
    bcs = BoundaryConditions.all_dirichlet(mesh)
    material = MaterialParams(mu=1.0, lam=100.0)
    force = lambda p: np.column_stack(
        [np.sin(np.pi * p[:, 0]), np.cos(np.pi * p[:, 1]), p[:, 2]])
    system = assemble(mesh, dm, material, bcs, body_force=force)
    tol = 1e-12
    res_jac = solve_spd(system, SolverConfig(tol=tol, preconditioner="diagonal"))
    res_none = solve_spd(system, SolverConfig(tol=tol, preconditioner="none"))
    diff = res_jac.function.values - res_none.function.values
    energy = lambda v: np.sqrt(v[system.free_indices] @ (system.matrix @ v[system.free_indices]))
    assert energy(diff) <= 10 * tol * max(energy(res_jac.function.values), 1e-30)


def test_iteration_cap_error_reports_residual():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((50, 50))
    a_mat = m @ m.T + 0.01 * np.eye(50)
    b = rng.standard_normal(50)
    system = make_system(a_mat, b)
    with pytest.raises(SolverError, match="did not converge"):
        solve_spd(system, SolverConfig(tol=1e-14, max_iterations=2))


def test_indefinite_matrix_detected():
    a_mat = np.diag([1.0, -1.0, 2.0])
    b = np.array([1.0, 1.0, 1.0])
    system = make_system(a_mat, b)
    with pytest.raises(SolverError):
        solve_spd(system, SolverConfig(preconditioner="none"))


def test_solution_merged_with_lifting():
    mesh = generate_structured_mesh("hex", 2)
    dm = DofMap(mesh)
    lift_field = lambda p: np.column_stack(
        [p[:, 0], 2.0 * p[:, 1], -1.0 * p[:, 2]])
    bcs = BoundaryConditions.all_dirichlet(mesh, data=lift_field)
    system = assemble(mesh, dm, MaterialParams(mu=1.0, lam=1.0), bcs)
    result = solve_spd(system, SolverConfig(tol=1e-12))
    assert np.array_equal(
        result.function.values[system.constrained_indices],
        system.lifting[system.constrained_indices],
    )
