import numpy as np
import pytest
import scipy.sparse as sp

from krb.exceptions import ArityMismatchError, SingularReducedSystemError
from krb.factor import make_exact_preconditioner
from krb.linalg import AffineOperator, SpdWeight
from krb.online import online_solve, online_sweep, online_sweep_async, residual_norm
from krb.problems.convdiff import conv_diff2d
from krb.problems.stiffmass import stiff_mass2d
from krb.reductors import GalerkinReductor
from krb.rkbm import build_rcgbm, build_rkbm1, build_rkbm2


@pytest.fixture(scope="module")
def galerkin_model():
    """Fixture providing an RCGBM model of the stiffness/mass problem."""
    bundle = stiff_mass2d(8)
    B = make_exact_preconditioner(bundle.op, [1.0, 1.0], spd_hint=True)
    return bundle, build_rcgbm(bundle.op, bundle.rhs, B, [2.0, 0.5], 5)


@pytest.fixture(scope="module")
def convdiff_models():
    """Fixture providing least-squares and Petrov-Galerkin models of convection-diffusion."""
    bundle = conv_diff2d(8)
    B = make_exact_preconditioner(bundle.op, [1.0, 0.0], spd_hint=False)
    M = SpdWeight.from_matrix(bundle.norms["h1_semi"])
    theta1 = bundle.theta((0.5, 0.3))
    return bundle, B, M, {
        "least_squares": build_rkbm1(bundle.op, bundle.rhs, B, M, theta1, 5),
        "petrov_galerkin": build_rkbm2(bundle.op, bundle.rhs, B, theta1, None, 5),
    }


@pytest.fixture
def singular_model():
    """Fixture providing a Galerkin model whose reduced matrix vanishes at theta = (1, -1)."""
    eye = sp.eye(4, format="csr")
    op = AffineOperator((eye, eye))
    P = np.eye(4)[:, :2]
    return GalerkinReductor(op, np.ones(4)).reduce(P)


def test_online_solve_lifts_coordinates(galerkin_model):
    """Test that the lifted solution is P times the coordinates."""
    _, model = galerkin_model
    coords, lifted = online_solve(model, [1.0, 2.0])
    assert coords.shape == (model.m,)
    np.testing.assert_allclose(lifted, model.P @ coords)


def test_galerkin_residual_from_reduced_blocks(galerkin_model):
    """Test the reduced residual against the full-size residual."""
    bundle, model = galerkin_model
    theta = [0.8, 2.5]
    coords, lifted = online_solve(model, theta)
    full = bundle.rhs - bundle.op.apply(theta, lifted)
    expected = np.linalg.norm(full) / np.linalg.norm(bundle.rhs)
    assert residual_norm(model, theta, coords) == pytest.approx(expected, rel=1e-3, abs=1e-7)


def test_least_squares_residual_from_reduced_blocks(convdiff_models):
    """Test the reduced preconditioned M-norm residual of a least-squares model."""
    bundle, B, M, models = convdiff_models
    model = models["least_squares"]
    theta = bundle.theta((1.2, 1.0))
    coords, lifted = online_solve(model, theta)
    Bf = B(bundle.rhs)
    expected = M.norm(Bf - B(bundle.op.apply(theta, lifted))) / M.norm(Bf)
    assert residual_norm(model, theta, coords) == pytest.approx(expected, rel=1e-3, abs=1e-7)


def test_petrov_galerkin_residual_is_orthogonal_to_test_space(convdiff_models):
    """Test that the Petrov-Galerkin residual is orthogonal to the test basis."""
    bundle, _, _, models = convdiff_models
    model = models["petrov_galerkin"]
    theta = bundle.theta((1.2, 1.0))
    _, lifted = online_solve(model, theta)
    residual = bundle.rhs - bundle.op.apply(theta, lifted)
    assert np.abs(model.Q.T @ residual).max() <= 1e-9 * np.linalg.norm(bundle.rhs)


def test_online_solve_rejects_wrong_arity(galerkin_model):
    """Test that theta must have one entry per affine term."""
    _, model = galerkin_model
    with pytest.raises(ArityMismatchError) as excinfo:
        online_solve(model, [1.0, 2.0, 3.0])
    assert "2 affine terms" in str(excinfo.value)


def test_online_solve_singular_reduced_system(singular_model):
    """Test that a vanishing reduced matrix raises SingularReducedSystemError."""
    with pytest.raises(SingularReducedSystemError) as excinfo:
        online_solve(singular_model, [1.0, -1.0])
    assert excinfo.value.theta == (1.0, -1.0)


def test_sweep_records_failures_and_continues(singular_model):
    """Test that a failing grid point is recorded and the sweep goes on."""
    sweep = online_sweep(singular_model, [[1.0, 1.0], [1.0, -1.0], [2.0, 0.0]])
    assert [point.ok for point in sweep] == [True, False, True]
    failed = sweep[1]
    assert isinstance(failed.error, SingularReducedSystemError)
    assert failed.coords is None
    assert failed.residual_norm is None
    np.testing.assert_allclose(sweep[0].coords, [0.5, 0.5])
    np.testing.assert_allclose(sweep[2].coords, [0.5, 0.5])


def test_sweep_keeps_grid_order_and_lifts(galerkin_model):
    """Test that the sweep returns points in grid order with optional lifts."""
    _, model = galerkin_model
    grid = [[1.0 + 0.1 * k, 1.0] for k in range(5)]
    sweep = online_sweep(model, grid, keep_lifts=True)
    assert [point.theta for point in sweep] == [tuple(theta) for theta in grid]
    assert all(point.lifted is not None for point in sweep)
    assert all(point.online_us >= 0.0 for point in sweep)
    assert online_sweep(model, grid)[0].lifted is None


def test_sweep_with_workers_matches_serial(galerkin_model):
    """Test that a threaded sweep gives the same coordinates as a serial one."""
    _, model = galerkin_model
    grid = [[1.0 + 0.2 * k, 0.5 + 0.1 * k] for k in range(8)]
    serial = online_sweep(model, grid)
    threaded = online_sweep(model, grid, workers=3)
    for a, b in zip(serial, threaded, strict=True):
        assert a.theta == b.theta
        np.testing.assert_array_equal(a.coords, b.coords)


def test_sweep_validates_the_whole_grid_first(galerkin_model):
    """Test that a malformed grid point fails before any solve."""
    _, model = galerkin_model
    with pytest.raises(ArityMismatchError):
        online_sweep(model, [[1.0, 1.0], [1.0]])


@pytest.mark.asyncio
async def test_online_sweep_async(galerkin_model):
    """Test the asynchronous sweep from inside an event loop."""
    _, model = galerkin_model
    grid = [[1.0, 1.0], [2.0, 0.5], [0.5, 2.0]]
    sweep = await online_sweep_async(model, grid, workers=2)
    assert len(sweep) == 3
    assert all(point.ok for point in sweep)
    assert sweep[1].residual_norm == pytest.approx(residual_norm(model, grid[1], sweep[1].coords))
