import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from krb.diagnostics import (
    best_approximation,
    bound_gmres,
    bound_pcg,
    diagnostics_for,
    error_norms,
    field_of_values,
    lanczos_condition,
    petrov_quasi_optimality,
)
from krb.exceptions import KrbError
from krb.factor import make_exact_preconditioner, truth_solve
from krb.linalg import AffineOperator, SpdWeight
from krb.online import online_solve
from krb.problems.convdiff import conv_diff2d
from krb.problems.stiffmass import stiff_mass2d
from krb.rkbm import build_rcgbm, build_rkbm1, build_rkbm2


@pytest.fixture(scope="module")
def stiffmass():
    """Fixture providing the stiffness/mass problem, theta0 and its exact preconditioner."""
    bundle = stiff_mass2d(8)
    theta0 = np.array([1.0, 1.0])
    return bundle, theta0, make_exact_preconditioner(bundle.op, theta0, spd_hint=True)


@pytest.fixture(scope="module")
def convdiff():
    """Fixture providing convection-diffusion with B = A1^-1 and the H1 weight."""
    bundle = conv_diff2d(8)
    B = make_exact_preconditioner(bundle.op, [1.0, 0.0], spd_hint=False)
    return bundle, B, SpdWeight.from_matrix(bundle.norms["h1_semi"])


def _true_kappa(op, theta, theta0):
    eigenvalues = scipy.linalg.eigh(
        op.assemble(theta).toarray(),
        op.assemble(theta0).toarray(),
        eigvals_only=True,
    )
    return eigenvalues[-1] / eigenvalues[0]


@pytest.mark.parametrize(
    "kappa, m, expected",
    [
        (1.0, 5, 0.0),
        (9.0, 1, 1.0),
        (9.0, 2, 0.5),
    ],
)
def test_bound_pcg_values(kappa, m, expected):
    """Test the PCG bound at hand-computed points."""
    assert bound_pcg(kappa, m) == pytest.approx(expected)


def test_bound_gmres_values():
    """Test the GMRES bound and its undefined cases."""
    assert bound_gmres(1.0, 2.0, 2) == pytest.approx(0.75)
    assert bound_gmres(2.0, 2.0, 3) == 0.0
    assert bound_gmres(0.0, 2.0, 3) is None
    assert bound_gmres(-1.0, 2.0, 3) is None


def test_lanczos_condition_close_to_generalized_eigenvalues(stiffmass):
    """Test the Lanczos estimate against the dense generalized eigenvalue problem."""
    bundle, theta0, B = stiffmass
    theta = np.array([2.0, 0.5])
    kappa = lanczos_condition(bundle.op, B, bundle.rhs, theta)
    exact = _true_kappa(bundle.op, theta, theta0)
    assert kappa <= exact * (1.0 + 1e-6)
    assert kappa >= 0.9 * exact


def test_lanczos_condition_is_none_for_indefinite():
    """Test that an indefinite operator gives no condition estimate."""
    op = AffineOperator((sp.csr_matrix(np.diag([1.0, -1.0, 2.0])),))
    B = make_exact_preconditioner(
        AffineOperator((sp.eye(3, format="csr"),)),
        [1.0],
        spd_hint=True,
    )
    assert lanczos_condition(op, B, np.ones(3), [1.0]) is None


def test_rcgbm_error_obeys_pcg_bound(stiffmass):
    """Test that the energy error at theta1 stays below the PCG bound with the exact kappa."""
    bundle, theta0, B = stiffmass
    theta1 = np.array([2.0, 0.5])
    kappa = _true_kappa(bundle.op, theta1, theta0)
    truth = truth_solve(bundle.op, theta1, bundle.rhs, spd_hint=True)
    for m in (1, 2, 3, 4):
        model = build_rcgbm(bundle.op, bundle.rhs, B, theta1, m)
        diagnostics = diagnostics_for(model, bundle.op, bundle.rhs, B, None, theta1, truth)
        assert diagnostics["rel_error"]["energy"] <= bound_pcg(kappa, m) + 1e-10
        assert diagnostics["kappa"] is not None
        assert diagnostics["bound_pcg"] is not None


def test_field_of_values_against_dense_oracle(convdiff):
    """Test the sampled gamma and Gamma against the dense M-field of values."""
    bundle, B, M = convdiff
    theta = bundle.theta((0.7, 0.4))
    gamma, Gamma = field_of_values(bundle.op, B, M, theta)

    W = bundle.norms["h1_semi"].toarray()
    L = np.linalg.cholesky(W)
    BA = np.linalg.solve(W, bundle.op.assemble(theta).toarray())
    C = L.T @ BA @ np.linalg.inv(L.T)
    exact_gamma = np.linalg.eigvalsh(0.5 * (C + C.T)).min()
    exact_Gamma = np.linalg.norm(C, 2)
    assert gamma >= exact_gamma - 1e-10
    assert gamma == pytest.approx(theta[0], rel=1e-8)
    assert Gamma <= exact_Gamma * (1.0 + 1e-8)
    assert Gamma >= 0.95 * exact_Gamma


def test_rkbm1_residual_obeys_gmres_bound(convdiff):
    """Test that the preconditioned residual at theta1 stays below the GMRES bound."""
    bundle, B, M = convdiff
    theta1 = bundle.theta((0.7, 0.4))
    truth = truth_solve(bundle.op, theta1, bundle.rhs, spd_hint=False)
    W = bundle.norms["h1_semi"].toarray()
    L = np.linalg.cholesky(W)
    C = L.T @ np.linalg.solve(W, bundle.op.assemble(theta1).toarray()) @ np.linalg.inv(L.T)
    gamma = np.linalg.eigvalsh(0.5 * (C + C.T)).min()
    Gamma = np.linalg.norm(C, 2)
    for m in (1, 2, 4):
        model = build_rkbm1(bundle.op, bundle.rhs, B, M, theta1, m)
        _, lifted = online_solve(model, theta1)
        errors = error_norms(lifted, truth, bundle.op, theta1, bundle.rhs, B, M)
        assert errors["m_residual"] <= bound_gmres(gamma, Gamma, m) + 1e-10


def test_error_norms_known_values():
    """Test the relative error norms on a diagonal problem."""
    op = AffineOperator((sp.csr_matrix(np.diag([1.0, 4.0])),))
    truth = np.array([1.0, 1.0])
    lifted = np.array([1.0, 0.0])
    errors = error_norms(lifted, truth, op, [1.0], 5.0 * truth, norms={"l2": sp.eye(2)})
    assert errors["energy"] == pytest.approx(np.sqrt(4.0 / 5.0))
    assert errors["l2"] == pytest.approx(np.sqrt(0.5))
    assert "m_residual" not in errors


def test_error_norms_m_residual_with_identity_preconditioner():
    """Test the preconditioned residual norm with B = I and M = I."""
    op = AffineOperator((sp.csr_matrix(np.diag([1.0, 4.0])),))
    B = make_exact_preconditioner(AffineOperator((sp.eye(2, format="csr"),)), [1.0], True)
    truth = np.array([1.0, 1.0])
    f = op.apply([1.0], truth)
    errors = error_norms(np.array([1.0, 0.0]), truth, op, [1.0], f, B)
    assert errors["m_residual"] == pytest.approx(4.0 / np.linalg.norm(f))


def test_diagnostics_reports_sigma_in_requested_norm(stiffmass):
    """Test that sigma_m is the absolute error in the requested norm."""
    bundle, _, B = stiffmass
    theta = np.array([0.5, 2.0])
    model = build_rcgbm(bundle.op, bundle.rhs, B, [2.0, 0.5], 3)
    truth = truth_solve(bundle.op, theta, bundle.rhs, spd_hint=True)
    _, lifted = online_solve(model, theta)
    err = truth - lifted
    N = bundle.norms["combined"]
    diagnostics = diagnostics_for(
        model, bundle.op, bundle.rhs, B, None, theta, truth, norm="combined", norms=bundle.norms
    )
    assert diagnostics["sigma_m"] == pytest.approx(np.sqrt(err @ (N @ err)))
    assert set(diagnostics["rel_error"]) == {"energy", "h1_semi", "l2", "combined", "m_residual"}


def test_diagnostics_unknown_norm(stiffmass):
    """Test that a norm without a matrix is rejected."""
    bundle, _, B = stiffmass
    model = build_rcgbm(bundle.op, bundle.rhs, B, [2.0, 0.5], 2)
    truth = truth_solve(bundle.op, [2.0, 0.5], bundle.rhs, spd_hint=True)
    with pytest.raises(KrbError) as excinfo:
        diagnostics_for(model, bundle.op, bundle.rhs, B, None, [2.0, 0.5], truth, norm="h2")
    assert "no matrix" in str(excinfo.value)


def test_best_approximation_projection():
    """Test the best approximation error in the Euclidean and a weighted norm."""
    P = np.eye(3)[:, :2]
    u = np.array([1.0, 2.0, 3.0])
    assert best_approximation(P, u) == pytest.approx(3.0)
    M = SpdWeight.from_matrix(sp.csr_matrix(np.diag([1.0, 1.0, 4.0])))
    assert best_approximation(P, u, M) == pytest.approx(6.0)


def test_petrov_galerkin_error_within_quasi_optimal_bound(convdiff):
    """Test that the Petrov-Galerkin error is at most (1 + alpha/beta) times the best one."""
    bundle, B, _ = convdiff
    theta1 = bundle.theta((0.7, 0.4))
    theta = bundle.theta((1.5, 2.5))
    model = build_rkbm2(bundle.op, bundle.rhs, B, theta1, None, 5)
    constants = petrov_quasi_optimality(model, bundle.op, theta)
    assert constants["alpha"] > 0.0
    assert constants["beta"] > 0.0
    assert constants["constant"] == pytest.approx(constants["alpha"] / constants["beta"])

    truth = truth_solve(bundle.op, theta, bundle.rhs, spd_hint=False)
    _, lifted = online_solve(model, theta)
    best = best_approximation(model.P, truth)
    assert np.linalg.norm(truth - lifted) <= (1.0 + constants["constant"]) * best * (1 + 1e-8)


def test_quasi_optimality_needs_petrov_galerkin_model(stiffmass):
    """Test that a Galerkin model is rejected."""
    bundle, _, B = stiffmass
    model = build_rcgbm(bundle.op, bundle.rhs, B, [2.0, 0.5], 2)
    with pytest.raises(KrbError) as excinfo:
        petrov_quasi_optimality(model, bundle.op, [1.0, 1.0])
    assert "Petrov-Galerkin" in str(excinfo.value)


def test_reference_parameter_is_perfectly_conditioned(stiffmass):
    """Test that B A(theta0) = I gives kappa = 1 and a zero PCG bound."""
    bundle, theta0, B = stiffmass
    kappa = lanczos_condition(bundle.op, B, bundle.rhs, theta0)
    assert kappa == pytest.approx(1.0)
    assert bound_pcg(kappa, 3) == pytest.approx(0.0, abs=1e-12)
