from functools import partial

import numpy as np
import pytest
import scipy.linalg
import scipy.sparse as sp

from krb.exceptions import DimensionMismatchError, EmptyModelError
from krb.factor import make_exact_preconditioner
from krb.krylov import bicg_run, gmres_run, pcg_run
from krb.linalg import AffineOperator, SpdWeight, gram_schmidt_m
from krb.online import online_solve
from krb.problems.convdiff import conv_diff2d
from krb.problems.stiffmass import stiff_mass2d
from krb.rkbm import align_bases, build_multi, build_rcgbm, build_rkbm1, build_rkbm2


@pytest.fixture(scope="module")
def stiffmass():
    """Fixture providing the SPD stiffness/mass problem and its exact preconditioner."""
    bundle = stiff_mass2d(8)
    B = make_exact_preconditioner(bundle.op, [1.0, 1.0], spd_hint=True)
    return bundle, B


@pytest.fixture(scope="module")
def convdiff():
    """Fixture providing the nonsymmetric problem with an LU preconditioner at (1, 0)."""
    bundle = conv_diff2d(8)
    B = make_exact_preconditioner(bundle.op, [1.0, 0.0], spd_hint=False)
    M = SpdWeight.from_matrix(bundle.norms["h1_semi"])
    return bundle, B, M


def _assert_same_iterate(lifted, iterate, rel=1e-6):
    assert np.linalg.norm(lifted - iterate) <= rel * np.linalg.norm(iterate)


@pytest.mark.parametrize("m", [1, 3, 5])
def test_rcgbm_reproduces_pcg_iterate(stiffmass, m):
    """Test that the Galerkin model at theta1 returns the m-th PCG iterate."""
    bundle, B = stiffmass
    theta1 = np.array([2.0, 0.5])
    model = build_rcgbm(bundle.op, bundle.rhs, B, theta1, m)
    assert model.variant == "galerkin"
    assert model.m == m
    trace = pcg_run(lambda x: bundle.op.apply(theta1, x), B.apply, bundle.rhs, m + 1)
    _, lifted = online_solve(model, theta1)
    _assert_same_iterate(lifted, trace.iterates[-1])


def test_rcgbm_orthonormalized_spans_same_space(stiffmass):
    """Test that orthonormalizing the directions does not change the reduced solution."""
    bundle, B = stiffmass
    theta1, theta = [2.0, 0.5], [0.7, 1.8]
    plain = build_rcgbm(bundle.op, bundle.rhs, B, theta1, 4)
    ortho = build_rcgbm(bundle.op, bundle.rhs, B, theta1, 4, orthonormalize=True)
    np.testing.assert_allclose(ortho.P.T @ ortho.P, np.eye(4), atol=1e-12)
    _assert_same_iterate(online_solve(ortho, theta)[1], online_solve(plain, theta)[1])
    assert ortho.meta["orthonormalized"]


@pytest.fixture(scope="module")
def random_spd():
    """Fixture providing a random two-term SPD family of size 60 with B = A(1, 1)^-1."""
    n = 60
    rng = np.random.default_rng(11)
    G1, G2 = rng.standard_normal((n, n)), rng.standard_normal((n, n))
    op = AffineOperator(
        (sp.csr_matrix(G1 @ G1.T + n * np.eye(n)), sp.csr_matrix(G2 @ G2.T + n * np.eye(n)))
    )
    B = make_exact_preconditioner(op, [1.0, 1.0], spd_hint=True)
    return op, B, rng.standard_normal(n)


def test_krylov_space_is_independent_of_theta1(random_spd):
    """Test that two affine terms and an exact preconditioner give the same search space."""
    op, B, f = random_spd
    spans = []
    for theta in ([2.0, 0.5], [0.5, 3.0]):
        trace = pcg_run(partial(op.apply, np.array(theta)), B.apply, f, m=6)
        assert len(trace.z) == 6
        spans.append(np.column_stack(trace.z))
    angles = scipy.linalg.subspace_angles(spans[0], spans[1])
    assert angles.max() <= 1e-7


def test_rkbm1_reproduces_gmres_iterate(convdiff):
    """Test that the least-squares model at theta1 returns the m-th GMRES iterate."""
    bundle, B, M = convdiff
    theta1 = bundle.theta((0.5, 0.3))
    m = 4
    model = build_rkbm1(bundle.op, bundle.rhs, B, M, theta1, m)
    assert model.variant == "least_squares"
    trace = gmres_run(lambda x: bundle.op.apply(theta1, x), B.apply, bundle.rhs, m + 1, M)
    _, lifted = online_solve(model, theta1)
    _assert_same_iterate(lifted, trace.iterates[-1])


def test_rkbm2_reproduces_bicg_iterate(convdiff):
    """Test that the Petrov-Galerkin model at theta1 returns the m-th BiCG iterate."""
    bundle, B, _ = convdiff
    theta1 = bundle.theta((0.5, 0.3))
    m = 4
    model = build_rkbm2(bundle.op, bundle.rhs, B, theta1, None, m)
    assert model.variant == "petrov_galerkin"
    assert model.Q.shape == model.P.shape
    trace = bicg_run(
        lambda x: bundle.op.apply(theta1, x),
        lambda x: bundle.op.apply_transpose(theta1, x),
        B.apply,
        B.apply_adjoint,
        bundle.rhs,
        m=m + 1,
    )
    _, lifted = online_solve(model, theta1)
    _assert_same_iterate(lifted, trace.iterates[-1])


@pytest.mark.parametrize("m", [2, 3, 5])
def test_rcgbm_reproduces_pcg_iterate_at_other_theta(stiffmass, m):
    """Test that the Galerkin model built at theta1 returns the PCG iterate at theta2."""
    bundle, B = stiffmass
    theta2 = np.array([0.7, 1.8])
    model = build_rcgbm(bundle.op, bundle.rhs, B, [2.0, 0.5], m, orthonormalize=True)
    trace = pcg_run(lambda x: bundle.op.apply(theta2, x), B.apply, bundle.rhs, m + 1)
    _, lifted = online_solve(model, theta2)
    _assert_same_iterate(lifted, trace.iterates[-1], rel=1e-8)


@pytest.mark.parametrize("m", [2, 4])
def test_rkbm1_reproduces_gmres_iterate_at_other_theta(convdiff, m):
    """Test that the least-squares model built at theta1 returns the GMRES iterate at theta2."""
    bundle, B, M = convdiff
    theta1, theta2 = bundle.theta((0.5, 0.3)), bundle.theta((1.5, 2.5))
    model = build_rkbm1(bundle.op, bundle.rhs, B, M, theta1, m, orthonormalize=True)
    trace = gmres_run(lambda x: bundle.op.apply(theta2, x), B.apply, bundle.rhs, m + 1, M)
    _, lifted = online_solve(model, theta2)
    _assert_same_iterate(lifted, trace.iterates[-1], rel=1e-8)


@pytest.mark.parametrize("m", [2, 4])
def test_rkbm2_reproduces_bicg_iterate_at_other_theta(convdiff, m):
    """Test that the Petrov-Galerkin model built at theta1 returns the BiCG iterate at theta2."""
    bundle, B, _ = convdiff
    theta1, theta2 = bundle.theta((0.5, 0.3)), bundle.theta((1.5, 2.5))
    model = build_rkbm2(bundle.op, bundle.rhs, B, theta1, None, m, orthonormalize=True)
    trace = bicg_run(
        lambda x: bundle.op.apply(theta2, x),
        lambda x: bundle.op.apply_transpose(theta2, x),
        B.apply,
        B.apply_adjoint,
        bundle.rhs,
        m=m + 1,
    )
    _, lifted = online_solve(model, theta2)
    _assert_same_iterate(lifted, trace.iterates[-1], rel=1e-8)


def test_rcgbm_keeps_full_dimension_after_convergence(stiffmass):
    """Test that a long run keeps every requested vector and the error keeps falling."""
    bundle, B = stiffmass
    theta1, theta2 = [1.0, 2.0], [0.7, 1.8]
    exact = scipy.linalg.solve(bundle.op.assemble(theta2).toarray(), bundle.rhs)
    errors = {}
    for m in (5, 10, 15):
        model = build_rcgbm(bundle.op, bundle.rhs, B, theta1, m, orthonormalize=True)
        assert model.m == m
        assert model.meta["harvested"] == [m]
        assert model.meta["stop_reasons"] == ["max_iter"]
        assert model.meta["notes"] == []
        _, lifted = online_solve(model, theta2)
        errors[m] = np.linalg.norm(lifted - exact) / np.linalg.norm(exact)
    assert errors[10] <= 1e-2 * errors[5]
    assert errors[15] <= max(2.0 * errors[10], 1e-10)


def test_rcgbm_records_shrunken_basis():
    """Test that an exactly vanishing residual shrinks the basis and leaves a note."""
    identity = sp.identity(3, format="csr")
    op = AffineOperator((identity, identity))
    B = make_exact_preconditioner(op, [1.0, 0.0], spd_hint=False)
    model = build_rcgbm(op, np.ones(3), B, [0.5, 0.5], 6)
    assert model.m == 1
    assert model.meta["harvested"] == [1]
    assert model.meta["stop_reasons"] == ["tolerance"]
    assert "1 of 6 vectors" in model.meta["notes"][0]


def test_zero_rhs_gives_empty_model(stiffmass):
    """Test that f = 0 raises EmptyModelError for single and multi builders."""
    bundle, B = stiffmass
    zero = np.zeros(bundle.n)
    with pytest.raises(EmptyModelError):
        build_rcgbm(bundle.op, zero, B, [2.0, 0.5], 3)
    with pytest.raises(EmptyModelError):
        build_multi(bundle.op, zero, B, None, [[2.0, 0.5]], 3, "mrcgbm")


def test_builders_check_dimensions(stiffmass):
    """Test that a right-hand side of the wrong length is rejected."""
    bundle, B = stiffmass
    with pytest.raises(DimensionMismatchError):
        build_rcgbm(bundle.op, np.ones(3), B, [2.0, 0.5], 3)


def test_mrcgbm_drops_dependent_directions(stiffmass):
    """Test that repeated instances on an invariant Krylov space add no rank."""
    bundle, B = stiffmass
    m = 4
    model = build_multi(
        bundle.op, bundle.rhs, B, None, [[2.0, 0.5], [0.5, 3.0]], m, "mrcgbm", drop_tol=1e-8
    )
    assert model.variant == "galerkin"
    assert model.m == m
    assert model.meta["harvested"] == [m, m]
    np.testing.assert_allclose(model.P.T @ model.P, np.eye(m), atol=1e-10)


def test_mrkbm1_is_m_orthonormal_and_exact_at_instances(convdiff):
    """Test the union basis of GMRES residuals and its accuracy at the instances."""
    bundle, B, M = convdiff
    thetas = [bundle.theta(mu) for mu in [(0.5, 0.3), (1.5, 2.0)]]
    model = build_multi(bundle.op, bundle.rhs, B, M, thetas, 5, "mrkbm1")
    assert model.variant == "least_squares"
    assert model.m <= 10
    W = bundle.norms["h1_semi"]
    np.testing.assert_allclose(model.P.T @ (W @ model.P), np.eye(model.m), atol=1e-10)
    assert model.meta["instances"] == [list(t) for t in thetas]


def test_mrkbm2_has_matching_trial_and_test_dimension(convdiff):
    """Test that mrkbm2 pairs trial and test bases to a common rank."""
    bundle, B, M = convdiff
    thetas = [bundle.theta(mu) for mu in [(0.5, 0.3), (1.5, 2.0)]]
    model = build_multi(bundle.op, bundle.rhs, B, M, thetas, 4, "mrkbm2")
    assert model.variant == "petrov_galerkin"
    assert model.Q.shape == model.P.shape


def test_align_bases_keeps_shared_directions():
    """Test that pairing a larger trial basis keeps the directions the test basis shares."""
    P = np.eye(4)[:, :3]
    Q = np.eye(4)[:, 1:3]
    P_aligned, Q_aligned = align_bases(P, Q)
    assert P_aligned.shape == Q_aligned.shape == (4, 2)
    np.testing.assert_allclose(P_aligned.T @ P_aligned, np.eye(2), atol=1e-12)
    assert scipy.linalg.subspace_angles(P_aligned, Q).max() <= 1e-12
    assert scipy.linalg.subspace_angles(Q_aligned, Q).max() <= 1e-12


def test_mrkbm2_pairs_bases_of_different_rank(convdiff, monkeypatch):
    """Test that a test union of lower rank is paired with the trial union, not cut."""
    bundle, B, M = convdiff
    thetas = [bundle.theta(mu) for mu in [(0.5, 0.3), (1.5, 2.0)]]
    calls = []

    def dropping_last_dual(cols, weight=None, tol=None):
        basis, rank = gram_schmidt_m(cols, weight, tol)
        calls.append(rank)
        if len(calls) == 2:
            return basis[:, :-1], rank - 1
        return basis, rank

    monkeypatch.setattr("krb.rkbm.gram_schmidt_m", dropping_last_dual)
    model = build_multi(bundle.op, bundle.rhs, B, M, thetas, 3, "mrkbm2")
    trial_rank, test_rank = calls[0], calls[1] - 1
    common = min(trial_rank, test_rank)
    assert model.Q.shape == model.P.shape == (bundle.n, common)
    note = model.meta["notes"][-1]
    assert f"trial rank {trial_rank} and test rank {test_rank} paired to {common}" in note
    assert np.all(np.isfinite(online_solve(model, thetas[0])[1]))


def test_build_multi_rejects_unknown_mode_and_empty_list(stiffmass):
    """Test the argument checks of build_multi."""
    bundle, B = stiffmass
    with pytest.raises(ValueError) as excinfo:
        build_multi(bundle.op, bundle.rhs, B, None, [[2.0, 0.5]], 3, "mgmres")
    assert "unknown multi-instance mode" in str(excinfo.value)
    with pytest.raises(ValueError):
        build_multi(bundle.op, bundle.rhs, B, None, [], 3, "mrcgbm")
