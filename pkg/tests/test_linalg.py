import numpy as np
import pytest
import scipy.sparse as sp

from krb.exceptions import (
    ArityMismatchError,
    DimensionMismatchError,
    NotPositiveDefiniteError,
    ParameterDomainError,
    SingularReducedSystemError,
)
from krb.linalg import (
    AffineOperator,
    SpdWeight,
    ThetaMap,
    as_csr,
    assemble_affine,
    dense_solve,
    from_triplets,
    gram_schmidt_m,
    m_inner,
    max_asymmetry,
    spmv,
    spmv_transpose,
)


@pytest.fixture
def terms():
    """Fixture providing three random sparse terms with different patterns."""
    rng = np.random.default_rng(7)
    return [sp.random(12, 12, density=0.3, random_state=rng, format="csr") for _ in range(3)]


@pytest.fixture
def spd_matrix():
    """Fixture providing a small random SPD matrix."""
    rng = np.random.default_rng(3)
    G = rng.standard_normal((8, 8))
    return as_csr(G @ G.T + 8.0 * np.eye(8))


def test_as_csr_is_canonical():
    """Test that as_csr sums duplicates and sorts column indices."""
    coo = sp.coo_matrix(([1.0, 2.0, 3.0], ([0, 0, 1], [2, 2, 0])), shape=(2, 3))
    A = as_csr(coo)
    assert A.has_canonical_format
    assert A[0, 2] == 3.0
    assert A.nnz == 2


def test_as_csr_rejects_nonfinite():
    """Test that nonfinite entries are rejected."""
    with pytest.raises(ValueError) as excinfo:
        as_csr(np.array([[1.0, np.inf]]))
    assert "nonfinite" in str(excinfo.value)


def test_from_triplets_sums_repeated_coordinates():
    """Test that repeated triplets are accumulated."""
    A = from_triplets([0, 0, 1], [1, 1, 1], [2.0, 0.5, 1.0], (2, 2))
    np.testing.assert_array_equal(A.toarray(), [[0.0, 2.5], [0.0, 1.0]])


def test_spmv_and_transpose(terms):
    """Test the matrix-vector kernels against dense products."""
    A = terms[0]
    x = np.arange(12.0)
    np.testing.assert_allclose(spmv(A, x), A.toarray() @ x)
    np.testing.assert_allclose(spmv_transpose(A, x), A.toarray().T @ x)


def test_spmv_dimension_mismatch(terms):
    """Test that a wrong vector length raises DimensionMismatchError."""
    with pytest.raises(DimensionMismatchError):
        spmv(terms[0], np.ones(5))


def test_affine_assemble_matches_dense_sum(terms):
    """Test that the union-pattern assembly equals the dense combination."""
    op = AffineOperator(tuple(terms))
    theta = np.array([0.5, -2.0, 3.0])
    expected = sum(t * term.toarray() for t, term in zip(theta, terms, strict=True))
    np.testing.assert_allclose(op.assemble(theta).toarray(), expected, rtol=0.0, atol=1e-14)
    np.testing.assert_allclose(assemble_affine(op, theta).toarray(), expected, atol=1e-14)
    assert op.assemble(theta).has_canonical_format


def test_affine_apply_matches_assembled(terms):
    """Test that apply and apply_transpose never need the assembled matrix."""
    op = AffineOperator(tuple(terms))
    theta = [1.0, 2.0, -1.0]
    x = np.linspace(-1.0, 1.0, 12)
    A = op.assemble(theta).toarray()
    np.testing.assert_allclose(op.apply(theta, x), A @ x, atol=1e-13)
    np.testing.assert_allclose(op.apply_transpose(theta, x), A.T @ x, atol=1e-13)


@pytest.mark.parametrize(
    "theta, error",
    [
        ([1.0, 2.0], ArityMismatchError),
        ([1.0, 2.0, 3.0, 4.0], ArityMismatchError),
        ([1.0, np.nan, 0.0], ParameterDomainError),
    ],
)
def test_affine_rejects_bad_theta(terms, theta, error):
    """Test that coefficient vectors are validated."""
    op = AffineOperator(tuple(terms))
    with pytest.raises(error):
        op.assemble(theta)


def test_affine_rejects_mismatched_terms():
    """Test that terms of different sizes are rejected."""
    with pytest.raises(DimensionMismatchError):
        AffineOperator((sp.eye(3, format="csr"), sp.eye(4, format="csr")))


def test_affine_symmetry_detection(spd_matrix):
    """Test is_symmetric on symmetric and skew terms."""
    skew = as_csr(np.triu(np.ones((8, 8)), 1) - np.tril(np.ones((8, 8)), -1))
    assert AffineOperator((spd_matrix, spd_matrix)).is_symmetric()
    assert not AffineOperator((spd_matrix, skew)).is_symmetric()
    assert max_asymmetry(skew) == 2.0


def test_theta_map_validates_dimension_and_arity():
    """Test that a theta map checks its input dimension and output arity."""
    good = ThetaMap("pair", 2, lambda mu: (mu[0], mu[0] ** 2), dim=1)
    np.testing.assert_array_equal(good(3.0), [3.0, 9.0])
    with pytest.raises(ParameterDomainError):
        good((1.0, 2.0))
    bad = ThetaMap("bad", 3, lambda mu: mu, dim=2)
    with pytest.raises(ArityMismatchError):
        bad((1.0, 2.0))


def test_spd_weight_accepts_spd(spd_matrix):
    """Test the weighted inner product and norm."""
    M = SpdWeight.from_matrix(spd_matrix)
    x = np.ones(8)
    assert M.inner(x, x) == pytest.approx(float(x @ spd_matrix @ x))
    assert M.norm(x) == pytest.approx(np.sqrt(float(x @ spd_matrix @ x)))
    assert m_inner(SpdWeight.identity(), x, 2 * x) == pytest.approx(16.0)


def test_spd_weight_rejects_indefinite():
    """Test that a negative-definite weight raises NotPositiveDefiniteError."""
    with pytest.raises(NotPositiveDefiniteError):
        SpdWeight.from_matrix(-sp.eye(5, format="csr"))


def test_spd_weight_rejects_nonsymmetric():
    """Test that a nonsymmetric weight is rejected."""
    with pytest.raises(ValueError) as excinfo:
        SpdWeight.from_matrix(np.array([[2.0, 1.0], [0.0, 2.0]]))
    assert "symmetric" in str(excinfo.value)


def test_gram_schmidt_m_orthonormal_and_drops_dependent(spd_matrix):
    """Test M-orthonormality and the rank of a dependent family."""
    rng = np.random.default_rng(11)
    a, b = rng.standard_normal(8), rng.standard_normal(8)
    M = SpdWeight.from_matrix(spd_matrix)
    Q, rank = gram_schmidt_m([a, b, a + 2.0 * b], M)
    assert rank == 2
    assert Q.shape == (8, 2)
    np.testing.assert_allclose(Q.T @ (spd_matrix @ Q), np.eye(2), atol=1e-12)


def test_gram_schmidt_m_zero_vectors():
    """Test that only zero vectors give rank 0."""
    Q, rank = gram_schmidt_m([np.zeros(4), np.zeros(4)])
    assert rank == 0
    assert Q.shape == (4, 0)


def test_dense_solve_solves():
    """Test dense_solve on a well-conditioned system."""
    A = np.array([[4.0, 1.0], [2.0, 3.0]])
    b = np.array([1.0, 2.0])
    np.testing.assert_allclose(A @ dense_solve(A, b), b, atol=1e-14)


def test_dense_solve_singular_reports_theta():
    """Test that a singular reduced system carries theta and a condition estimate."""
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(SingularReducedSystemError) as excinfo:
        dense_solve(A, np.ones(2), theta=[1.0, -1.0])
    assert excinfo.value.theta == (1.0, -1.0)
    assert excinfo.value.condition > 1e14


def test_dense_solve_zero_matrix():
    """Test that a zero reduced matrix is reported as singular."""
    with pytest.raises(SingularReducedSystemError):
        dense_solve(np.zeros((3, 3)), np.ones(3))
