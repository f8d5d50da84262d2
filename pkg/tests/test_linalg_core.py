import logging
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_hermitian, random_positive
from linalg_core import (
    HermitianMatrix,
    PsdMatrix,
    channel_matrix,
    expectation,
    solve_damped_fixed_point,
    spectral_decompose,
    validate_hermitian,
    validate_psd,
)
from ness_errors import (
    NotHermitianError,
    NotPsdError,
    NotSquareError,
    SingularGeneratorError,
)
from ness_config import DEFAULT_TOLERANCES
from oracles import fixed_point_integral

MATRIX_DIMENSION = 3


def residual(P, H, S, X):
    G = P + 1j * H
    return np.linalg.norm(G @ X + X @ G.conj().T - 2.0 * S)


class TestValidation:
    def test_rejects_non_square_with_name(self):
        with pytest.raises(NotSquareError, match="H"):
            validate_hermitian(np.zeros((2, 3)), "H")

    def test_rejects_non_hermitian_with_name(self):
        with pytest.raises(NotHermitianError, match="H"):
            validate_hermitian([[0.0, 1.0], [0.0, 0.0]], "H")

    def test_symmetrizes_round_off(self):
        raw = np.array([[1.0, 0.5 + 1e-15], [0.5, 2.0]])
        H = validate_hermitian(raw)
        np.testing.assert_array_equal(H.entries, H.entries.conj().T)

    def test_psd_rejects_negative_eigenvalue(self):
        with pytest.raises(NotPsdError, match="D"):
            validate_psd(np.diag([1.0, -0.1]), "D")

    def test_psd_clips_tiny_negative_eigenvalue(self):
        M = validate_psd(np.diag([1.0, -1e-14]), "A")
        assert isinstance(M, PsdMatrix)
        assert np.linalg.eigvalsh(M.entries)[0] >= -1e-15

    def test_entries_are_read_only(self):
        H = HermitianMatrix(np.eye(2))
        with pytest.raises(ValueError):
            H.entries[0, 0] = 5.0


class TestSpectralDecompose:
    def test_merges_near_degenerate_levels(self):
        H = HermitianMatrix(np.diag([1.0, 1.0 + 1e-12, 3.0]))
        decomposition = spectral_decompose(H)
        assert decomposition.multiplicities == (2, 1)
        np.testing.assert_allclose(decomposition.reconstruct(), H.entries, atol=1e-11)

    def test_distinct_levels_and_resolution_of_identity(self, rng):
        H = HermitianMatrix(random_hermitian(rng, 5))
        decomposition = spectral_decompose(H)
        assert decomposition.multiplicities == (1, 1, 1, 1, 1)
        np.testing.assert_allclose(sum(decomposition.projectors), np.eye(5), atol=1e-12)
        for R in decomposition.projectors:
            np.testing.assert_allclose(R @ R, R, atol=1e-12)

    def test_fully_degenerate(self):
        decomposition = spectral_decompose(HermitianMatrix(2.0 * np.eye(3)))
        assert decomposition.multiplicities == (3,)
        assert decomposition.eigenvalues[0] == pytest.approx(2.0)

    def test_rejects_non_positive_tolerance(self):
        with pytest.raises(ValueError):
            spectral_decompose(HermitianMatrix(np.eye(2)), degeneracy_tol=0.0)


class TestSolveDampedFixedPoint:
    def test_scalar_closed_form(self):
        X = solve_damped_fixed_point(PsdMatrix([[2.0]]), HermitianMatrix([[5.0]]), HermitianMatrix([[1.0]]))
        assert X.entries[0, 0].real == pytest.approx(0.5, abs=1e-14)

    def test_schur_matches_kron(self, rng):
        P = PsdMatrix(random_positive(rng, 5, floor=0.2))
        H = HermitianMatrix(random_hermitian(rng, 5))
        S = HermitianMatrix(random_positive(rng, 5))
        X_schur = solve_damped_fixed_point(P, H, S, method="schur")
        X_kron = solve_damped_fixed_point(P, H, S, method="kron")
        np.testing.assert_allclose(X_schur.entries, X_kron.entries, atol=1e-10)

    def test_matches_defining_integral(self, rng):
        P = random_positive(rng, 3, floor=0.5)
        H = random_hermitian(rng, 3)
        S = random_positive(rng, 3)
        X = solve_damped_fixed_point(PsdMatrix(P), HermitianMatrix(H), HermitianMatrix(S))
        np.testing.assert_allclose(X.entries, fixed_point_integral(P, H, S), atol=1e-7)

    def test_large_coherent_part(self, rng):
        P = random_positive(rng, 6, floor=0.1)
        H = 1e5 * random_hermitian(rng, 6)
        S = random_positive(rng, 6)
        X = solve_damped_fixed_point(PsdMatrix(P), HermitianMatrix(H), HermitianMatrix(S))
        assert residual(P, H, S, X.entries) <= 1e-6 * np.linalg.norm(H) * np.linalg.norm(X.entries)
        np.testing.assert_array_equal(X.entries, X.entries.conj().T)

    def test_singular_damping_raises(self):
        with pytest.raises(SingularGeneratorError):
            solve_damped_fixed_point(PsdMatrix(np.diag([1.0, 0.0])), HermitianMatrix(np.zeros((2, 2))),
                                     HermitianMatrix(np.eye(2)))

    def test_dimension_mismatch(self):
        with pytest.raises(NotSquareError):
            solve_damped_fixed_point(PsdMatrix(np.eye(2)), HermitianMatrix(np.eye(3)), HermitianMatrix(np.eye(2)))

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            solve_damped_fixed_point(PsdMatrix(np.eye(2)), HermitianMatrix(np.eye(2)),
                                     HermitianMatrix(np.eye(2)), method="qr")

    def test_kron_limited_to_small_systems(self):
        with pytest.raises(ValueError):
            solve_damped_fixed_point(PsdMatrix(np.eye(9)), HermitianMatrix(np.eye(9)),
                                     HermitianMatrix(np.eye(9)), method="kron")

    def test_linear_in_source(self, rng):
        P = PsdMatrix(random_positive(rng, 5, floor=0.2))
        H = HermitianMatrix(random_hermitian(rng, 5, scale=3.0))
        S1, S2 = random_hermitian(rng, 5), random_positive(rng, 5)
        alpha, beta = 0.7, -2.3
        combined = solve_damped_fixed_point(P, H, HermitianMatrix(alpha * S1 + beta * S2))
        X1 = solve_damped_fixed_point(P, H, HermitianMatrix(S1))
        X2 = solve_damped_fixed_point(P, H, HermitianMatrix(S2))
        np.testing.assert_allclose(combined.entries, alpha * X1.entries + beta * X2.entries, atol=1e-10)

    @pytest.mark.parametrize("instance", range(5))
    def test_matches_defining_integral_4x4(self, instance):
        rng = np.random.default_rng(1000 + instance)
        P = random_positive(rng, 4, floor=0.3)
        H = random_hermitian(rng, 4)
        S = random_positive(rng, 4)
        X = solve_damped_fixed_point(PsdMatrix(P), HermitianMatrix(H), HermitianMatrix(S))
        np.testing.assert_allclose(X.entries, fixed_point_integral(P, H, S), atol=1e-8)

    def test_strict_residual_does_not_warn(self, rng, caplog):
        P = PsdMatrix(random_positive(rng, 4, floor=0.2))
        H = HermitianMatrix(random_hermitian(rng, 4))
        S = HermitianMatrix(random_positive(rng, 4))
        with caplog.at_level(logging.WARNING, logger="linalg_core"):
            solve_damped_fixed_point(P, H, S)
        assert "floating-point floor" not in caplog.text

    def test_floor_acceptance_is_logged(self, rng, caplog):
        P = PsdMatrix(random_positive(rng, 4, floor=0.2))
        H = HermitianMatrix(random_hermitian(rng, 4))
        S = HermitianMatrix(random_positive(rng, 4))
        no_relative_slack = replace(DEFAULT_TOLERANCES, residual_rtol=0.0)
        with caplog.at_level(logging.WARNING, logger="linalg_core"):
            X = solve_damped_fixed_point(P, H, S, tol=no_relative_slack)
        if residual(P.entries, H.entries, S.entries, X.entries) > 0.0:
            assert "floating-point floor" in caplog.text


@seed(1)
@settings(max_examples=40, deadline=None)
@given(
    w=arrays(np.float64, (MATRIX_DIMENSION, MATRIX_DIMENSION), elements=st.floats(-1.0, 1.0)),
    h=arrays(np.float64, (MATRIX_DIMENSION, MATRIX_DIMENSION), elements=st.floats(-10.0, 10.0)),
    s=arrays(np.float64, (MATRIX_DIMENSION, MATRIX_DIMENSION), elements=st.floats(-1.0, 1.0)),
)
def test_fixed_point_residual_hypothesis(w, h, s):
    P = w @ w.T + 0.1 * np.eye(MATRIX_DIMENSION)
    H = 0.5 * (h + h.T)
    S = s @ s.T
    X = solve_damped_fixed_point(PsdMatrix(P), HermitianMatrix(H), HermitianMatrix(S))

    eps = np.finfo(float).eps
    accepted = (DEFAULT_TOLERANCES.residual_rtol * np.linalg.norm(2.0 * S)
                + 64 * eps * np.linalg.norm(P + 1j * H) * np.linalg.norm(X.entries))
    assert residual(P, H, S, X.entries) <= accepted
    assert np.linalg.eigvalsh(X.entries)[0] >= -1e-10 * max(1.0, np.linalg.norm(X.entries))


class TestChannels:
    def test_single_channel(self):
        M = channel_matrix([2.0], [[1.0, 0.0]])
        np.testing.assert_allclose(M.entries, [[1.0, 0.0], [0.0, 0.0]])

    def test_two_channels_sum(self):
        M = channel_matrix([1.0, 4.0], [[1.0, 0.0], [0.0, 1.0]])
        np.testing.assert_allclose(M.entries, np.diag([0.5, 2.0]))

    def test_negative_rate_rejected(self):
        with pytest.raises(NotPsdError):
            channel_matrix([-1.0], [[1.0]])

    def test_rate_vector_count_mismatch(self):
        with pytest.raises(NotSquareError):
            channel_matrix([1.0, 2.0], [[1.0, 0.0]])

    def test_expectation_of_identity_is_trace(self, rng):
        Q = HermitianMatrix(random_positive(rng, 4))
        assert expectation(np.eye(4), Q) == pytest.approx(np.trace(Q.entries))
