"""Tests for the smallest generalised eigenpairs of L u = lambda D u."""

import numpy as np
import pytest
import scipy.linalg

from spectral_vote.eigen import smallest_generalized_eigenpairs
from spectral_vote.exceptions import ParameterError
from spectral_vote.graph import build_graph, graph_from_adjacency
from spectral_vote.models import AffinityGraph, FeatureMap
from tests.scenes import two_block_features

TOLERANCE = 1e-9


def _random_graph(seed: int, grid: tuple[int, int] = (4, 4)) -> AffinityGraph:
    rng = np.random.default_rng(seed)
    # Positive entries keep every cosine positive, so the graph is connected
    return build_graph(FeatureMap(rng.uniform(0.1, 1.0, size=(*grid, 5))))


def test_connected_graph_has_constant_null_vector() -> None:
    basis = smallest_generalized_eigenpairs(_random_graph(0), 1)
    assert basis.eigenvalues[0] == pytest.approx(0.0, abs=TOLERANCE)
    u0 = basis.U[:, 0]
    np.testing.assert_allclose(u0, np.full_like(u0, u0[0]), atol=TOLERANCE)


def test_two_components_span_both_indicators() -> None:
    graph = build_graph(two_block_features())
    basis = smallest_generalized_eigenpairs(graph, 2)
    np.testing.assert_allclose(basis.eigenvalues, [0.0, 0.0], atol=TOLERANCE)

    left = np.zeros(64)
    left.reshape(8, 8)[:, :4] = 1.0
    for indicator in (left, 1.0 - left):
        coefficients, *_ = np.linalg.lstsq(basis.U, indicator, rcond=None)
        np.testing.assert_allclose(basis.U @ coefficients, indicator, atol=1e-8)


def test_three_vertex_path_matches_dense_oracle() -> None:
    """Path 1-2-3 without self-loops has generalised eigenvalues {0, 1, 2}."""
    graph = graph_from_adjacency([[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    basis = smallest_generalized_eigenpairs(graph, 3)
    oracle = scipy.linalg.eigh(graph.L, np.diag(graph.d), eigvals_only=True)
    np.testing.assert_allclose(basis.eigenvalues, oracle, atol=TOLERANCE)
    np.testing.assert_allclose(basis.eigenvalues, [0.0, 1.0, 2.0], atol=TOLERANCE)


def test_eigenpairs_satisfy_equation_and_d_orthonormality() -> None:
    graph = _random_graph(1, (5, 5))
    basis = smallest_generalized_eigenpairs(graph, 4)
    D = np.diag(graph.d)
    for j in range(basis.k):
        u = basis.U[:, j]
        residual = graph.L @ u - basis.eigenvalues[j] * (D @ u)
        assert np.linalg.norm(residual) <= 1e-8
    np.testing.assert_allclose(basis.U.T @ D @ basis.U, np.eye(4), atol=1e-8)
    assert np.all(np.diff(basis.eigenvalues) >= -TOLERANCE)


def test_column_signs_are_fixed() -> None:
    basis = smallest_generalized_eigenpairs(_random_graph(2), 3)
    for j in range(3):
        column = basis.U[:, j]
        assert column[np.argmax(np.abs(column))] > 0


def test_k_out_of_range() -> None:
    graph = _random_graph(3, (2, 2))
    with pytest.raises(ParameterError):
        smallest_generalized_eigenpairs(graph, 0)
    with pytest.raises(ParameterError):
        smallest_generalized_eigenpairs(graph, 5)


def test_zero_degree_vertex_is_rejected() -> None:
    graph = graph_from_adjacency([[0, 0], [0, 1]])
    with pytest.raises(ParameterError):
        smallest_generalized_eigenpairs(graph, 1)


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(200))
def test_random_small_graphs_match_dense_oracle(seed: int) -> None:
    rng = np.random.default_rng(seed)
    grid = (int(rng.integers(1, 5)), int(rng.integers(2, 5)))
    n = grid[0] * grid[1]
    k = int(rng.integers(1, n + 1))
    graph = build_graph(FeatureMap(rng.normal(size=(*grid, int(rng.integers(2, 6))))))

    basis = smallest_generalized_eigenpairs(graph, k)
    oracle_values, oracle_vectors = scipy.linalg.eigh(graph.L, np.diag(graph.d))

    np.testing.assert_allclose(basis.eigenvalues, oracle_values[:k], atol=1e-8)
    assert oracle_values.min() >= -1e-10
    assert oracle_values.max() <= 2.0 + 1e-10
    assert np.all((basis.eigenvalues >= -1e-10) & (basis.eigenvalues <= 2.0 + 1e-10))

    bound = 1e-8 * np.linalg.norm(graph.L) + 1e-14
    for j in range(k):
        u = basis.U[:, j]
        residual = graph.L @ u - basis.eigenvalues[j] * graph.d * u
        assert np.linalg.norm(residual) <= bound

    # The subspace is only determined when the spectrum separates after k
    if k < n and oracle_values[k] - oracle_values[k - 1] > 1e-6:
        angles = scipy.linalg.subspace_angles(basis.U, oracle_vectors[:, :k])
        assert angles.max() <= 1e-6
