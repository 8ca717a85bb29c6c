"""Smallest generalised eigenpairs of L u = lambda D u.

The problem is reduced to the symmetric standard form
D^-1/2 L D^-1/2 v = lambda v, solved densely, and mapped back with
u = D^-1/2 v. The returned columns are therefore D-orthonormal.
Inside a degenerate eigenvalue cluster any orthonormal basis is valid;
downstream k-means only sees the spanned rows.
"""

from __future__ import annotations

from typing import TYPE_CHECKING

import numpy as np
import scipy.linalg

from spectral_vote.exceptions import NumericalError, ParameterError
from spectral_vote.logging_config import get_logger
from spectral_vote.models import EigenBasis

if TYPE_CHECKING:
    import numpy.typing as npt

    from spectral_vote.models import AffinityGraph

logger = get_logger(__name__)


def _fix_signs(U: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Flip each column so its largest-magnitude entry is positive."""
    pivots = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[pivots, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs


def smallest_generalized_eigenpairs(graph: AffinityGraph, k: int) -> EigenBasis:
    """Solve L u = lambda D u for the k smallest eigenvalues.

    Args:
        graph: Affinity graph with strictly positive degrees
        k: Number of eigenpairs, 1 <= k <= n

    Returns:
        EigenBasis with eigenvalues ascending and D-orthonormal columns

    Raises:
        ParameterError: If k is out of range or a degree is not positive
        NumericalError: If the symmetric solver fails
    """
    n = graph.n
    if not 1 <= k <= n:
        msg = f"k must lie in [1, {n}], got {k}"
        raise ParameterError(msg)
    if np.any(graph.d <= 0.0):
        msg = "Every vertex degree must be positive"
        raise ParameterError(msg)

    inv_sqrt_d = 1.0 / np.sqrt(graph.d)
    reduced = inv_sqrt_d[:, np.newaxis] * graph.L * inv_sqrt_d[np.newaxis, :]
    reduced = 0.5 * (reduced + reduced.T)

    try:
        eigenvalues, V = scipy.linalg.eigh(
            reduced, subset_by_index=(0, k - 1), check_finite=False
        )
    except (np.linalg.LinAlgError, ValueError) as e:
        msg = f"Symmetric eigensolver failed for n={n}, k={k}: {e}"
        raise NumericalError(msg) from None

    if not (np.isfinite(eigenvalues).all() and np.isfinite(V).all()):
        msg = f"Symmetric eigensolver returned non-finite values for n={n}, k={k}"
        raise NumericalError(msg)

    U = _fix_signs(inv_sqrt_d[:, np.newaxis] * V)
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    eigenvalues.setflags(write=False)
    U.setflags(write=False)
    logger.debug("Solved n=%d, k=%d; smallest eigenvalue %.3e", n, k, eigenvalues[0])
    return EigenBasis(eigenvalues=eigenvalues, U=U)
