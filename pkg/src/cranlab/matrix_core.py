"""Complex Hermitian matrix algebra shared by the rate engines.

All log-determinants are in bits. Hermitian inputs are symmetrized once,
when they are validated, and rejected (never projected) when they fail the
PSD tolerance.
"""

from dataclasses import dataclass
from typing import Iterable, Sequence, Tuple, Type

import numpy as np
import numpy.typing as npt
import scipy.linalg

from .constants import HERMITIAN_RTOL, PD_TOL, PSD_TOL
from .errors import (
    DimensionMismatch,
    DuplicateIndex,
    IndexOutOfRange,
    NonFiniteEntries,
    NotHermitian,
    NotPsd,
    SingularConditioningBlock,
    SingularMatrix,
)

ComplexMatrix = npt.NDArray[np.complex128]
HermitianPsd = npt.NDArray[np.complex128]


def as_complex_matrix(m: npt.ArrayLike) -> ComplexMatrix:
    """Convert input to a finite 2-D complex array.

    Args:
        m: Scalar, vector-like or matrix-like input

    Returns:
        2-D complex128 array
    """
    arr = np.asarray(m, dtype=np.complex128)
    if arr.ndim < 2:
        arr = np.atleast_2d(arr)
    if arr.ndim != 2:
        raise DimensionMismatch(f"expected a matrix, got {arr.ndim}-d array")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteEntries("matrix has non-finite entries")
    return arr


def symmetrize(m: ComplexMatrix) -> HermitianPsd:
    """Return (m + m^H) / 2."""
    return (m + m.conj().T) / 2


def hermitian_psd(m: npt.ArrayLike, tol: float = PSD_TOL) -> HermitianPsd:
    """Validate a Hermitian PSD matrix and return its symmetrized copy.

    Args:
        m: Candidate matrix
        tol: Eigenvalues must be >= -tol * trace

    Returns:
        Symmetrized matrix
    """
    arr = as_complex_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"matrix is not square: {arr.shape}")
    scale = np.linalg.norm(arr)
    if np.linalg.norm(arr - arr.conj().T) > HERMITIAN_RTOL * scale:
        raise NotHermitian("matrix differs from its conjugate transpose")
    sym = symmetrize(arr)
    trace = float(np.real(np.trace(sym)))
    min_eig = float(np.linalg.eigvalsh(sym)[0])
    if min_eig < -tol * max(trace, 0.0):
        raise NotPsd(f"min eigenvalue {min_eig:.3e} below -{tol:g} x trace {trace:.3e}")
    return sym


def require_pd(m: ComplexMatrix, error: Type[SingularMatrix] = SingularMatrix,
               what: str = "matrix") -> None:
    """Raise ``error`` unless min eigenvalue > PD_TOL * trace."""
    trace = float(np.real(np.trace(m)))
    if trace <= 0.0:
        raise error(f"{what} has non-positive trace {trace:.3e}")
    min_eig = float(np.linalg.eigvalsh(m)[0])
    if min_eig <= PD_TOL * trace:
        raise error(f"{what} is not strictly positive definite "
                    f"(min eigenvalue {min_eig:.3e}, trace {trace:.3e})")


def logdet2(m: HermitianPsd) -> float:
    """Log base 2 of the determinant of a strictly PD Hermitian matrix.

    Computed from the Cholesky factor, not by determinant expansion.

    Args:
        m: Strictly positive definite Hermitian matrix

    Returns:
        log2 |m| in bits
    """
    arr = as_complex_matrix(m)
    if arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"matrix is not square: {arr.shape}")
    require_pd(arr)
    try:
        chol = scipy.linalg.cholesky(arr, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix(f"Cholesky factorization failed: {exc}") from exc
    return float(2.0 * np.sum(np.log2(np.real(np.diag(chol)))))


def block_diag(blocks: Sequence[npt.ArrayLike]) -> ComplexMatrix:
    """Direct sum of square blocks."""
    return scipy.linalg.block_diag(*[as_complex_matrix(b) for b in blocks]).astype(np.complex128)


@dataclass(frozen=True)
class BlockIndexSet:
    """Ordered selection of blocks from a block partition.

    Indices are 0-based; ``block_dims`` lists the dimension of every block in
    the partition, selected or not.
    """
    indices: Tuple[int, ...]
    block_dims: Tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "block_dims", tuple(int(d) for d in self.block_dims))
        if any(d < 1 for d in self.block_dims):
            raise DimensionMismatch(f"block dimensions must be >= 1: {self.block_dims}")
        n = len(self.block_dims)
        for i in self.indices:
            if i < 0 or i >= n:
                raise IndexOutOfRange(f"block index {i} outside 0..{n - 1}")
        if len(set(self.indices)) != len(self.indices):
            raise DuplicateIndex(f"repeated block index in {self.indices}")

    @classmethod
    def uniform(cls, indices: Iterable[int], n_blocks: int, dim: int) -> "BlockIndexSet":
        """Selection from a partition of ``n_blocks`` equal blocks."""
        return cls(tuple(indices), (dim,) * n_blocks)

    @classmethod
    def full(cls, n_blocks: int, dim: int) -> "BlockIndexSet":
        """All blocks in natural order."""
        return cls(tuple(range(n_blocks)), (dim,) * n_blocks)

    @classmethod
    def prefix(cls, order: Sequence[int], count: int, dim: int) -> "BlockIndexSet":
        """First ``count`` blocks of an ordering (the set J_count)."""
        return cls(tuple(order[:count]), (dim,) * len(order))

    @property
    def total_dim(self) -> int:
        """Dimension of the whole partition."""
        return sum(self.block_dims)

    @property
    def dim(self) -> int:
        """Dimension of the selected blocks."""
        return sum(self.block_dims[i] for i in self.indices)

    def offsets(self) -> np.ndarray:
        """Start offset of every block in the partition."""
        return np.concatenate(([0], np.cumsum(self.block_dims)[:-1])).astype(int)

    def flat(self) -> np.ndarray:
        """Element indices of the selected blocks, in selection order."""
        offsets = self.offsets()
        if not self.indices:
            return np.zeros(0, dtype=int)
        return np.concatenate([
            np.arange(offsets[i], offsets[i] + self.block_dims[i]) for i in self.indices
        ])


def block_submatrix(m: npt.ArrayLike, rows: BlockIndexSet, cols: BlockIndexSet) -> ComplexMatrix:
    """Extract the indicated blocks preserving selection order.

    Args:
        m: Block-partitioned matrix
        rows: Block rows to keep
        cols: Block columns to keep

    Returns:
        Sub-matrix of shape (rows.dim, cols.dim)
    """
    arr = as_complex_matrix(m)
    if arr.shape != (rows.total_dim, cols.total_dim):
        raise DimensionMismatch(
            f"matrix shape {arr.shape} does not match partition "
            f"({rows.total_dim}, {cols.total_dim})")
    return arr[np.ix_(rows.flat(), cols.flat())]


def schur_conditional_cov(q: npt.ArrayLike, target: BlockIndexSet,
                          given: BlockIndexSet) -> HermitianPsd:
    """Conditional covariance of the target blocks given the conditioning blocks.

    Returns Q_tt - Q_tg Q_gg^{-1} Q_gt. An empty conditioning set returns Q_tt.

    Args:
        q: PSD covariance over the whole partition
        target: Blocks whose conditional covariance is wanted
        given: Conditioning blocks; their sub-block must be strictly PD

    Returns:
        Hermitian PSD Schur complement
    """
    cov = hermitian_psd(q)
    q_tt = block_submatrix(cov, target, target)
    if not given.indices:
        return q_tt
    q_gg = block_submatrix(cov, given, given)
    require_pd(q_gg, SingularConditioningBlock, "conditioning block")
    q_tg = block_submatrix(cov, target, given)
    factor = scipy.linalg.cho_factor(q_gg, lower=True)
    correction = q_tg @ scipy.linalg.cho_solve(factor, q_tg.conj().T)
    return symmetrize(q_tt - correction)
