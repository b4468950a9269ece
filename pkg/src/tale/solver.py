"""Gram assembly and the closed-form ridge solve.

The item-to-item weight matrix solves (G + lambda*I) B = C with
G = S~^T S~ and C = S~^T T~, via a symmetric positive-definite
factorization (never an explicit inverse).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from .augment import SparseMatrix

# Full residual verification up to this catalog size; above it a
# deterministic sample of columns is checked so peak memory stays at three
# n x n buffers (matrix, factor, solution).
FULL_RESIDUAL_MAX_N = 4096
RESIDUAL_SAMPLE_COLS = 256
RESIDUAL_TOL = 1e-6


class SolverError(RuntimeError):
    pass


@dataclass
class GramSystem:
    """Dense normal-equation system: gram = S~^T S~ (symmetrized), cross =
    S~^T T~, plus the ridge strength."""

    gram: np.ndarray
    cross: np.ndarray
    lam: float

    @property
    def num_items(self) -> int:
        return self.gram.shape[0]


@dataclass
class Model:
    """Trained item-to-item weight matrix with its vocabulary and the
    configuration snapshot it was trained under."""

    matrix: np.ndarray
    item_vocab: list[str]
    config: dict = field(default_factory=dict)

    @property
    def num_items(self) -> int:
        return self.matrix.shape[0]


def gram_memory_bytes(num_items: int) -> int:
    """Peak training allocation estimate: three dense n x n f64 buffers."""
    return 3 * num_items * num_items * 8


def assemble_gram(
    sources: SparseMatrix, targets: SparseMatrix, lam: float
) -> GramSystem:
    """Sparse-sparse products accumulated in double precision; the Gram part
    is explicitly symmetrized to wash out accumulation asymmetry."""
    if sources.num_rows != targets.num_rows or sources.num_cols != targets.num_cols:
        raise ValueError(
            f"shape mismatch: sources {sources.num_rows}x{sources.num_cols}, "
            f"targets {targets.num_rows}x{targets.num_cols}"
        )
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    n = sources.num_cols
    if sources.nnz == 0:
        return GramSystem(np.zeros((n, n)), np.zeros((n, n)), lam)
    s_csc = sources.tocsr().tocsc()
    gram = (s_csc.T @ s_csc).toarray()
    gram += gram.T.copy()
    gram *= 0.5
    # Fortran order lets the SPD solve overwrite this buffer with the
    # solution instead of allocating a fourth n x n matrix.
    cross = (s_csc.T @ targets.tocsr()).toarray(order="F")
    return GramSystem(gram, cross, lam)


def solve_ridge(system: GramSystem, item_vocab=None, config=None) -> Model:
    """Solve (G + lambda*I) B = C through a Cholesky factorization.

    Consumes the system's buffers (the ridge diagonal is added to ``gram``
    in place and ``cross`` is overwritten by the solution) so that peak
    memory stays at three dense matrices. The solution is verified against
    the residual tolerance; with lambda = 0 a semi-definite Gram fails
    factorization and reports that a positive lambda is required.
    """
    n = system.num_items
    if system.cross.shape != (n, n):
        raise ValueError("cross matrix shape mismatch")
    a = system.gram
    if system.lam > 0:
        a[np.diag_indices(n)] += system.lam
    if n == 0:
        return Model(np.zeros((0, 0)), list(item_vocab or []), dict(config or {}))

    cross_max = float(np.abs(system.cross).max()) if system.cross.size else 0.0
    if n <= FULL_RESIDUAL_MAX_N:
        check_cols = np.arange(n)
    else:
        check_cols = np.unique(
            np.linspace(0, n - 1, RESIDUAL_SAMPLE_COLS).astype(np.int64)
        )
    saved_cols = system.cross[:, check_cols].copy()

    try:
        factor = scipy.linalg.cho_factor(a, lower=False, overwrite_a=False)
    except np.linalg.LinAlgError as exc:
        raise SolverError(
            "Gram factorization failed (matrix not positive definite); "
            "use lambda > 0"
        ) from exc
    solution = scipy.linalg.cho_solve(factor, system.cross, overwrite_b=True)
    del factor

    residual = float(np.abs(a @ solution[:, check_cols] - saved_cols).max())
    rel = residual / (1.0 + cross_max)
    if rel > RESIDUAL_TOL:
        raise SolverError(
            f"solve residual {rel:.3e} exceeds tolerance {RESIDUAL_TOL:.1e}"
        )
    vocab = list(item_vocab) if item_vocab is not None else [str(j) for j in range(n)]
    if len(vocab) != n:
        raise ValueError("item vocabulary size does not match matrix dimension")
    return Model(matrix=solution, item_vocab=vocab, config=dict(config or {}))


def mix_models(a: Model, b: Model, alpha: float) -> Model:
    """Entrywise alpha*A + (1-alpha)*B over identical vocabularies."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must be in [0, 1]")
    if a.item_vocab != b.item_vocab:
        raise ValueError("cannot mix models with different item vocabularies")
    mixed = alpha * a.matrix + (1.0 - alpha) * b.matrix
    config = {"mix_alpha": alpha, "component_a": a.config, "component_b": b.config}
    return Model(matrix=mixed, item_vocab=list(a.item_vocab), config=config)
