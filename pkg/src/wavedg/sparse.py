"""Compressed-row sparse matrices, block assembly and direct solves."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolveError(RuntimeError):
    """Raised when a linear solve fails or misses its residual contract."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(f"{message} (residual={residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class SparseMatrix:
    """Canonical CSR matrix: sorted, duplicate-free column indices per row."""

    n_rows: int
    n_cols: int
    row_offsets: np.ndarray
    col_indices: np.ndarray
    values: np.ndarray
    symmetric: bool = False
    _csr: sp.csr_matrix = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        offs = np.asarray(self.row_offsets, dtype=np.int64)
        cols = np.asarray(self.col_indices, dtype=np.int64)
        vals = np.asarray(self.values, dtype=float)
        if offs.shape != (self.n_rows + 1,) or offs[0] != 0 or np.any(np.diff(offs) < 0):
            raise ValueError("row_offsets must be nondecreasing, length n_rows+1, start at 0")
        if offs[-1] != len(cols) or len(cols) != len(vals):
            raise ValueError("row_offsets, col_indices and values disagree in length")
        if len(cols) and (cols.min() < 0 or cols.max() >= self.n_cols):
            raise ValueError("column index out of range")
        for i in range(self.n_rows):
            if np.any(np.diff(cols[offs[i]:offs[i + 1]]) <= 0):
                raise ValueError(f"row {i} is not in canonical (strictly increasing) form")
        for name, arr in (("row_offsets", offs), ("col_indices", cols), ("values", vals)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        csr = sp.csr_matrix((vals, cols, offs), shape=(self.n_rows, self.n_cols))
        object.__setattr__(self, "_csr", csr)
        if self.symmetric:
            if self.n_rows != self.n_cols:
                raise ValueError("a symmetric matrix must be square")
            scale = np.abs(vals).max() if len(vals) else 0.0
            if len(vals) and abs(csr - csr.T).max() > 1e-14 * scale:
                raise ValueError("matrix flagged symmetric is not symmetric")

    @classmethod
    def from_coo(cls, n_rows, n_cols, rows, cols, vals, symmetric=False) -> "SparseMatrix":
        """Build from triplets; duplicates are summed, columns sorted."""
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if len(rows):
            new = np.ones(len(rows), dtype=bool)
            new[1:] = (rows[1:] != rows[:-1]) | (cols[1:] != cols[:-1])
            starts = np.flatnonzero(new)
            # sequential sums in sorted order keep assembly reproducible
            merged = np.add.reduceat(vals, starts)
            rows, cols, vals = rows[starts], cols[starts], merged
        offsets = np.zeros(n_rows + 1, dtype=np.int64)
        np.add.at(offsets, rows + 1, 1)
        return cls(n_rows, n_cols, np.cumsum(offsets), cols, vals, symmetric=symmetric)

    @classmethod
    def from_dense(cls, a, symmetric=False) -> "SparseMatrix":
        a = np.asarray(a, dtype=float)
        rows, cols = np.nonzero(a)
        return cls.from_coo(a.shape[0], a.shape[1], rows, cols, a[rows, cols], symmetric)

    @classmethod
    def identity(cls, n: int) -> "SparseMatrix":
        idx = np.arange(n)
        return cls.from_coo(n, n, idx, idx, np.ones(n), symmetric=True)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    def to_dense(self) -> np.ndarray:
        return self._csr.toarray()

    def to_scipy(self) -> sp.csr_matrix:
        return self._csr

    def frobenius_norm(self) -> float:
        return float(np.sqrt(np.dot(self.values, self.values)))

    def scaled(self, factor: float) -> "SparseMatrix":
        return SparseMatrix(self.n_rows, self.n_cols, self.row_offsets, self.col_indices,
                            factor * self.values, symmetric=self.symmetric)


def matvec(m: SparseMatrix, x) -> np.ndarray:
    """Row-by-row product; entries of each row are summed left to right."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.n_cols,):
        raise ValueError(f"matvec: expected vector of length {m.n_cols}, got shape {x.shape}")
    out = np.zeros(m.n_rows)
    if len(m.values) == 0:
        return out
    prod = m.values * x[m.col_indices]
    nonempty = np.flatnonzero(np.diff(m.row_offsets))
    out[nonempty] = np.add.reduceat(prod, m.row_offsets[nonempty])
    return out


def quadratic_form(m: SparseMatrix, x, y) -> float:
    """Return x^T m y."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.n_rows,):
        raise ValueError(f"quadratic_form: expected x of length {m.n_rows}, got shape {x.shape}")
    return float(np.dot(x, matvec(m, y)))


@dataclass(frozen=True)
class BlockSystem:
    """Grid of scaled references to sparse blocks; None marks a zero block."""

    blocks: tuple

    def __post_init__(self):
        grid = tuple(tuple(row) for row in self.blocks)
        object.__setattr__(self, "blocks", grid)
        if not grid or any(len(row) != len(grid[0]) for row in grid):
            raise ValueError("block grid must be rectangular and nonempty")
        self._row_sizes()
        self._col_sizes()

    @property
    def n_block_rows(self) -> int:
        return len(self.blocks)

    @property
    def n_block_cols(self) -> int:
        return len(self.blocks[0])

    def _row_sizes(self) -> list[int]:
        sizes = []
        for i, row in enumerate(self.blocks):
            found = {b[1].n_rows for b in row if b is not None}
            if len(found) != 1:
                raise ValueError(f"block row {i} has inconsistent or undetermined row count")
            sizes.append(found.pop())
        return sizes

    def _col_sizes(self) -> list[int]:
        sizes = []
        for j in range(self.n_block_cols):
            found = {row[j][1].n_cols for row in self.blocks if row[j] is not None}
            if len(found) != 1:
                raise ValueError(f"block column {j} has inconsistent or undetermined column count")
            sizes.append(found.pop())
        return sizes

    def materialize(self) -> SparseMatrix:
        row_off = np.concatenate([[0], np.cumsum(self._row_sizes())])
        col_off = np.concatenate([[0], np.cumsum(self._col_sizes())])
        rows, cols, vals = [], [], []
        for i, row in enumerate(self.blocks):
            for j, entry in enumerate(row):
                if entry is None:
                    continue
                scale, src = entry
                if scale == 0.0:
                    continue
                r = np.repeat(np.arange(src.n_rows), np.diff(src.row_offsets))
                rows.append(r + row_off[i])
                cols.append(src.col_indices + col_off[j])
                vals.append(scale * src.values)
        cat = (lambda parts, dt: np.concatenate(parts) if parts else np.zeros(0, dtype=dt))
        return SparseMatrix.from_coo(int(row_off[-1]), int(col_off[-1]),
                                     cat(rows, np.int64), cat(cols, np.int64), cat(vals, float))


class Factorization:
    """Sparse LU factorization with the solve residual contract enforced."""

    def __init__(self, m: SparseMatrix, spd_hint: bool = False):
        if isinstance(m, BlockSystem):
            m = m.materialize()
        if m.n_rows != m.n_cols:
            raise ValueError("solve requires a square system")
        self.matrix = m
        self._fro = m.frobenius_norm()
        opts = {"permc_spec": "MMD_AT_PLUS_A", "diag_pivot_thresh": 0.0} if spd_hint else {}
        try:
            self._lu = spla.splu(m.to_scipy().tocsc(), **opts)
        except RuntimeError as exc:
            raise SolveError(f"factorization failed: {exc}") from exc

    def solve(self, b) -> np.ndarray:
        m = self.matrix
        b = np.asarray(b, dtype=float)
        if b.shape != (m.n_rows,):
            raise ValueError(f"solve: expected right side of length {m.n_rows}, got shape {b.shape}")
        x = self._lu.solve(b)
        res = float(np.linalg.norm(matvec(m, x) - b))
        bound = 1e-12 * (np.linalg.norm(b) + self._fro * np.linalg.norm(x))
        if not np.all(np.isfinite(x)) or res > bound:
            raise SolveError("linear solve missed the residual bound", res)
        return x


def solve(m, b, spd_hint: bool = False) -> np.ndarray:
    """Solve m x = b for a SparseMatrix or BlockSystem."""
    return Factorization(m, spd_hint=spd_hint).solve(b)
