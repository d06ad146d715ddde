"""Fixed block decomposition x = (x_1, ..., x_b) of R^d and index arithmetic."""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class BlockStructure:
    """Contiguous block layout over a fixed global coordinate ordering.

    block_sizes[i] is the width d_i of block i, offsets[i] its first global
    coordinate, total_dim the ambient dimension d. Block indices are 0-based
    internally; user-facing reports add 1.
    """

    block_sizes: np.ndarray
    offsets: np.ndarray
    total_dim: int

    @property
    def num_blocks(self) -> int:
        return len(self.block_sizes)

    def slice_of(self, i: int) -> slice:
        self._check_index(i)
        start = int(self.offsets[i])
        return slice(start, start + int(self.block_sizes[i]))

    def coords(self, i: int) -> np.ndarray:
        s = self.slice_of(i)
        return np.arange(s.start, s.stop)

    def scalar_blocks(self) -> bool:
        return bool(np.all(self.block_sizes == 1))

    def _check_index(self, i: int) -> None:
        if not 0 <= i < self.num_blocks:
            raise IndexError(f"block index {i} out of range [0, {self.num_blocks})")

    def __eq__(self, other) -> bool:
        if not isinstance(other, BlockStructure):
            return NotImplemented
        return self.total_dim == other.total_dim and np.array_equal(
            self.block_sizes, other.block_sizes
        )

    def __repr__(self) -> str:
        return f"BlockStructure(b={self.num_blocks}, d={self.total_dim})"


def make_blocks(block_sizes) -> BlockStructure:
    """Build a BlockStructure from an array of positive block widths."""
    sizes = np.asarray(block_sizes, dtype=int)
    if sizes.ndim != 1 or sizes.size == 0:
        raise ValueError("block_sizes must be a nonempty 1-d array")
    if np.any(sizes < 1):
        raise ValueError("every block size must be >= 1")
    offsets = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    sizes.setflags(write=False)
    offsets.setflags(write=False)
    return BlockStructure(sizes, offsets, int(sizes.sum()))


def unit_blocks(d: int) -> BlockStructure:
    """d scalar blocks: one coordinate per block."""
    return make_blocks(np.ones(d, dtype=int))


def slice_block(v: np.ndarray, blocks: BlockStructure, i: int) -> np.ndarray:
    """Contiguous subvector of v for block i; also slices the last axis of a batch."""
    v = np.asarray(v)
    if v.shape[-1] != blocks.total_dim:
        raise ValueError(
            f"vector of length {v.shape[-1]} does not match total_dim {blocks.total_dim}"
        )
    return v[..., blocks.slice_of(i)]


def embed_block(v_i: np.ndarray, blocks: BlockStructure, i: int) -> np.ndarray:
    """Place a block-i vector into a zero d-vector at the block offset."""
    v_i = np.asarray(v_i, dtype=float)
    s = blocks.slice_of(i)
    if v_i.shape[-1] != s.stop - s.start:
        raise ValueError(f"expected length {s.stop - s.start} for block {i}")
    out = np.zeros(v_i.shape[:-1] + (blocks.total_dim,))
    out[..., s] = v_i
    return out
