"""Exact linear algebra over prime fields F_p.

Matrices are small (desk-scale networks), so everything is plain numpy int64
with a reduction mod p after each operation. p < 2**16 keeps every product
below 2**32 and row sums far from overflow.
"""

from __future__ import annotations

import numpy as np

from .errors import ShapeError

MAX_PRIME = 1 << 16

#: Identifier of the random generator used everywhere in the package. It is
#: written into every report so results can be matched to the generator.
RNG_ID = "numpy-philox4x64-10+seedsequence"


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n < 4:
        return True
    if n % 2 == 0:
        return False
    k = 3
    while k * k <= n:
        if n % k == 0:
            return False
        k += 2
    return True


def inverse_mod(a: int, p: int) -> int:
    """Multiplicative inverse of ``a`` mod ``p`` by the extended Euclidean algorithm."""
    a %= p
    if a == 0:
        raise ZeroDivisionError(f"0 has no inverse mod {p}")
    r0, r1, s0, s1 = p, a, 0, 1
    while r1:
        q = r0 // r1
        r0, r1 = r1, r0 - q * r1
        s0, s1 = s1, s0 - q * s1
    return s0 % p


def make_rng(seed, *stream) -> np.random.Generator:
    """Counter-based generator for ``(seed, *stream)``.

    Distinct stream tuples give statistically independent generators, which is
    how per-trial and per-node randomness is derived from one master seed.
    """
    if isinstance(seed, np.random.Generator):
        if stream:
            raise TypeError("stream keys require an integer seed")
        return seed
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF, *(int(s) for s in stream)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(words)))


class FieldMatrix:
    """Immutable matrix over F_p.

    >>> a = FieldMatrix(5, [[1, 2], [2, 4]])
    >>> rank(a)
    1
    """

    __slots__ = ("prime", "_data")

    def __init__(self, prime: int, entries, shape: tuple[int, int] | None = None):
        prime = int(prime)
        if not 2 <= prime < MAX_PRIME or not is_prime(prime):
            raise ValueError(f"modulus must be a prime below {MAX_PRIME}, got {prime}")
        data = np.array(entries, dtype=np.int64)
        if shape is not None:
            data = data.reshape(shape)
        elif data.ndim == 1 and data.size == 0:
            data = data.reshape(0, 0)
        if data.ndim != 2:
            raise ShapeError(f"expected a 2-d array of entries, got ndim={data.ndim}")
        if data.size and (data.min() < 0 or data.max() >= prime):
            raise ValueError(f"entry out of field range [0, {prime})")
        data.setflags(write=False)
        self.prime = prime
        self._data = data

    @classmethod
    def _wrap(cls, prime: int, data: np.ndarray) -> "FieldMatrix":
        out = object.__new__(cls)
        data = np.ascontiguousarray(data, dtype=np.int64)
        data.setflags(write=False)
        out.prime = prime
        out._data = data
        return out

    @classmethod
    def zeros(cls, prime: int, rows: int, cols: int) -> "FieldMatrix":
        return cls(prime, np.zeros((rows, cols), dtype=np.int64))

    @classmethod
    def identity(cls, prime: int, n: int) -> "FieldMatrix":
        return cls(prime, np.eye(n, dtype=np.int64))

    @property
    def rows(self) -> int:
        return self._data.shape[0]

    @property
    def cols(self) -> int:
        return self._data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    @property
    def array(self) -> np.ndarray:
        """Read-only view of the entries."""
        return self._data

    def entries(self) -> list[int]:
        """Row-major entry list."""
        return [int(v) for v in self._data.ravel()]

    def tolist(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self._data]

    def is_zero(self) -> bool:
        return not self._data.any()

    def __eq__(self, other):
        if not isinstance(other, FieldMatrix):
            return NotImplemented
        return (self.prime == other.prime and self.shape == other.shape
                and bool(np.array_equal(self._data, other._data)))

    def __hash__(self):
        return hash((self.prime, self.shape, self._data.tobytes()))

    def __repr__(self):
        return f"FieldMatrix(p={self.prime}, {self.tolist()})"

    def __add__(self, other):
        return add(self, other)

    def __matmul__(self, other):
        return multiply(self, other)


def _check_prime(a: FieldMatrix, b: FieldMatrix):
    if a.prime != b.prime:
        raise ShapeError(f"field mismatch: F_{a.prime} vs F_{b.prime}")


def add(a: FieldMatrix, b: FieldMatrix) -> FieldMatrix:
    _check_prime(a, b)
    if a.shape != b.shape:
        raise ShapeError(f"cannot add {a.shape} and {b.shape}")
    return FieldMatrix._wrap(a.prime, (a.array + b.array) % a.prime)


def multiply(a: FieldMatrix, b: FieldMatrix) -> FieldMatrix:
    _check_prime(a, b)
    if a.cols != b.rows:
        raise ShapeError(f"cannot multiply {a.shape} by {b.shape}")
    return FieldMatrix._wrap(a.prime, (a.array @ b.array) % a.prime)


def row_reduce(a: FieldMatrix) -> tuple[np.ndarray, list[int]]:
    """Reduced row echelon form and pivot columns.

    Pivot choice is deterministic: the lowest-index row with a nonzero entry
    in the current column.
    """
    p = a.prime
    m = np.array(a.array, dtype=np.int64)
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        nz = np.flatnonzero(m[r:, c])
        if nz.size == 0:
            continue
        piv = r + int(nz[0])
        if piv != r:
            m[[r, piv]] = m[[piv, r]]
        m[r] = m[r] * inverse_mod(int(m[r, c]), p) % p
        factors = m[:, c].copy()
        factors[r] = 0
        if factors.any():
            m = (m - np.outer(factors, m[r])) % p
        pivots.append(c)
        r += 1
    return m, pivots


def rank(a: FieldMatrix) -> int:
    if a.rows == 0 or a.cols == 0:
        return 0
    return len(row_reduce(a)[1])


def block(blocks, prime: int) -> FieldMatrix:
    """Assemble a block matrix from a 2-d list of FieldMatrix (or None for zeros).

    Every block row must have a consistent height and every block column a
    consistent width; ``None`` entries take their shape from their neighbours.
    """
    if not blocks or not blocks[0]:
        return FieldMatrix.zeros(prime, 0, 0)
    nr, nc = len(blocks), len(blocks[0])
    heights = [None] * nr
    widths = [None] * nc
    for i, row in enumerate(blocks):
        if len(row) != nc:
            raise ShapeError("ragged block layout")
        for j, b in enumerate(row):
            if b is None:
                continue
            if b.prime != prime:
                raise ShapeError(f"field mismatch: F_{b.prime} vs F_{prime}")
            if heights[i] not in (None, b.rows) or widths[j] not in (None, b.cols):
                raise ShapeError(f"block ({i}, {j}) has inconsistent shape {b.shape}")
            heights[i], widths[j] = b.rows, b.cols
    if None in heights or None in widths:
        raise ShapeError("every block row and column needs at least one explicit block")
    out = np.zeros((sum(heights), sum(widths)), dtype=np.int64)
    r0 = 0
    for i, row in enumerate(blocks):
        c0 = 0
        for j, b in enumerate(row):
            if b is not None:
                out[r0:r0 + heights[i], c0:c0 + widths[j]] = b.array
            c0 += widths[j]
        r0 += heights[i]
    return FieldMatrix._wrap(prime, out)


def sample_uniform(prime: int, rows: int, cols: int, seed) -> FieldMatrix:
    """Matrix with i.i.d. uniform entries, fully determined by its arguments.

    ``seed`` is a 64-bit integer or an existing ``numpy.random.Generator``.
    """
    if not is_prime(prime):
        raise ValueError(f"{prime} is not prime")
    rng = make_rng(seed)
    return FieldMatrix._wrap(prime, rng.integers(0, prime, size=(rows, cols), dtype=np.int64))


def apply_blockwise(g: FieldMatrix, signal) -> np.ndarray:
    """Apply ``g`` to each of the T column vectors of a symbol block.

    ``signal`` has shape ``(..., T, g.cols)``; the result has shape
    ``(..., T, g.rows)``. This is the action of ``kron(I_T, g)`` on the stacked
    vector without building the Kronecker product.
    """
    s = np.asarray(signal, dtype=np.int64)
    if s.ndim < 2 or s.shape[-1] != g.cols:
        raise ShapeError(f"signal vectors of length {s.shape[-1] if s.ndim else 0} "
                         f"do not match matrix with {g.cols} columns")
    flat = s.reshape(-1, g.cols)
    return mulmod(flat, g.array.T, g.prime).reshape(s.shape[:-1] + (g.rows,))


def mulmod(a: np.ndarray, b: np.ndarray, prime: int) -> np.ndarray:
    """``a @ b mod prime`` for 2-d integer arrays with entries in ``[0, prime)``.

    Uses a float64 BLAS product when every partial sum stays below 2**53, which
    makes it exact; falls back to integer arithmetic otherwise.
    """
    if a.shape[1] * (prime - 1) ** 2 < (1 << 53):
        out = a.astype(np.float64) @ b.astype(np.float64)
        return out.astype(np.int64) % prime
    return (a.astype(np.int64) @ b.astype(np.int64)) % prime
