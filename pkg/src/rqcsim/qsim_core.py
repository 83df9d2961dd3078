"""Dense finite-dimensional quantum mechanics for a handful of qubits.

Conventions
-----------
* Qubit 0 is the least significant bit of a computational-basis index, so
  ``|q_{n-1} ... q_1 q_0>`` has index ``sum(q_i << i)``.
* ``trace_distance`` is the trace norm of the difference (sum of absolute
  eigenvalues), so orthogonal pure states are at distance 2.
* Everything is dense.  Density operators are capped at ``MAX_QUBITS``;
  state vectors may go a few qubits further (``MAX_VECTOR_QUBITS``).
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass
from math import comb

import numpy as np

from .errors import CapacityError, DomainError, ImpossibleOutcomeError

MAX_QUBITS = 12
MAX_VECTOR_QUBITS = 16

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = -1e-10
IDEMPOTENT_TOL = 1e-10
IMPOSSIBLE_TOL = 1e-14

SINGLET = np.array([0.0, 1.0, -1.0, 0.0], dtype=complex) / np.sqrt(2.0)
SINGLET_PROJECTOR_2Q = np.outer(SINGLET, SINGLET.conj())
TRIPLET_PROJECTOR_2Q = np.eye(4, dtype=complex) - SINGLET_PROJECTOR_2Q


class Outcome(enum.Enum):
    SINGLET = "singlet"
    TRIPLET = "triplet"


@dataclass(frozen=True)
class MeasurementOutcome:
    tag: Outcome
    probability: float


@dataclass(frozen=True, eq=False)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n_qubits,):
            raise DomainError(f"expected {2**self.n_qubits} amplitudes, got shape {amps.shape}")
        norm2 = float(np.vdot(amps, amps).real)
        if abs(norm2 - 1.0) > NORM_TOL:
            raise DomainError(f"state vector not normalised: |psi|^2 = {norm2!r}")
        object.__setattr__(self, "amplitudes", amps)

    def density(self) -> "DensityOperator":
        return DensityOperator(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))

    def tensor(self, other: "StateVector") -> "StateVector":
        # other occupies the low-order qubits
        return StateVector(self.n_qubits + other.n_qubits, np.kron(self.amplitudes, other.amplitudes))

    def power(self, n: int) -> "StateVector":
        if n < 1:
            raise DomainError("tensor power needs n >= 1")
        if n * self.n_qubits > MAX_VECTOR_QUBITS:
            raise CapacityError(f"{n * self.n_qubits} qubits exceeds MAX_VECTOR_QUBITS={MAX_VECTOR_QUBITS}")
        amps = self.amplitudes
        for _ in range(n - 1):
            amps = np.kron(amps, self.amplitudes)
        return StateVector(n * self.n_qubits, amps)


@dataclass(frozen=True, eq=False)
class DensityOperator:
    """Hermitian, unit-trace matrix on ``n_qubits`` qubits.

    Hermiticity and trace are checked on construction.  Positivity needs an
    eigendecomposition and is checked by :meth:`validate`.
    """

    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        if not 0 <= self.n_qubits <= MAX_QUBITS:
            raise CapacityError(f"{self.n_qubits} qubits exceeds MAX_QUBITS={MAX_QUBITS}")
        mat = np.asarray(self.matrix, dtype=complex)
        dim = 2**self.n_qubits
        if mat.shape != (dim, dim):
            raise DomainError(f"expected {dim}x{dim} matrix, got {mat.shape}")
        herm_err = float(np.max(np.abs(mat - mat.conj().T))) if dim else 0.0
        if herm_err > HERMITIAN_TOL:
            raise DomainError(f"matrix not Hermitian (max deviation {herm_err:.3e})")
        tr = complex(np.trace(mat))
        if abs(tr - 1.0) > TRACE_TOL:
            raise DomainError(f"trace {tr!r} is not 1")
        object.__setattr__(self, "matrix", mat)

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)

    def validate(self) -> None:
        """Raise ``DomainError`` unless every invariant holds, positivity included."""
        lowest = float(self.eigenvalues()[0])
        if lowest < PSD_TOL:
            raise DomainError(f"negative eigenvalue {lowest:.3e}")

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def tensor(self, other: "DensityOperator") -> "DensityOperator":
        return DensityOperator(self.n_qubits + other.n_qubits, np.kron(self.matrix, other.matrix))


@dataclass(frozen=True, eq=False)
class Projector:
    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=complex)
        if float(np.max(np.abs(mat - mat.conj().T))) > HERMITIAN_TOL:
            raise DomainError("projector not Hermitian")
        if float(np.max(np.abs(mat @ mat - mat))) > IDEMPOTENT_TOL:
            raise DomainError("projector not idempotent")
        object.__setattr__(self, "matrix", mat)

    @property
    def rank(self) -> int:
        return int(round(float(np.trace(self.matrix).real)))

    def complement(self) -> "Projector":
        return Projector(self.n_qubits, np.eye(2**self.n_qubits, dtype=complex) - self.matrix)


def _check_pair(pair, n_qubits):
    i, j = (int(x) for x in pair)
    if i == j:
        raise DomainError(f"pair indices must differ, got {pair}")
    if not (0 <= i < n_qubits and 0 <= j < n_qubits):
        raise DomainError(f"pair {pair} out of range for {n_qubits} qubits")
    return i, j


def _check_cap(n, cap=MAX_QUBITS):
    if n < 1:
        raise DomainError(f"need at least one qubit, got {n}")
    if n > cap:
        raise CapacityError(f"{n} qubits exceeds cap {cap}")


def pure_qubit(theta: float) -> StateVector:
    """``cos(theta/2)|0> + sin(theta/2)|1>``, a Bloch vector in the XZ right half-plane."""
    if not 0.0 <= theta <= np.pi:
        raise DomainError(f"theta={theta!r} outside [0, pi]")
    return StateVector(1, np.array([np.cos(theta / 2), np.sin(theta / 2)], dtype=complex))


def basis_state(bits: str) -> StateVector:
    """Computational basis state written most significant qubit first, e.g. ``"01"``."""
    n = len(bits)
    amps = np.zeros(2**n, dtype=complex)
    amps[int(bits, 2)] = 1.0
    return StateVector(n, amps)


def maximally_mixed(n_qubits: int = 1) -> DensityOperator:
    dim = 2**n_qubits
    return DensityOperator(n_qubits, np.eye(dim, dtype=complex) / dim)


def embed_two_qubit(op4: np.ndarray, pair, n_qubits: int) -> np.ndarray:
    """Full ``2^n x 2^n`` matrix acting as ``op4`` on ``pair`` and identity elsewhere.

    ``op4`` is written in the basis ``|q_pair[0] q_pair[1]>`` with ``pair[0]``
    as the high-order bit.
    """
    i, j = _check_pair(pair, n_qubits)
    dim = 2**n_qubits
    idx = np.arange(dim)
    bi = (idx >> i) & 1
    bj = (idx >> j) & 1
    rest = idx & ~((1 << i) | (1 << j))
    local = 2 * bi + bj
    full = np.zeros((dim, dim), dtype=complex)
    same_rest = rest[:, None] == rest[None, :]
    full[same_rest] = np.asarray(op4)[local[:, None], local[None, :]][same_rest]
    return full


def singlet_projector(pair, n_qubits: int) -> Projector:
    _check_cap(n_qubits)
    if n_qubits < 2:
        raise DomainError("a pair needs at least two qubits")
    return Projector(n_qubits, embed_two_qubit(SINGLET_PROJECTOR_2Q, pair, n_qubits))


def triplet_projector(pair, n_qubits: int) -> Projector:
    return singlet_projector(pair, n_qubits).complement()


def swap_operator(pair, n_qubits: int) -> np.ndarray:
    swap4 = np.eye(4, dtype=complex)[[0, 2, 1, 3]]
    return embed_two_qubit(swap4, pair, n_qubits)


def _apply_local(op4, tensor, pair, n_qubits, offset=0):
    """Contract ``op4`` into the pair's axes of ``tensor`` (axes laid out MSB first)."""
    i, j = pair
    ax_i = offset + n_qubits - 1 - i
    ax_j = offset + n_qubits - 1 - j
    op = np.asarray(op4).reshape(2, 2, 2, 2)
    out = np.tensordot(op, tensor, axes=([2, 3], [ax_i, ax_j]))
    return np.moveaxis(out, [0, 1], [ax_i, ax_j])


def apply_pair_operator(op4, state: np.ndarray, pair, n_qubits: int) -> np.ndarray:
    """``op4`` on ``pair`` applied to a vector (returns a vector)."""
    pair = _check_pair(pair, n_qubits)
    t = np.asarray(state, dtype=complex).reshape((2,) * n_qubits)
    return _apply_local(op4, t, pair, n_qubits).reshape(-1)


def conjugate_pair_operator(op4, rho: np.ndarray, pair, n_qubits: int) -> np.ndarray:
    """``O rho O^dagger`` for ``O = op4`` on ``pair``, without building the full matrix."""
    pair = _check_pair(pair, n_qubits)
    t = np.asarray(rho, dtype=complex).reshape((2,) * (2 * n_qubits))
    t = _apply_local(op4, t, pair, n_qubits)
    t = _apply_local(np.conj(op4), t, pair, n_qubits, offset=n_qubits)
    dim = 2**n_qubits
    return t.reshape(dim, dim)


def measure_st(state: DensityOperator, pair, forced: Outcome | None = None, rng=None):
    """Non-destructive singlet/triplet measurement on ``pair``.

    Returns ``(MeasurementOutcome, post_state)``.  With ``forced`` set the
    given outcome is taken and its Born probability reported; otherwise the
    outcome is drawn from ``rng``.
    """
    n = state.n_qubits
    pair = _check_pair(pair, n)
    rho = state.matrix
    singlet_part = conjugate_pair_operator(SINGLET_PROJECTOR_2Q, rho, pair, n)
    triplet_part = conjugate_pair_operator(TRIPLET_PROJECTOR_2Q, rho, pair, n)
    p_singlet = float(np.trace(singlet_part).real)
    p_triplet = float(np.trace(triplet_part).real)

    if forced is None:
        if rng is None:
            raise DomainError("an rng is required when the outcome is not forced")
        tag = Outcome.SINGLET if rng.random() < p_singlet else Outcome.TRIPLET
    else:
        tag = Outcome(forced)

    prob, post = (p_singlet, singlet_part) if tag is Outcome.SINGLET else (p_triplet, triplet_part)
    if prob < IMPOSSIBLE_TOL:
        raise ImpossibleOutcomeError(f"{tag.value} outcome on {pair} has probability {prob:.3e}")
    post = post / prob
    post = 0.5 * (post + post.conj().T)
    return MeasurementOutcome(tag, prob), DensityOperator(n, post)


def dicke_vectors(n: int) -> np.ndarray:
    """Columns are the ``n+1`` Dicke states ``|D_k>`` (Hamming weight ``k``)."""
    _check_cap(n, MAX_VECTOR_QUBITS)
    idx = np.arange(2**n)
    weights = np.zeros(2**n, dtype=np.int64)
    for bit in range(n):
        weights += (idx >> bit) & 1
    basis = np.zeros((2**n, n + 1))
    for k in range(n + 1):
        basis[weights == k, k] = 1.0 / np.sqrt(comb(n, k))
    return basis


def symmetric_projector(n: int) -> Projector:
    """Projector onto the ``(n+1)``-dimensional symmetric subspace of ``n`` qubits."""
    _check_cap(n)
    d = dicke_vectors(n)
    return Projector(n, (d @ d.T).astype(complex))


def rho_sym(n: int) -> DensityOperator:
    """Maximally mixed state on the symmetric subspace of ``n`` qubits."""
    proj = symmetric_projector(n)
    return DensityOperator(n, proj.matrix / (n + 1))


def partial_trace_discard(state: DensityOperator, qubits) -> DensityOperator:
    """Trace out ``qubits``; the survivors keep their relative order."""
    n = state.n_qubits
    drop = sorted({int(q) for q in qubits})
    if any(q < 0 or q >= n for q in drop):
        raise DomainError(f"qubit indices {drop} out of range for {n} qubits")
    if len(drop) == n:
        raise DomainError("cannot discard every qubit")
    if not drop:
        return state
    keep = [q for q in range(n) if q not in drop]
    t = state.matrix.reshape((2,) * (2 * n))
    # axis for qubit q is n-1-q (ket) and 2n-1-q (bra)
    letters = itertools.islice(
        (chr(c) for c in itertools.chain(range(ord("a"), ord("z") + 1), range(ord("A"), ord("Z") + 1))),
        2 * n,
    )
    letters = list(letters)
    ket = letters[:n]
    bra = letters[n:]
    for q in drop:
        bra[n - 1 - q] = ket[n - 1 - q]
    out = [ket[n - 1 - q] for q in reversed(keep)] + [bra[n - 1 - q] for q in reversed(keep)]
    reduced = np.einsum("".join(ket + bra) + "->" + "".join(out), t)
    dim = 2 ** len(keep)
    red = reduced.reshape(dim, dim)
    return DensityOperator(len(keep), 0.5 * (red + red.conj().T))


def reduce_vector(vec: np.ndarray, n_qubits: int, keep) -> np.ndarray:
    """Unnormalised reduced density matrix of a pure vector on the ``keep`` qubits.

    Survivors keep their relative order (lowest index stays least significant).
    """
    keep = sorted(int(q) for q in keep)
    drop = [q for q in range(n_qubits) if q not in keep]
    t = np.asarray(vec).reshape((2,) * n_qubits)
    keep_axes = [n_qubits - 1 - q for q in reversed(keep)]
    drop_axes = [n_qubits - 1 - q for q in drop]
    m = np.transpose(t, keep_axes + drop_axes).reshape(2 ** len(keep), -1)
    return m @ m.conj().T


def trace_distance(a: DensityOperator, b: DensityOperator) -> float:
    """Trace norm of ``a - b``; 2 for orthogonal pure states."""
    if a.matrix.shape != b.matrix.shape:
        raise DomainError(f"dimension mismatch {a.matrix.shape} vs {b.matrix.shape}")
    return float(np.sum(np.abs(np.linalg.eigvalsh(a.matrix - b.matrix))))


def trace_distance_matrices(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(np.abs(np.linalg.eigvalsh(np.asarray(a) - np.asarray(b)))))
