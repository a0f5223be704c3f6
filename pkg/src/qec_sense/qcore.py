"""Dense operator, state and channel primitives for few-qubit open systems.

Conventions used throughout the package:

* qubit 1 is the leftmost tensor factor, i.e. the most significant bit of a
  computational basis index;
* density matrices are vectorized by stacking columns (Fortran order), so
  ``vec(A @ X @ B) == kron(B.T, A) @ vec(X)``;
* everything is dense ``numpy`` arrays. At three qubits (dimension 8,
  superoperators 64 x 64) sparsity buys nothing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TOLERANCES",
    "Channel",
    "DensityMatrix",
    "Operator",
    "Superoperator",
    "ToleranceConfig",
    "channel_to_superoperator",
    "dissipator",
    "logical_states",
    "logical_x",
    "pauli_string",
    "unvec",
    "vec",
]


@dataclass(frozen=True)
class ToleranceConfig:
    """Numerical tolerances shared by every validation in the package."""

    construction: float = 1e-12
    psd: float = 1e-10
    trace_conservation: float = 1e-10


TOLERANCES = ToleranceConfig()

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def _as_square_complex(m: object, name: str) -> np.ndarray:
    a = np.array(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {a.shape}")
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Operator:
    """A dense complex matrix on the n-qubit Hilbert space."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        object.__setattr__(self, "matrix", _as_square_complex(self.matrix, "Operator"))

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def dagger(self) -> "Operator":
        return Operator(self.matrix.conj().T)

    def __matmul__(self, other: "Operator") -> "Operator":
        return Operator(self.matrix @ other.matrix)


@dataclass(frozen=True)
class DensityMatrix:
    """A validated density matrix.

    Construction enforces hermiticity and unit trace to
    ``TOLERANCES.construction`` and positive semidefiniteness to
    ``TOLERANCES.psd`` (most negative eigenvalue allowed).
    """

    matrix: np.ndarray

    def __post_init__(self) -> None:
        a = _as_square_complex(self.matrix, "DensityMatrix")
        herm = float(np.max(np.abs(a - a.conj().T)))
        if herm > TOLERANCES.construction:
            raise ValueError(f"not hermitian: max |rho - rho^dag| = {herm:.3e}")
        tr = complex(np.trace(a))
        if abs(tr - 1.0) > TOLERANCES.construction:
            raise ValueError(f"trace is {tr}, expected 1 within {TOLERANCES.construction}")
        smallest = float(np.linalg.eigvalsh(a)[0])
        if smallest < -TOLERANCES.psd:
            raise ValueError(f"not positive semidefinite: lowest eigenvalue {smallest:.3e}")
        object.__setattr__(self, "matrix", a)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_state_vector(cls, psi: object) -> "DensityMatrix":
        v = np.asarray(psi, dtype=complex).reshape(-1)
        norm = float(np.linalg.norm(v))
        if norm == 0.0:
            raise ValueError("cannot build a state from the zero vector")
        v = v / norm
        return cls(np.outer(v, v.conj()))

    def expectation(self, observable: "Operator | np.ndarray") -> complex:
        m = observable.matrix if isinstance(observable, Operator) else np.asarray(observable)
        return complex(np.trace(m @ self.matrix))


@dataclass(frozen=True)
class Channel:
    """A CPTP map given by Kraus operators.

    Completeness (sum of K^dag K equal to the identity) is checked to
    ``TOLERANCES.construction`` at build time.
    """

    kraus: tuple

    def __post_init__(self) -> None:
        ops = tuple(_as_square_complex(k, "Kraus operator") for k in self.kraus)
        if not ops:
            raise ValueError("a channel needs at least one Kraus operator")
        d = ops[0].shape[0]
        if any(k.shape[0] != d for k in ops):
            raise ValueError("Kraus operators differ in dimension")
        total = np.zeros((d, d), dtype=complex)
        for k in ops:
            total += k.conj().T @ k
        dev = float(np.max(np.abs(total - np.eye(d))))
        if dev > TOLERANCES.construction:
            raise ValueError(f"Kraus completeness violated: max |sum K^dag K - I| = {dev:.3e}")
        object.__setattr__(self, "kraus", ops)

    @property
    def dim(self) -> int:
        return self.kraus[0].shape[0]

    def apply(self, rho: np.ndarray) -> np.ndarray:
        rho = np.asarray(rho, dtype=complex)
        out = np.zeros_like(rho)
        for k in self.kraus:
            out += k @ rho @ k.conj().T
        return out


@dataclass(frozen=True)
class Superoperator:
    """A linear map on column-stacked density matrices."""

    matrix: np.ndarray

    def __post_init__(self) -> None:
        a = _as_square_complex(self.matrix, "Superoperator")
        d = math.isqrt(a.shape[0])
        if d * d != a.shape[0]:
            raise ValueError(f"superoperator side {a.shape[0]} is not a perfect square")
        object.__setattr__(self, "matrix", a)

    @property
    def dim(self) -> int:
        return math.isqrt(self.matrix.shape[0])

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho))

    def __matmul__(self, other: "Superoperator") -> "Superoperator":
        return Superoperator(self.matrix @ other.matrix)

    def power(self, exponent: int) -> "Superoperator":
        if exponent < 0:
            raise ValueError("negative channel powers are not defined")
        return Superoperator(np.linalg.matrix_power(self.matrix, exponent))


def vec(rho: np.ndarray) -> np.ndarray:
    """Column-stack a matrix into a vector."""
    return np.asarray(rho, dtype=complex).reshape(-1, order="F")


def unvec(v: np.ndarray) -> np.ndarray:
    """Inverse of :func:`vec`."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    d = math.isqrt(v.size)
    if d * d != v.size:
        raise ValueError(f"vector of length {v.size} is not a stacked square matrix")
    return v.reshape(d, d, order="F")


def pauli_string(n_qubits: int, labels: str) -> Operator:
    """Tensor product of single-qubit Paulis.

    ``labels[0]`` acts on qubit 1, the leftmost tensor factor. Example:
    ``pauli_string(3, "XIZ")`` is X on qubit 1, identity on 2, Z on 3.
    """
    if len(labels) != n_qubits:
        raise ValueError(f"need {n_qubits} labels, got {len(labels)}")
    out = np.array([[1.0 + 0.0j]])
    for ch in labels.upper():
        try:
            factor = PAULI[ch]
        except KeyError:
            raise ValueError(f"unknown Pauli label {ch!r}") from None
        out = np.kron(out, factor)
    return Operator(out)


def logical_states(n_qubits: int) -> tuple:
    """Code words of the n-qubit repetition code: |0..0> and |1..1>."""
    d = 2**n_qubits
    zero = np.zeros(d, dtype=complex)
    one = np.zeros(d, dtype=complex)
    zero[0] = 1.0
    one[d - 1] = 1.0
    return zero, one


def logical_x(n_qubits: int = 3) -> Operator:
    """The logical flip |0..0><1..1| + |1..1><0..0|; its expectation is 2 Re q."""
    zero, one = logical_states(n_qubits)
    return Operator(np.outer(zero, one.conj()) + np.outer(one, zero.conj()))


def dissipator(jump: "Operator | np.ndarray", rho: np.ndarray) -> np.ndarray:
    """Lindblad dissipator D[L](rho) = L rho L^dag - (1/2){L^dag L, rho}.

    The output is traceless for any jump operator and any input.
    """
    L = jump.matrix if isinstance(jump, Operator) else np.asarray(jump, dtype=complex)
    rho = np.asarray(rho, dtype=complex)
    LdL = L.conj().T @ L
    return L @ rho @ L.conj().T - 0.5 * (LdL @ rho + rho @ LdL)


def channel_to_superoperator(channel: Channel) -> Superoperator:
    """Column-stacking matrix of a Kraus channel: sum of conj(K) kron K."""
    d = channel.dim
    out = np.zeros((d * d, d * d), dtype=complex)
    for k in channel.kraus:
        out += np.kron(k.conj(), k)
    return Superoperator(out)
