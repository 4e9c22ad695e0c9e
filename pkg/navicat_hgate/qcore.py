#!/usr/bin/env python

import numpy as np

from navicat_hgate.exceptions import InputError

norm_tol = 1e-12
herm_tol = 1e-12
trace_tol = 1e-12
psd_tol = -1e-10

pauli_matrices = {
    "I": np.array([[1, 0], [0, 1]], dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _frozen(a):
    a = np.array(a, dtype=complex)
    a.setflags(write=False)
    return a


class PureState:
    """
    Normalized complex state vector.

    Parameters
    ----------
    amplitudes : sequence of complex amplitudes.
    normalize : if True, rescale to unit norm instead of checking it.
    """

    def __init__(self, amplitudes, normalize=False):
        v = np.array(amplitudes, dtype=complex).reshape(-1)
        if v.size < 1:
            raise InputError("A pure state needs at least one amplitude.")
        norm = np.linalg.norm(v)
        if normalize:
            if norm < 1e-14:
                raise InputError("Cannot normalize a null vector into a pure state.")
            v = v / norm
        elif abs(norm**2 - 1) > norm_tol:
            raise InputError(
                f"State vector has squared norm {norm**2} instead of 1. Use normalize=True to rescale it."
            )
        self.amplitudes = _frozen(v)
        self.dim = v.size

    def __repr__(self):
        return f"PureState({np.array_str(self.amplitudes, precision=4, suppress_small=True)})"


class Operator:
    """Square complex matrix with no constraint beyond its shape."""

    def __init__(self, entries):
        m = np.array(entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise InputError(f"Operators must be square matrices, got shape {m.shape}.")
        self.entries = _frozen(m)
        self.dim = m.shape[0]

    def is_hermitian(self, tol=herm_tol):
        return bool(np.max(np.abs(self.entries - self.entries.conj().T)) <= tol)

    def __repr__(self):
        return f"Operator(\n{np.array_str(self.entries, precision=4, suppress_small=True)})"


class DensityMatrix:
    """
    Hermitian, positive semidefinite, unit-trace matrix.

    The checks run at construction; instances are read-only afterwards.
    """

    def __init__(self, entries, check=True):
        m = np.array(entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
            raise InputError(
                f"Density matrices must be square matrices, got shape {m.shape}."
            )
        if check:
            check_density(m)
        self.entries = _frozen(m)
        self.dim = m.shape[0]

    @classmethod
    def from_pure(cls, state):
        v = state.amplitudes
        return cls(np.outer(v, v.conj()))

    @classmethod
    def from_unnormalized(cls, entries):
        """Hermitize and rescale a positive operator to unit trace."""
        m = np.array(entries, dtype=complex)
        m = 0.5 * (m + m.conj().T)
        tr = np.real(np.trace(m))
        if tr < 1e-14:
            raise InputError(f"Cannot normalize an operator with trace {tr}.")
        return cls(m / tr)

    @classmethod
    def maximally_mixed(cls, dim):
        return cls(np.identity(dim, dtype=complex) / dim)

    def __repr__(self):
        return f"DensityMatrix(\n{np.array_str(self.entries, precision=4, suppress_small=True)})"


def check_density(m):
    herm_err = np.max(np.abs(m - m.conj().T))
    if herm_err > herm_tol:
        raise InputError(f"Matrix is not Hermitian (deviation {herm_err:.3e}).")
    tr = np.trace(m)
    if abs(tr - 1) > trace_tol:
        raise InputError(f"Matrix trace is {tr} instead of 1.")
    emin = np.min(np.linalg.eigvalsh(0.5 * (m + m.conj().T)))
    if emin < psd_tol:
        raise InputError(f"Matrix has a negative eigenvalue {emin:.3e}.")


def tensor(a, b):
    """
    Kronecker product of two objects of the same kind.

    The left factor is the slow index, so |0>|1> lands on index 1 of a
    four-dimensional space.
    """
    if isinstance(a, PureState) and isinstance(b, PureState):
        return PureState(np.kron(a.amplitudes, b.amplitudes))
    if isinstance(a, DensityMatrix) and isinstance(b, DensityMatrix):
        return DensityMatrix(np.kron(a.entries, b.entries))
    if isinstance(a, Operator) and isinstance(b, Operator):
        return Operator(np.kron(a.entries, b.entries))
    raise InputError(
        f"Cannot tensor a {type(a).__name__} with a {type(b).__name__}. Both factors must be of the same kind."
    )


def partial_trace_array(m, keep, dims):
    """
    Partial trace of a square array over every subsystem not listed in keep.

    Parameters
    ----------
    m : array
        (D,D) matrix, where D is the product of dims.
    keep : indices of the subsystems to keep.
    dims : dimension of every subsystem, slow index first.

    Returns
    -------
    reduced : array
        (d,d) matrix, where d is the product of the kept dimensions.
    """
    dims = [int(d) for d in dims]
    n = len(dims)
    if n == 0 or any(d < 1 for d in dims):
        raise InputError(f"Subsystem dimensions must be positive integers, got {dims}.")
    if int(np.prod(dims)) != m.shape[0]:
        raise InputError(
            f"Subsystem dimensions {dims} multiply to {int(np.prod(dims))}, but the matrix has dimension {m.shape[0]}."
        )
    keep = sorted(set(int(k) for k in keep))
    if any(k < 0 or k >= n for k in keep):
        raise InputError(f"Kept subsystems {keep} are not valid for {n} subsystems.")
    t = np.asarray(m).reshape(dims + dims)
    traced = [i for i in range(n) if i not in keep]
    for count, i in enumerate(sorted(traced, reverse=True)):
        t = np.trace(t, axis1=i, axis2=i + n - count)
    d = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d, d)


def partial_trace(rho, keep, dims):
    return DensityMatrix(partial_trace_array(rho.entries, keep, dims))


def fidelity_pure(rho, target):
    """Overlap <target|rho|target> of a density matrix with a pure state."""
    if rho.dim != target.dim:
        raise InputError(
            f"Dimension mismatch: density matrix of dimension {rho.dim} and target of dimension {target.dim}."
        )
    v = target.amplitudes
    f = np.vdot(v, rho.entries @ v)
    if abs(np.imag(f)) > 1e-10:
        raise InputError(f"Fidelity has a spurious imaginary part {np.imag(f):.3e}.")
    return float(np.clip(np.real(f), 0.0, 1.0))


def pauli(which):
    try:
        return Operator(pauli_matrices[str(which).upper()])
    except KeyError:
        raise InputError(f"Unknown Pauli operator {which}. Valid choices are I, X, Y and Z.")


def pauli_string(labels):
    """Tensor product of Paulis given as a string such as "XY"."""
    op = pauli(labels[0])
    for label in labels[1:]:
        op = tensor(op, pauli(label))
    return op


def expectation(rho, op):
    """Expectation value Tr(rho op) of a Hermitian observable."""
    if rho.dim != op.dim:
        raise InputError(
            f"Dimension mismatch: density matrix of dimension {rho.dim} and operator of dimension {op.dim}."
        )
    if not op.is_hermitian():
        raise InputError("Expectation values are only defined here for Hermitian operators.")
    return float(np.real(np.trace(rho.entries @ op.entries)))


def ket(bits):
    """Computational basis state from a bit string, e.g. "01"."""
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int(bits, 2)] = 1
    return PureState(v)


def bell_state(name):
    s = 1 / np.sqrt(2)
    vectors = {
        "psi-": [0, s, -s, 0],
        "psi+": [0, s, s, 0],
        "phi+": [s, 0, 0, s],
        "phi-": [s, 0, 0, -s],
    }
    if name not in vectors:
        raise InputError(f"Unknown Bell state {name}. Valid names are {list(vectors)}.")
    return PureState(vectors[name])


def werner_state(p):
    singlet = DensityMatrix.from_pure(bell_state("psi-")).entries
    return DensityMatrix(p * singlet + (1 - p) * np.identity(4) / 4)


def trace_distance(a, b):
    d = a.entries - b.entries
    return float(0.5 * np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


def purity(rho):
    return float(np.real(np.trace(rho.entries @ rho.entries)))


def swap_operator():
    s = np.zeros((4, 4), dtype=complex)
    for i in range(2):
        for j in range(2):
            s[2 * j + i, 2 * i + j] = 1
    return Operator(s)


def random_density_matrix(dim, rng, rank=None):
    """Random density matrix from a Ginibre ensemble of the given rank."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    return DensityMatrix.from_unnormalized(g @ g.conj().T)


def random_pure_state(dim, rng):
    return PureState(rng.normal(size=dim) + 1j * rng.normal(size=dim), normalize=True)


def test_tensor_conventions():
    zi = tensor(pauli("Z"), pauli("I"))
    v = ket("10").amplitudes
    assert np.allclose(zi.entries @ v, -v)
    assert np.allclose(tensor(ket("0"), ket("1")).amplitudes, ket("01").amplitudes)
    assert np.argmax(np.abs(tensor(ket("0"), ket("1")).amplitudes)) == 1
    half = DensityMatrix.maximally_mixed(2)
    assert np.allclose(tensor(half, half).entries, np.identity(4) / 4)


def test_tensor_associative():
    rng = np.random.default_rng(7)
    a, b, c = [random_density_matrix(2, rng) for _ in range(3)]
    left = tensor(tensor(a, b), c)
    right = tensor(a, tensor(b, c))
    assert np.max(np.abs(left.entries - right.entries)) < 1e-12


def test_partial_trace():
    singlet = DensityMatrix.from_pure(bell_state("psi-"))
    assert np.allclose(partial_trace(singlet, [0], [2, 2]).entries, np.identity(2) / 2)
    rng = np.random.default_rng(11)
    a = random_density_matrix(2, rng)
    b = random_density_matrix(2, rng)
    ab = tensor(a, b)
    assert np.allclose(partial_trace(ab, [0], [2, 2]).entries, a.entries, atol=1e-14)
    assert np.allclose(partial_trace(ab, [1], [2, 2]).entries, b.entries, atol=1e-14)
    full = partial_trace(ab, [], [2, 2])
    assert full.dim == 1 and np.isclose(full.entries[0, 0], 1)
    big = tensor(ab, tensor(a, b))
    assert np.allclose(partial_trace(big, [1, 2], [2, 2, 2, 2]).entries, tensor(b, a).entries)
    try:
        partial_trace(ab, [0], [2, 3])
    except InputError:
        pass
    else:
        assert False


def test_fidelity_pure():
    singlet = bell_state("psi-")
    assert np.isclose(fidelity_pure(DensityMatrix.from_pure(singlet), singlet), 1)
    for name in ["psi-", "psi+", "phi+", "phi-"]:
        assert np.isclose(fidelity_pure(DensityMatrix.maximally_mixed(4), bell_state(name)), 0.25)
    assert np.isclose(fidelity_pure(DensityMatrix.from_pure(bell_state("psi+")), singlet), 0)
    rng = np.random.default_rng(3)
    for _ in range(20):
        f = fidelity_pure(random_density_matrix(4, rng), random_pure_state(4, rng))
        assert 0 <= f <= 1


def test_pauli_algebra():
    ops = {k: pauli(k).entries for k in "IXYZ"}
    for k in "XYZ":
        assert np.max(np.abs(ops[k] @ ops[k] - ops["I"])) < 1e-14
    for a, b in [("X", "Y"), ("Y", "Z"), ("X", "Z")]:
        assert np.max(np.abs(ops[a] @ ops[b] + ops[b] @ ops[a])) < 1e-14
    assert np.isclose(expectation(DensityMatrix.from_pure(ket("0")), pauli("Z")), 1)
    singlet = DensityMatrix.from_pure(bell_state("psi-"))
    assert np.isclose(expectation(singlet, pauli_string("XX")), -1)
    assert np.isclose(expectation(DensityMatrix.maximally_mixed(2), pauli("X")), 0)
    try:
        expectation(singlet, Operator(np.triu(np.ones((4, 4)))))
    except InputError:
        pass
    else:
        assert False


def test_density_checks():
    for bad in [np.diag([0.5, 0.6]), np.diag([1.2, -0.2]), [[0.5, 0.1], [0.2, 0.5]]]:
        try:
            DensityMatrix(bad)
        except InputError:
            pass
        else:
            assert False
    rho = DensityMatrix.maximally_mixed(4)
    assert not rho.entries.flags.writeable
