#!/usr/bin/env python

from dataclasses import dataclass
from typing import Optional

import numpy as np

from navicat_hgate.exceptions import InputError
from navicat_hgate.qcore import (
    DensityMatrix,
    Operator,
    PureState,
    bell_state,
    fidelity_pure,
    ket,
    partial_trace_array,
    pauli,
    pauli_string,
    random_pure_state,
    tensor,
)

undefined_tol = 1e-14

# Standard input states as (theta, phi) microwave settings
state_labels = {
    "0": (0.0, 0.0),
    "1": (np.pi, 0.0),
    "0+1": (np.pi / 2, 0.0),
    "0+i": (np.pi / 2, np.pi / 2),
    "0-1": (np.pi / 2, np.pi),
    "0-i": (np.pi / 2, 3 * np.pi / 2),
}


@dataclass(frozen=True)
class PrepSetting:
    """Microwave preparation pulse: polar angle theta and phase phi, in radians."""

    theta: float = np.pi / 2
    phi: float = 0.0

    def __post_init__(self):
        if not 0 <= self.theta <= np.pi:
            raise InputError(f"theta must lie in [0, pi], but {self.theta} was provided.")
        if not 0 <= self.phi < 2 * np.pi:
            raise InputError(f"phi must lie in [0, 2 pi), but {self.phi} was provided.")

    @classmethod
    def from_label(cls, label):
        if label not in state_labels:
            raise InputError(
                f"Unknown input state label {label}. Valid labels are {list(state_labels)}."
            )
        theta, phi = state_labels[label]
        return cls(theta=theta, phi=phi)

    @property
    def label(self):
        for name, (theta, phi) in state_labels.items():
            if theta == self.theta and phi == self.phi:
                return name
        return None


class AtomPhotonState:
    """
    Joint state of one ion and its emitted photon.

    Basis ordering is |0,nu_b>, |0,nu_r>, |1,nu_b>, |1,nu_r> (atom slow).
    """

    def __init__(self, state):
        if state.dim != 4:
            raise InputError(f"Atom-photon states live in dimension 4, not {state.dim}.")
        self.state = state

    @property
    def amplitudes(self):
        return self.state.amplitudes


@dataclass(frozen=True)
class HeraldOutcome:
    """
    Result of a heralding event on the two atomic qubits.

    post_state is None whenever the coincidence probability vanishes.
    """

    coincidence_probability: float
    post_state: Optional[DensityMatrix]
    false_fraction: float = 0.0
    signal_state: Optional[DensityMatrix] = None
    false_state: Optional[DensityMatrix] = None

    @property
    def defined(self):
        return self.post_state is not None


def prepare_qubit(p):
    """cos(theta/2)|0> + exp(i phi) sin(theta/2)|1>, with a real |0> amplitude."""
    return PureState(
        [np.cos(p.theta / 2), np.exp(1j * p.phi) * np.sin(p.theta / 2)]
    )


def atom_photon_entangle(q):
    """
    Spontaneous emission of a pi photon: alpha|0>|nu_b> + beta|1>|nu_r>.
    """
    if q.dim != 2:
        raise InputError(f"Atomic qubits have dimension 2, not {q.dim}.")
    alpha, beta = q.amplitudes
    return AtomPhotonState(PureState([alpha, 0, 0, beta]))


def p_psi_minus(q1, q2):
    """Probability that the two emitted photons are in the antisymmetric Bell state."""
    a1, b1 = np.abs(q1.amplitudes) ** 2
    a2, b2 = np.abs(q2.amplitudes) ** 2
    return float((a1 * b2 + b1 * a2) / 2)


def gate_kraus():
    z1 = tensor(pauli("Z"), pauli("I")).entries
    zz = pauli_string("ZZ").entries
    return Operator(z1 @ (np.identity(4) - zz) / 2)


def gate_kraus_apply(q1, q2):
    """
    Apply Z1(I - Z1 Z2)/2 to q1 x q2.

    Returns
    -------
    state : PureState or None
        normalized output, None when the input is annihilated.
    norm2 : float
        squared norm of the unnormalized output, equal to 2 P_psi-.
    """
    v = gate_kraus().entries @ tensor(q1, q2).amplitudes
    norm2 = float(np.real(np.vdot(v, v)))
    if norm2 < undefined_tol:
        return None, norm2
    return PureState(v, normalize=True), norm2


def coincidence_povm(M):
    """
    Coincidence effect on the two-photon frequency space.

    M is the squared wavepacket overlap: M = 1 reproduces the ideal
    antisymmetric projector, M = 0 the flat floor of distinguishable photons.
    """
    if not 0 <= M <= 1:
        raise InputError(f"The mode overlap M must lie in [0, 1], but {M} was provided.")
    psi = bell_state("psi-").amplitudes
    return Operator(M * np.outer(psi, psi.conj()) + (1 - M) * np.identity(4) / 2)


def joint_atoms_photons(s1, s2):
    """Product of two atom-photon states reordered to (atom 1, atom 2, photon 1, photon 2)."""
    joint = np.kron(s1.amplitudes, s2.amplitudes).reshape(2, 2, 2, 2)
    return joint.transpose(0, 2, 1, 3).reshape(16)


def herald_project(s1, s2, M=1.0):
    """
    Condition the two ions on a photon coincidence behind the beamsplitter.

    The joint state is weighted by I_atoms x E_cc(M) and the photons are
    traced out.
    """
    joint = joint_atoms_photons(s1, s2)
    rho = np.outer(joint, joint.conj())
    weighted = np.kron(np.identity(4), coincidence_povm(M).entries) @ rho
    prob = float(np.clip(np.real(np.trace(weighted)), 0.0, 1.0))
    if prob < undefined_tol:
        return HeraldOutcome(coincidence_probability=prob, post_state=None)
    post = DensityMatrix.from_unnormalized(
        partial_trace_array(weighted, [0, 1], [2, 2, 2, 2])
    )
    return HeraldOutcome(coincidence_probability=prob, post_state=post, signal_state=post)


def labelled(label):
    return prepare_qubit(PrepSetting.from_label(label))


def test_prepare_qubit():
    assert np.allclose(labelled("0").amplitudes, [1, 0])
    assert PrepSetting.from_label("0-i").label == "0-i"
    assert PrepSetting(theta=1.5708, phi=0.0).label is None
    s = 1 / np.sqrt(2)
    assert np.allclose(labelled("0+1").amplitudes, [s, s])
    assert np.allclose(labelled("0+i").amplitudes, [s, 1j * s])
    assert np.allclose(labelled("0-i").amplitudes, [s, -1j * s])
    try:
        PrepSetting(theta=4.0, phi=0.0)
    except InputError:
        pass
    else:
        assert False


def test_atom_photon_entangle():
    assert np.allclose(atom_photon_entangle(labelled("0")).amplitudes, [1, 0, 0, 0])
    s = 1 / np.sqrt(2)
    assert np.allclose(atom_photon_entangle(labelled("0+1")).amplitudes, [s, 0, 0, s])
    assert np.allclose(atom_photon_entangle(labelled("0-i")).amplitudes, [s, 0, 0, -1j * s])


def test_p_psi_minus_table():
    rows = [
        ("0+1", "0+1", 0.25),
        ("0+i", "0+1", 0.25),
        ("0-1", "0+1", 0.25),
        ("0-i", "0+1", 0.25),
        ("0+1", "1", 0.25),
        ("0", "0+1", 0.25),
        ("0", "1", 0.5),
        ("0", "0", 0.0),
    ]
    for l1, l2, expected in rows:
        assert abs(p_psi_minus(labelled(l1), labelled(l2)) - expected) < 1e-12


def test_gate_kraus_table():
    s = 1 / np.sqrt(2)
    expected = {
        ("0+1", "0+1"): [0, s, -s, 0],
        ("0+i", "0+1"): [0, s, -1j * s, 0],
        ("0-1", "0+1"): [0, s, s, 0],
        ("0-i", "0+1"): [0, s, 1j * s, 0],
    }
    for (l1, l2), target in expected.items():
        out, norm2 = gate_kraus_apply(labelled(l1), labelled(l2))
        assert np.isclose(norm2, 0.5)
        assert abs(fidelity_pure(DensityMatrix.from_pure(out), PureState(target)) - 1) < 1e-12
        herald = herald_project(
            atom_photon_entangle(labelled(l1)), atom_photon_entangle(labelled(l2)), 1.0
        )
        assert abs(fidelity_pure(herald.post_state, PureState(target)) - 1) < 1e-12
        assert abs(herald.coincidence_probability - 0.25) < 1e-12
    out, norm2 = gate_kraus_apply(labelled("0"), labelled("0"))
    assert out is None and norm2 == 0


def test_coincidence_povm():
    psi = bell_state("psi-").amplitudes
    assert np.allclose(coincidence_povm(1).entries, np.outer(psi, psi.conj()))
    assert np.allclose(coincidence_povm(0).entries, np.identity(4) / 2)
    evals = np.linalg.eigvalsh(coincidence_povm(0.9).entries)
    assert np.allclose(evals, [0.05, 0.05, 0.05, 0.95])
    for bad in [-0.1, 1.1]:
        try:
            coincidence_povm(bad)
        except InputError:
            pass
        else:
            assert False


def test_herald_project_examples():
    zero = atom_photon_entangle(labelled("0"))
    assert herald_project(zero, zero, 1.0).coincidence_probability == 0
    assert not herald_project(zero, zero, 1.0).defined
    flat = herald_project(zero, zero, 0.0)
    assert np.isclose(flat.coincidence_probability, 0.5)
    assert np.allclose(flat.post_state.entries, DensityMatrix.from_pure(ket("00")).entries)


def test_herald_matches_kraus():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        q1 = random_pure_state(2, rng)
        q2 = random_pure_state(2, rng)
        herald = herald_project(atom_photon_entangle(q1), atom_photon_entangle(q2), 1.0)
        assert abs(herald.coincidence_probability - p_psi_minus(q1, q2)) < 1e-12
        out, norm2 = gate_kraus_apply(q1, q2)
        assert np.isclose(norm2, 2 * p_psi_minus(q1, q2))
        assert abs(fidelity_pure(herald.post_state, out) - 1) < 1e-10


def test_herald_overlap_dependence():
    rng = np.random.default_rng(5)
    zero = atom_photon_entangle(labelled("0"))
    probs = [herald_project(zero, zero, M).coincidence_probability for M in [0, 0.5, 1]]
    assert probs[0] > probs[1] > probs[2] == 0
    for _ in range(10):
        s1 = atom_photon_entangle(random_pure_state(2, rng))
        s2 = atom_photon_entangle(random_pure_state(2, rng))
        p0, ph, p1 = [herald_project(s1, s2, M).coincidence_probability for M in [0, 0.5, 1]]
        assert abs(ph - 0.5 * (p0 + p1)) < 1e-12


def test_global_phase_invariance():
    rng = np.random.default_rng(8)
    for _ in range(10):
        q1 = random_pure_state(2, rng)
        q2 = random_pure_state(2, rng)
        q1_phased = PureState(np.exp(1j * rng.uniform(0, 2 * np.pi)) * q1.amplitudes)
        for M in [1.0, 0.7]:
            a = herald_project(atom_photon_entangle(q1), atom_photon_entangle(q2), M)
            b = herald_project(atom_photon_entangle(q1_phased), atom_photon_entangle(q2), M)
            assert abs(a.coincidence_probability - b.coincidence_probability) < 1e-12
            assert np.max(np.abs(a.post_state.entries - b.post_state.entries)) < 1e-12
