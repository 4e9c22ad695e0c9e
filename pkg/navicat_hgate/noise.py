#!/usr/bin/env python

from dataclasses import dataclass, fields

import numpy as np

from navicat_hgate.exceptions import InputError
from navicat_hgate.protocol import (
    HeraldOutcome,
    atom_photon_entangle,
    herald_project,
    labelled,
    undefined_tol,
)
from navicat_hgate.qcore import (
    DensityMatrix,
    bell_state,
    fidelity_pure,
    ket,
    random_density_matrix,
    random_pure_state,
)


@dataclass(frozen=True)
class ErrorModel:
    """
    Imperfections of the heralded gate.

    Parameters
    ----------
    mode_overlap : squared wavepacket overlap M of the two photons, micromotion included.
    eps_det : per-ion probability that the fluorescence readout is flipped, at most 0.5.
    eps_sigma : per-photon probability that sigma-polarized light is detected.
    p_false_herald : probability of a dark-count coincidence, in units of the
        conditional herald probability.
    """

    mode_overlap: float = 1.0
    eps_det: float = 0.0
    eps_sigma: float = 0.0
    p_false_herald: float = 0.0

    def __post_init__(self):
        for field in fields(self):
            value = getattr(self, field.name)
            if not 0 <= value <= 1:
                raise InputError(
                    f"{field.name} must lie in [0, 1], but {value} was provided."
                )
        if self.eps_det > 0.5:
            raise InputError(
                f"eps_det must lie in [0, 0.5], but {self.eps_det} was provided."
            )

    @property
    def effective_sigma(self):
        """Probability that at least one of the two photons is sigma-polarized."""
        return 1 - (1 - self.eps_sigma) ** 2

    @property
    def is_ideal(self):
        return (
            self.mode_overlap == 1
            and self.eps_det == 0
            and self.eps_sigma == 0
            and self.p_false_herald == 0
        )

    @classmethod
    def calibrated(cls):
        """Error budget matching the quoted detection, mode-mismatch, sigma and dark-count figures."""
        return cls(
            mode_overlap=0.94,
            eps_det=0.015,
            eps_sigma=sigma_from_effective(0.02),
            p_false_herald=0.01,
        )


def sigma_from_effective(eps_eff):
    """Per-photon sigma contamination giving a two-photon weight eps_eff."""
    if not 0 <= eps_eff <= 1:
        raise InputError(f"Effective sigma weight must lie in [0, 1], got {eps_eff}.")
    return float(1 - np.sqrt(1 - eps_eff))


def sigma_leak_array(m, eps_sigma):
    eps_eff = 1 - (1 - eps_sigma) ** 2
    m = np.asarray(m, dtype=complex)
    return (1 - eps_eff) * m + eps_eff * np.trace(m) * np.identity(m.shape[0]) / m.shape[0]


def apply_sigma_leak(rho, eps_sigma):
    """Two-qubit depolarization with weight 1 - (1 - eps_sigma)^2."""
    if rho.dim != 4:
        raise InputError(f"The sigma leak acts on two qubits, not on dimension {rho.dim}.")
    if not 0 <= eps_sigma <= 1:
        raise InputError(f"eps_sigma must lie in [0, 1], but {eps_sigma} was provided.")
    if eps_sigma == 0:
        return rho
    return DensityMatrix(sigma_leak_array(rho.entries, eps_sigma))


def false_herald_state(q1, q2):
    """
    Ion state after a dark-count coincidence.

    Each ion is dephased by its emitted, undetected photon.
    """
    d1 = np.abs(q1.amplitudes) ** 2
    d2 = np.abs(q2.amplitudes) ** 2
    return DensityMatrix(np.diag(np.kron(d1, d2)).astype(complex))


def noisy_herald(q1, q2, em):
    """
    Herald outcome including mode mismatch, sigma light and false coincidences.

    Detection flips are left to the measurement stage.
    """
    herald = herald_project(
        atom_photon_entangle(q1), atom_photon_entangle(q2), em.mode_overlap
    )
    pf = em.p_false_herald
    if pf == 0:
        if em.eps_sigma == 0 or not herald.defined:
            return herald
        signal = apply_sigma_leak(herald.post_state, em.eps_sigma)
        return HeraldOutcome(
            coincidence_probability=herald.coincidence_probability,
            post_state=signal,
            signal_state=signal,
        )

    p_cc = herald.coincidence_probability
    p_tot = p_cc * (1 - pf) + pf
    if p_tot < undefined_tol:
        return HeraldOutcome(coincidence_probability=p_tot, post_state=None)
    false = false_herald_state(q1, q2)
    if herald.defined:
        signal = apply_sigma_leak(herald.post_state, em.eps_sigma)
        post = DensityMatrix.from_unnormalized(
            (1 - pf) * p_cc * signal.entries + pf * false.entries
        )
    else:
        signal = None
        post = false
    return HeraldOutcome(
        coincidence_probability=float(p_tot),
        post_state=post,
        false_fraction=float(pf / p_tot),
        signal_state=signal,
        false_state=false,
    )


def test_sigma_leak():
    rng = np.random.default_rng(1)
    rho = random_density_matrix(4, rng)
    assert apply_sigma_leak(rho, 0) is rho
    singlet = DensityMatrix.from_pure(bell_state("psi-"))
    leaked = apply_sigma_leak(singlet, sigma_from_effective(0.02))
    assert np.isclose(fidelity_pure(leaked, bell_state("psi-")), 0.985)
    mixed = DensityMatrix.maximally_mixed(4)
    assert np.allclose(apply_sigma_leak(mixed, 0.3).entries, mixed.entries)


def test_sigma_leak_linear():
    rng = np.random.default_rng(12)
    for _ in range(20):
        a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        a, b = a + a.conj().T, b + b.conj().T
        x, y = rng.normal(size=2)
        eps = rng.uniform()
        lhs = sigma_leak_array(x * a + y * b, eps)
        rhs = x * sigma_leak_array(a, eps) + y * sigma_leak_array(b, eps)
        assert np.allclose(lhs, rhs)
        assert np.isclose(np.trace(sigma_leak_array(a, eps)), np.trace(a))


def test_false_herald_state():
    assert np.allclose(
        false_herald_state(labelled("0"), labelled("1")).entries,
        DensityMatrix.from_pure(ket("01")).entries,
    )
    assert np.allclose(
        false_herald_state(labelled("0+1"), labelled("0+1")).entries, np.identity(4) / 4
    )
    assert np.allclose(
        false_herald_state(labelled("0"), labelled("0")).entries,
        DensityMatrix.from_pure(ket("00")).entries,
    )


def test_noisy_herald_examples():
    q = labelled("0+1")
    ideal = noisy_herald(q, q, ErrorModel())
    assert np.isclose(ideal.coincidence_probability, 0.25)
    assert np.isclose(fidelity_pure(ideal.post_state, bell_state("psi-")), 1)

    em = ErrorModel(mode_overlap=0.94, eps_sigma=sigma_from_effective(0.02))
    out = noisy_herald(q, q, em)
    # M-weighted singlet over the flat distinguishable floor, then depolarized
    expected = 0.98 * (1 + 0.94) / (4 - 2 * 0.94) + 0.02 * 0.25
    assert np.isclose(fidelity_pure(out.post_state, bell_state("psi-")), expected)
    assert np.isclose(out.coincidence_probability, 0.94 / 4 + 0.06 / 2)

    zero = labelled("0")
    dark = noisy_herald(zero, zero, ErrorModel(p_false_herald=0.04))
    assert np.isclose(dark.coincidence_probability, 0.04)
    assert dark.false_fraction == 1
    assert np.allclose(dark.post_state.entries, DensityMatrix.from_pure(ket("00")).entries)
    assert not noisy_herald(zero, zero, ErrorModel()).defined


def test_noisy_herald_ideal_is_exact():
    rng = np.random.default_rng(21)
    for _ in range(25):
        q1 = random_pure_state(2, rng)
        q2 = random_pure_state(2, rng)
        a = noisy_herald(q1, q2, ErrorModel())
        b = herald_project(atom_photon_entangle(q1), atom_photon_entangle(q2), 1.0)
        assert a.coincidence_probability == b.coincidence_probability
        assert np.array_equal(a.post_state.entries, b.post_state.entries)


def test_noisy_herald_monotone():
    q = labelled("0+1")
    target = bell_state("psi-")
    sweeps = {
        "mode_overlap": [1.0, 0.95, 0.9],
        "eps_sigma": [0.0, 0.01, 0.05],
        "p_false_herald": [0.0, 0.02, 0.05],
    }
    for name, values in sweeps.items():
        fids = [
            fidelity_pure(noisy_herald(q, q, ErrorModel(**{name: v})).post_state, target)
            for v in values
        ]
        assert fids[0] >= fids[1] >= fids[2]
        assert fids[0] > fids[2]


def test_error_model_validation():
    for bad in [1.5, 0.7]:
        try:
            ErrorModel(eps_det=bad)
        except InputError as m:
            assert "eps_det" in str(m)
        else:
            assert False
    assert ErrorModel(eps_det=0.5).eps_det == 0.5
    calibrated = ErrorModel.calibrated()
    assert np.isclose(calibrated.effective_sigma, 0.02)
