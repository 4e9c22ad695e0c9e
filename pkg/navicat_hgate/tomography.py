#!/usr/bin/env python

from dataclasses import dataclass

import numpy as np
import scipy.optimize as sopt
from scipy.special import entr

from navicat_hgate.exceptions import InputError
from navicat_hgate.measurement import (
    BasisPair,
    CountRecord,
    all_bases,
    estimates_from_records,
    expected_counts,
    observable,
    outcome_effects,
    sample_counts,
)
from navicat_hgate.qcore import (
    DensityMatrix,
    bell_state,
    check_density,
    fidelity_pure,
    pauli_matrices,
    purity,
    random_density_matrix,
    swap_operator,
    trace_distance,
    werner_state,
)

prob_floor = 1e-12
init_floor = 1e-6
_lower = np.tril_indices(4, -1)
_flip = np.fliplr(np.identity(4))
_yy = np.kron(pauli_matrices["Y"], pauli_matrices["Y"])


@dataclass(frozen=True)
class TomographyInput:
    """Count records in the nine basis pairs, each present exactly once."""

    records: tuple

    def __post_init__(self):
        bases = [r.basis for r in self.records]
        if len(bases) != 9 or set(bases) != set(all_bases):
            missing = [b.label for b in all_bases if b not in bases]
            raise InputError(
                f"Tomography needs each of the 9 basis pairs exactly once. Got {[b.label for b in bases]}, missing {missing}."
            )
        if self.total < 16:
            raise InputError(
                f"Tomography needs at least 16 events in total, but only {self.total} were provided."
            )

    @classmethod
    def from_records(cls, records):
        order = {b: i for i, b in enumerate(all_bases)}
        return cls(tuple(sorted(records, key=lambda r: order.get(r.basis, -1))))

    @property
    def total(self):
        return float(sum(r.total for r in self.records))


@dataclass(frozen=True)
class ReconstructionResult:
    rho_hat: DensityMatrix
    log_likelihood: float
    converged: bool
    iterations: int
    params: tuple = ()


def _factor(t):
    t = np.asarray(t, dtype=float)
    if t.shape != (16,):
        raise InputError(f"The Cholesky parameterization has 16 entries, got shape {t.shape}.")
    T = np.zeros((4, 4), dtype=complex)
    T[np.diag_indices(4)] = t[:4]
    T[_lower] = t[4::2] + 1j * t[5::2]
    return T


def rho_from_params(t):
    """rho = T^dag T / Tr(T^dag T), with T lower triangular and real on the diagonal."""
    T = _factor(t)
    a = T.conj().T @ T
    tr = np.real(np.trace(a))
    if tr < 1e-300:
        raise InputError("Parameters with vanishing norm do not describe a state.")
    return DensityMatrix.from_unnormalized(a)


def params_from_rho(rho):
    """Inverse of rho_from_params for full-rank states."""
    L = np.linalg.cholesky(_flip @ rho.entries @ _flip)
    T = (_flip @ L @ _flip).conj().T
    t = np.zeros(16)
    t[:4] = np.real(np.diag(T))
    t[4::2] = np.real(T[_lower])
    t[5::2] = np.imag(T[_lower])
    return t


def likelihood_terms(tomo, eps_det=0.0):
    """Stacked outcome effects and counts of every record."""
    effects = np.concatenate([outcome_effects(r.basis, eps_det) for r in tomo.records])
    counts = np.concatenate([r.as_array() for r in tomo.records])
    return effects, counts


def _nll_and_grad(t, effects, counts):
    T = _factor(t)
    a = T.conj().T @ T
    tr = np.real(np.trace(a))
    if tr < 1e-300:
        raise InputError("Parameters with vanishing norm do not describe a state.")
    p = np.real(np.einsum("oij,ji->o", effects, a)) / tr
    clamped = p < prob_floor
    pc = np.where(clamped, prob_floor, p)
    value = -np.sum(counts * np.log(pc))

    w = np.where(clamped, 0.0, counts / pc)
    W = -(np.einsum("o,oij->ij", w, effects) - np.sum(w * p) * np.identity(4)) / tr
    D = (W @ T.conj().T).T
    g = np.zeros(16)
    g[:4] = 2 * np.real(np.diag(D))
    g[4::2] = 2 * np.real(D[_lower])
    g[5::2] = -2 * np.imag(D[_lower])
    return float(value), g


def neg_log_likelihood(params, tomo, eps_det=0.0):
    """
    Multinomial negative log-likelihood of the counts.

    Parameters
    ----------
    params : array
        16 reals, see rho_from_params.
    tomo : TomographyInput
    eps_det : float
        detection flip probability folded into the outcome probabilities.

    Returns
    -------
    value : float
        -sum n_o log p_o, with p_o floored at 1e-12.
    """
    effects, counts = likelihood_terms(tomo, eps_det)
    return _nll_and_grad(params, effects, counts)[0]


def neg_log_likelihood_grad(params, tomo, eps_det=0.0):
    effects, counts = likelihood_terms(tomo, eps_det)
    return _nll_and_grad(params, effects, counts)[1]


def linear_inversion(records, eps_det=0.0):
    """
    Linear estimate 1/4 sum <O_a O_b> O_a x O_b from parities and pooled marginals.

    With eps_det > 0 each single-ion factor is divided by (1 - 2 eps_det).
    The result is Hermitian with unit trace but not necessarily positive.
    """
    estimates = estimates_from_records(records)
    shrink = 1 - 2 * eps_det
    m = np.identity(4, dtype=complex) / 4
    labels = ["I", "X", "Y", "Z"]
    for a in labels:
        for b in labels:
            if a == b == "I":
                continue
            key = BasisPair(a, b)
            if key not in estimates:
                continue
            k = (a != "I") + (b != "I")
            value = estimates[key].value / shrink**k
            op = np.kron(_signed(a), _signed(b))
            m += value * op / 4
    return m


def _signed(b):
    if b == "I":
        return pauli_matrices["I"]
    return observable(b).entries


def project_psd(m, floor=init_floor):
    """Clip eigenvalues of a Hermitian matrix at floor and renormalize to unit trace."""
    m = 0.5 * (m + m.conj().T)
    w, v = np.linalg.eigh(m)
    w = np.clip(w, floor, None)
    w = w / np.sum(w)
    return DensityMatrix.from_unnormalized((v * w) @ v.conj().T)


def initial_params(tomo, eps_det=0.0):
    if 1 - 2 * eps_det < 1e-6:
        return params_from_rho(DensityMatrix.maximally_mixed(4))
    rho0 = project_psd(linear_inversion(tomo.records, eps_det))
    try:
        return params_from_rho(rho0)
    except np.linalg.LinAlgError:
        return params_from_rho(DensityMatrix.maximally_mixed(4))


def reconstruct_mle(tomo, eps_det=0.0, maxiter=10000, verb=0):
    """
    Maximum-likelihood two-ion state from nine-basis counts.

    BFGS runs on the per-event negative log-likelihood with its analytic
    gradient, starting from the PSD-projected linear inversion.

    Parameters
    ----------
    tomo : TomographyInput
    eps_det : float
        set to the detection flip probability to correct for readout errors,
        0 for the raw reconstruction.
    maxiter : int
        iteration cap.
    verb : int
        verbosity level.

    Returns
    -------
    result : ReconstructionResult
    """
    effects, counts = likelihood_terms(tomo, eps_det)
    n = np.sum(counts)
    t0 = initial_params(tomo, eps_det)

    def fun(t):
        value, g = _nll_and_grad(t, effects, counts)
        return value / n, g / n

    history = [fun(t0)[0]]

    def callback(xk):
        history.append(fun(xk)[0])

    if verb > 2:
        print(f"MLE starts from linear inversion with per-event NLL {history[0]:.6f}.")
    res = sopt.minimize(
        fun,
        t0,
        jac=True,
        method="BFGS",
        callback=callback,
        options={"gtol": 1e-6, "maxiter": int(maxiter)},
    )
    decrease = history[-2] - history[-1] if len(history) > 1 else np.inf
    gnorm = np.max(np.abs(res.jac))
    converged = bool(res.nit < maxiter and (gnorm < 1e-6 or abs(decrease) < 1e-10))
    rho_hat = rho_from_params(res.x)
    check_density(rho_hat.entries)
    if verb > 1:
        print(
            f"MLE finished after {res.nit} iterations: per-event NLL {res.fun:.6f}, gradient norm {gnorm:.2e}, converged {converged}."
        )
    if verb > 4:
        print(np.array_str(rho_hat.entries, precision=3, suppress_small=True))
    return ReconstructionResult(
        rho_hat=rho_hat,
        log_likelihood=float(-res.fun * n),
        converged=converged,
        iterations=int(res.nit),
        params=tuple(res.x),
    )


def concurrence(rho):
    """
    Wootters concurrence of a two-qubit state.

    The lambdas are the singular values of sqrt(rho) sqrt(rho_tilde), which
    equal the square roots of the eigenvalues of rho rho_tilde.
    """
    if rho.dim != 4:
        raise InputError(f"Concurrence is defined here for two qubits, not dimension {rho.dim}.")
    w, v = np.linalg.eigh(rho.entries)
    sqrt_rho = (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T
    sqrt_tilde = _yy @ sqrt_rho.conj() @ _yy
    lam = np.linalg.svd(sqrt_rho @ sqrt_tilde, compute_uv=False)
    c = lam[0] - lam[1] - lam[2] - lam[3]
    return float(np.clip(c, 0.0, 1.0))


def ef_from_concurrence(c):
    if not -1e-12 <= c <= 1 + 1e-12:
        raise InputError(f"Concurrence must lie in [0, 1], got {c}.")
    c = min(max(c, 0.0), 1.0)
    x = (1 + np.sqrt(1 - c**2)) / 2
    return float((entr(x) + entr(1 - x)) / np.log(2))


def entanglement_of_formation(rho):
    return ef_from_concurrence(concurrence(rho))


def summarize(rho, target=None):
    """Scalars and matrix entries reported for a reconstructed state."""
    target = bell_state("psi-") if target is None else target
    return {
        "F": fidelity_pure(rho, target),
        "C": concurrence(rho),
        "E_F": entanglement_of_formation(rho),
        "purity": purity(rho),
        "re": np.real(rho.entries).tolist(),
        "im": np.imag(rho.entries).tolist(),
    }


def rho_bar_rows(rho):
    """(row, column, Re, Im) of every matrix entry, for bar charts of the two panels."""
    labels = ["00", "01", "10", "11"]
    return [
        (labels[i], labels[j], float(np.real(rho.entries[i, j])), float(np.imag(rho.entries[i, j])))
        for i in range(4)
        for j in range(4)
    ]


def swap_ions(records):
    """Exchange the roles of the two ions in a list of count records."""
    out = []
    for r in records:
        npp, npm, nmp, nmm = r.counts
        out.append(CountRecord(BasisPair(r.basis.b2, r.basis.b1), (npp, nmp, npm, nmm)))
    return out


def _expected_input(rho, n, eps_det=0.0):
    return TomographyInput.from_records([expected_counts(rho, b, eps_det, n) for b in all_bases])


def _sampled_input(rho, n, rng, eps_det=0.0):
    return TomographyInput.from_records([sample_counts(rho, b, eps_det, n, rng) for b in all_bases])


def test_tomography_input_validation():
    rng = np.random.default_rng(0)
    records = [sample_counts(DensityMatrix.maximally_mixed(4), b, 0, 10, rng) for b in all_bases]
    TomographyInput.from_records(records)
    for bad in [records[:8], records[:8] + [records[0]]]:
        try:
            TomographyInput.from_records(bad)
        except InputError:
            pass
        else:
            assert False
    tiny = [CountRecord(b, (1, 0, 0, 0)) for b in all_bases]
    try:
        TomographyInput.from_records(tiny)
    except InputError as m:
        assert "16" in str(m)
    else:
        assert False


def test_parameterization():
    rng = np.random.default_rng(31)
    rho = random_density_matrix(4, rng)
    assert np.allclose(rho_from_params(params_from_rho(rho)).entries, rho.entries)
    for _ in range(10):
        t = rng.normal(size=16)
        check_density(rho_from_params(t).entries)
    try:
        rho_from_params(np.zeros(16))
    except InputError:
        pass
    else:
        assert False


def test_neg_log_likelihood_examples():
    rng = np.random.default_rng(2)
    tomo = _sampled_input(random_density_matrix(4, rng), 50, rng)
    flat = np.concatenate([np.ones(4), np.zeros(12)])
    assert np.isclose(neg_log_likelihood(flat, tomo), tomo.total * np.log(4))
    assert np.isclose(neg_log_likelihood(flat, tomo, 0.1), tomo.total * np.log(4))

    singlet = DensityMatrix.from_pure(bell_state("psi-"))
    # rank one: only the last row of T is populated
    t = np.zeros(16)
    t[12], t[14] = 1 / np.sqrt(2), -1 / np.sqrt(2)
    assert np.allclose(rho_from_params(t).entries, singlet.entries)
    records = list(_expected_input(singlet, 10).records)
    records[-1] = CountRecord(BasisPair("Z", "Z"), (1, 5, 5, 0))
    value = neg_log_likelihood(t, TomographyInput.from_records(records))
    assert np.isfinite(value)
    assert value > -np.log(prob_floor) - 1

    try:
        neg_log_likelihood(np.zeros(16), tomo)
    except InputError:
        pass
    else:
        assert False


def test_likelihood_minimal_at_truth():
    rng = np.random.default_rng(17)
    rho = random_density_matrix(4, rng)
    tomo = _expected_input(rho, 1000)
    best = neg_log_likelihood(params_from_rho(rho), tomo)
    for _ in range(50):
        assert neg_log_likelihood(rng.normal(size=16), tomo) >= best


def test_gradient_matches_finite_differences():
    rng = np.random.default_rng(44)
    tomo = _sampled_input(random_density_matrix(4, rng), 100, rng)
    h = 1e-5
    for _ in range(20):
        t = rng.normal(size=16)
        eps = rng.uniform(0, 0.1)
        g = neg_log_likelihood_grad(t, tomo, eps)
        num = np.zeros(16)
        for k in range(16):
            step = np.zeros(16)
            step[k] = h
            num[k] = (
                neg_log_likelihood(t + step, tomo, eps) - neg_log_likelihood(t - step, tomo, eps)
            ) / (2 * h)
        assert np.linalg.norm(g - num) <= 1e-4 * np.linalg.norm(num)


def test_linear_inversion_exact():
    rng = np.random.default_rng(9)
    rho = random_density_matrix(4, rng)
    records = _expected_input(rho, 100.0).records
    assert np.allclose(linear_inversion(records), rho.entries)
    noisy = _expected_input(rho, 100.0, eps_det=0.05).records
    assert np.allclose(linear_inversion(noisy, eps_det=0.05), rho.entries)


def test_reconstruct_exact_singlet():
    singlet = bell_state("psi-")
    tomo = _expected_input(DensityMatrix.from_pure(singlet), 1e6)
    result = reconstruct_mle(tomo)
    assert fidelity_pure(result.rho_hat, singlet) > 0.9999
    check_density(result.rho_hat.entries)


def test_reconstruct_mixed():
    rng = np.random.default_rng(6)
    mixed = DensityMatrix.maximally_mixed(4)
    result = reconstruct_mle(_sampled_input(mixed, 20000, rng))
    assert trace_distance(result.rho_hat, mixed) < 0.02
    assert result.converged


def test_reconstruct_sampled_singlet():
    singlet = bell_state("psi-")
    rho = DensityMatrix.from_pure(singlet)
    good = 0
    corrected = 0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        result = reconstruct_mle(_sampled_input(rho, 67, rng))
        good += fidelity_pure(result.rho_hat, singlet) > 0.95
        rng = np.random.default_rng(1000 + seed)
        result = reconstruct_mle(_sampled_input(rho, 67, rng, eps_det=0.03), eps_det=0.03)
        # only the lower edge of [0.90, 0.99] is asserted
        corrected += fidelity_pure(result.rho_hat, singlet) > 0.90
    assert good >= 18
    assert corrected >= 18


def test_reconstruct_adversarial_counts():
    records = [CountRecord(b, (40, 0, 0, 0)) for b in all_bases]
    result = reconstruct_mle(TomographyInput.from_records(records))
    check_density(result.rho_hat.entries)


def test_swap_covariance():
    rng = np.random.default_rng(23)
    rho = random_density_matrix(4, rng)
    tomo = _expected_input(rho, 1e5)
    direct = reconstruct_mle(tomo).rho_hat
    swapped = reconstruct_mle(TomographyInput.from_records(swap_ions(tomo.records))).rho_hat
    s = swap_operator().entries
    assert trace_distance(swapped, DensityMatrix(s @ direct.entries @ s)) < 1e-3


def test_concurrence():
    assert np.isclose(concurrence(DensityMatrix.from_pure(bell_state("psi-"))), 1)
    assert np.isclose(concurrence(DensityMatrix.from_pure(bell_state("phi+"))), 1)
    assert concurrence(DensityMatrix.maximally_mixed(4)) == 0
    product = DensityMatrix(np.diag([0, 1, 0, 0]).astype(complex))
    assert concurrence(product) < 1e-10
    for p in np.linspace(0, 1, 21):
        c = concurrence(werner_state(p))
        assert abs(c - max(0, (3 * p - 1) / 2)) < 1e-10


def test_entanglement_of_formation():
    assert np.isclose(ef_from_concurrence(1), 1)
    assert ef_from_concurrence(0) == 0
    assert abs(ef_from_concurrence(0.77) - 0.682) < 0.001
    grid = [ef_from_concurrence(c) for c in np.linspace(0, 1, 100)]
    assert all(b > a for a, b in zip(grid, grid[1:]))
    assert np.isclose(entanglement_of_formation(DensityMatrix.from_pure(bell_state("psi-"))), 1)


def test_summary_and_bars():
    rho = werner_state(0.8)
    summary = summarize(rho)
    assert np.isclose(summary["F"], 0.85)
    assert np.isclose(summary["C"], 0.7)
    rows = rho_bar_rows(rho)
    assert len(rows) == 16
    assert rows[5][:2] == ("01", "01") and np.isclose(rows[5][2], 0.45)
    assert np.isclose(rows[6][2], -0.4)
