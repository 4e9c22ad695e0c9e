#!/usr/bin/env python

import re
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import numpy as np

from navicat_hgate.exceptions import InputError
from navicat_hgate.qcore import (
    DensityMatrix,
    Operator,
    PureState,
    bell_state,
    expectation,
    fidelity_pure,
    ket,
    pauli,
    random_density_matrix,
    tensor,
)

valid_bases = ["X", "Y", "Z"]

# Sign of the Pauli measured by a basis, so that + (bright) is its +1 eigenvalue.
# Z: bright is |1>. X: (|0>+|1>)/sqrt(2) is always bright. Y: the phase pi/2
# analysis pulse turns opposite to the preparation pulse.
basis_sign = {"I": 1, "X": 1, "Y": -1, "Z": -1}

outcome_labels = ["++", "+-", "-+", "--"]

_RE_COMBINE_WHITESPACE = re.compile(r"\s+")


class BasisPair(NamedTuple):
    b1: str
    b2: str

    @property
    def label(self):
        return f"{self.b1}{self.b2}"

    @classmethod
    def from_label(cls, label):
        label = str(label).strip().upper()
        if len(label) != 2 or any(b not in valid_bases + ["I"] for b in label):
            raise InputError(
                f"Basis pair {label} is invalid. Use two letters among {valid_bases}, e.g. XY."
            )
        return cls(label[0], label[1])


all_bases = [BasisPair(a, b) for a in valid_bases for b in valid_bases]


@dataclass(frozen=True)
class CountRecord:
    """Outcome counts n(+,+), n(+,-), n(-,+), n(-,-) in one basis pair, + being bright."""

    basis: BasisPair
    counts: tuple

    def __post_init__(self):
        if self.basis.b1 not in valid_bases or self.basis.b2 not in valid_bases:
            raise InputError(f"Count records need X, Y or Z on both ions, got {self.basis}.")
        if len(self.counts) != 4:
            raise InputError(
                f"Count records hold four outcome counts, but {len(self.counts)} were provided."
            )
        c = np.array(self.counts, dtype=float)
        if not np.all(np.isfinite(c)) or np.any(c < 0):
            raise InputError(f"Counts must be finite and non-negative, got {self.counts}.")

    @property
    def total(self):
        return float(np.sum(self.counts))

    def as_array(self):
        return np.array(self.counts, dtype=float)


@dataclass(frozen=True)
class ParityEstimate:
    value: float
    std_error: float
    n: float


class TargetClass(Enum):
    """Expected gate outputs of the standard input rows. Rows 5 to 7 share PRODUCT_01."""

    SINGLET = "|0>|1>-|1>|0>"
    MINUS_I = "|0>|1>-i|1>|0>"
    TRIPLET = "|0>|1>+|1>|0>"
    PLUS_I = "|0>|1>+i|1>|0>"
    PRODUCT_01 = "|0>|1>"

    @property
    def state(self):
        s = 1 / np.sqrt(2)
        amplitudes = {
            "SINGLET": [0, s, -s, 0],
            "MINUS_I": [0, s, -1j * s, 0],
            "TRIPLET": [0, s, s, 0],
            "PLUS_I": [0, s, 1j * s, 0],
            "PRODUCT_01": [0, 1, 0, 0],
        }
        return PureState(amplitudes[self.name])

    @property
    def formula(self):
        """Constant term and parity coefficients of the fidelity estimator."""
        q = 0.25
        terms = {
            "SINGLET": {"XX": -q, "YY": -q, "ZZ": -q},
            "MINUS_I": {"XY": -q, "YX": q, "ZZ": -q},
            "TRIPLET": {"XX": q, "YY": q, "ZZ": -q},
            "PLUS_I": {"XY": q, "YX": -q, "ZZ": -q},
            "PRODUCT_01": {"ZI": -q, "IZ": q, "ZZ": -q},
        }
        return q, {BasisPair.from_label(k): v for k, v in terms[self.name].items()}

    @property
    def bases(self):
        """Measurement settings the estimator needs."""
        _, terms = self.formula
        return sorted(
            {BasisPair(b.b1 if b.b1 != "I" else "Z", b.b2 if b.b2 != "I" else "Z") for b in terms}
        )


def observable(b):
    """Pauli observable whose +1 eigenvalue is the bright outcome in basis b."""
    return Operator(basis_sign[b] * pauli(b).entries)


def basis_observable(basis):
    return tensor(observable(basis.b1), observable(basis.b2))


def _single_effects(b, eps_det):
    o = observable(b).entries
    plus = (np.identity(2) + o) / 2
    minus = (np.identity(2) - o) / 2
    return [
        (1 - eps_det) * plus + eps_det * minus,
        (1 - eps_det) * minus + eps_det * plus,
    ]


def _check_eps_det(eps_det):
    if not 0 <= eps_det <= 0.5:
        raise InputError(f"eps_det must lie in [0, 0.5], but {eps_det} was provided.")


def outcome_effects(basis, eps_det=0.0):
    """
    POVM elements of the four outcomes (++, +-, -+, --) in a basis pair.

    Each ion's readout is flipped independently with probability eps_det.

    Returns
    -------
    E : array
        (4,4,4) stack of effects.
    """
    _check_eps_det(eps_det)
    if basis.b1 not in valid_bases or basis.b2 not in valid_bases:
        raise InputError(f"Unknown basis pair {basis}.")
    e1 = _single_effects(basis.b1, eps_det)
    e2 = _single_effects(basis.b2, eps_det)
    return np.array([np.kron(a, b) for a in e1 for b in e2])


def outcome_probabilities(rho, basis, eps_det=0.0):
    if rho.dim != 4:
        raise InputError(f"Two-ion readout needs a dimension 4 state, not {rho.dim}.")
    effects = outcome_effects(basis, eps_det)
    p = np.real(np.einsum("ij,oji->o", rho.entries, effects))
    p = np.clip(p, 0.0, None)
    return p / np.sum(p)


def sample_counts(rho, basis, eps_det, n, rng):
    p = outcome_probabilities(rho, basis, eps_det)
    return CountRecord(basis, tuple(int(c) for c in rng.multinomial(int(n), p)))


def expected_counts(rho, basis, eps_det, n):
    p = outcome_probabilities(rho, basis, eps_det)
    return CountRecord(basis, tuple(float(c) for c in n * p))


def parity(record):
    """Same-state minus opposite-state frequency of one count record."""
    npp, npm, nmp, nmm = record.as_array()
    n = record.total
    if n <= 0:
        raise InputError(f"Cannot estimate a parity from zero counts in basis {record.basis.label}.")
    value = (npp + nmm - npm - nmp) / n
    return ParityEstimate(value=value, std_error=float(np.sqrt(max(0.0, 1 - value**2) / n)), n=n)


def _estimate(value, n, exact):
    if exact:
        return ParityEstimate(value=value, std_error=0.0, n=n)
    return ParityEstimate(value=value, std_error=float(np.sqrt(max(0.0, 1 - value**2) / n)), n=n)


def _collect(pairs, exact):
    sums = {}
    for basis, vec in pairs:
        npp, npm, nmp, nmm = vec
        n = float(np.sum(vec))
        if n <= 0:
            continue
        for key, diff in [
            (basis, npp + nmm - npm - nmp),
            (BasisPair(basis.b1, "I"), npp + npm - nmp - nmm),
            (BasisPair("I", basis.b2), npp + nmp - npm - nmm),
        ]:
            s, t = sums.get(key, (0.0, 0.0))
            sums[key] = (s + diff, t + n)
    return {key: _estimate(s / t, t, exact) for key, (s, t) in sums.items()}


def estimates_from_records(records):
    """
    Parities of every record plus single-ion expectations pooled over records.

    Keys like (Z, I) hold the ion-1 expectation of its observable.
    """
    return _collect([(r.basis, r.as_array()) for r in records], exact=False)


def estimates_from_probabilities(probs_by_basis):
    """Infinite-statistics estimates from exact outcome distributions, with zero error."""
    return _collect(list(probs_by_basis.items()), exact=True)


def exact_estimates(rho, bases, eps_det=0.0):
    return estimates_from_probabilities(
        {b: outcome_probabilities(rho, b, eps_det) for b in bases}
    )


def fidelity_from_parities(target, parities, correlation_only=False):
    """
    Evaluate the fidelity estimator of a target row from parity estimates.

    Parameters
    ----------
    target : TargetClass
    parities : dict mapping BasisPair to ParityEstimate
    correlation_only : for PRODUCT_01, use the anticorrelation probability
        (1 - P_zz)/2 instead of the full projector.

    Returns
    -------
    fidelity : float
    std_error : float
        first-order propagation in quadrature.
    """
    const, terms = target.formula
    if correlation_only and target is TargetClass.PRODUCT_01:
        const, terms = 0.5, {BasisPair("Z", "Z"): -0.5}
    missing = [b.label for b in terms if b not in parities]
    if missing:
        raise InputError(
            f"Fidelity of {target.value} needs parities in bases {missing}, which were not measured."
        )
    f = const + sum(c * parities[b].value for b, c in terms.items())
    err = np.sqrt(sum((c * parities[b].std_error) ** 2 for b, c in terms.items()))
    return float(f), float(err)


def read_count_records(text, source="input"):
    """Parse lines of the form '<b1> <b2> <n_pp> <n_pm> <n_mp> <n_mm>'."""
    records = []
    for i, line in enumerate(text.splitlines()):
        line = line.split("#")[0]
        trline = _RE_COMBINE_WHITESPACE.sub(" ", line).strip()
        if not trline:
            continue
        tokens = trline.split(" ")
        if len(tokens) != 6:
            raise InputError(
                f"Line {i + 1} of {source} should hold two bases and four counts, got:\n {line}"
            )
        try:
            basis = BasisPair.from_label(tokens[0] + tokens[1])
            counts = tuple(int(t) for t in tokens[2:])
            records.append(CountRecord(basis, counts))
        except (InputError, ValueError) as m:
            raise InputError(f"Line {i + 1} of {source} could not be read: {m}")
    return records


def format_count_records(records):
    lines = ["# b1 b2 n_pp n_pm n_mp n_mm"]
    for r in records:
        counts = " ".join(
            str(int(c)) if float(c).is_integer() else f"{c:.6g}" for c in r.counts
        )
        lines.append(f"{r.basis.b1} {r.basis.b2} {counts}")
    return "\n".join(lines) + "\n"


def test_outcome_probabilities():
    singlet = DensityMatrix.from_pure(bell_state("psi-"))
    zz = BasisPair("Z", "Z")
    assert np.allclose(outcome_probabilities(singlet, zz, 0), [0, 0.5, 0.5, 0])
    assert np.allclose(outcome_probabilities(singlet, BasisPair("X", "X"), 0), [0, 0.5, 0.5, 0])
    noisy = outcome_probabilities(singlet, zz, 0.03)
    assert np.allclose(noisy, [0.0291, 0.4709, 0.4709, 0.0291])
    plus = DensityMatrix.from_pure(PureState([1, 1], normalize=True))
    assert np.isclose(
        outcome_probabilities(tensor(plus, plus), BasisPair("X", "X"), 0)[0], 1
    )
    bright = DensityMatrix.from_pure(ket("11"))
    assert np.isclose(outcome_probabilities(bright, zz, 0)[0], 1)
    try:
        outcome_probabilities(singlet, zz, 0.6)
    except InputError:
        pass
    else:
        assert False


def test_outcome_probabilities_properties():
    rng = np.random.default_rng(4)
    for _ in range(20):
        rho = random_density_matrix(4, rng)
        for basis in all_bases:
            p = outcome_probabilities(rho, basis, 0)
            assert abs(np.sum(p) - 1) < 1e-12
            exact = p[0] + p[3] - p[1] - p[2]
            assert abs(exact - expectation(rho, basis_observable(basis))) < 1e-12
            assert np.allclose(outcome_probabilities(rho, basis, 0.5), 0.25)


def test_parity():
    zz = BasisPair("Z", "Z")
    p = parity(CountRecord(zz, (0, 35, 35, 0)))
    assert p.value == -1 and p.std_error == 0
    p = parity(CountRecord(zz, (25, 25, 25, 25)))
    assert p.value == 0 and np.isclose(p.std_error, 0.1)
    assert np.isclose(parity(CountRecord(zz, (10, 30, 30, 0))).value, -50 / 70)
    try:
        parity(CountRecord(zz, (0, 0, 0, 0)))
    except InputError:
        pass
    else:
        assert False


def test_fidelity_from_parities_examples():
    def est(values):
        return {BasisPair.from_label(k): ParityEstimate(v, 0.0, 1) for k, v in values.items()}

    f, _ = fidelity_from_parities(TargetClass.SINGLET, est({"XX": -1, "YY": -1, "ZZ": -1}))
    assert np.isclose(f, 1)
    f, _ = fidelity_from_parities(TargetClass.SINGLET, est({"XX": 0, "YY": 0, "ZZ": 0}))
    assert np.isclose(f, 0.25)
    rho = DensityMatrix.from_pure(TargetClass.PLUS_I.state)
    values = {b: expectation(rho, basis_observable(BasisPair.from_label(b))) for b in ["XY", "YX", "ZZ"]}
    assert np.isclose(values["XY"], 1) and np.isclose(values["YX"], -1)
    assert np.isclose(values["ZZ"], -1)
    f, _ = fidelity_from_parities(TargetClass.PLUS_I, est(values))
    assert np.isclose(f, 1)
    try:
        fidelity_from_parities(TargetClass.MINUS_I, est({"XX": 0}))
    except InputError:
        pass
    else:
        assert False


def test_fidelity_estimators_are_exact():
    rng = np.random.default_rng(99)
    for target in TargetClass:
        for _ in range(100):
            rho = random_density_matrix(4, rng)
            estimates = exact_estimates(rho, target.bases)
            f, err = fidelity_from_parities(target, estimates)
            assert abs(f - fidelity_pure(rho, target.state)) < 1e-10
            assert err == 0


def test_error_propagation():
    records = [
        CountRecord(BasisPair("X", "X"), (5, 30, 30, 5)),
        CountRecord(BasisPair("Y", "Y"), (5, 30, 30, 5)),
        CountRecord(BasisPair("Z", "Z"), (5, 30, 30, 5)),
    ]
    estimates = estimates_from_records(records)
    f, err = fidelity_from_parities(TargetClass.SINGLET, estimates)
    p = parity(records[0])
    assert np.isclose(f, 0.25 * (1 - 3 * p.value))
    assert np.isclose(err, 0.25 * np.sqrt(3) * p.std_error)
    assert np.isclose(estimates[BasisPair("X", "I")].value, 0)


def test_count_record_text():
    text = """
    # basis counts
    X X 0 34 33 0
    z y 17 17 17 16  # lower case is accepted
    """
    records = read_count_records(text)
    assert len(records) == 2
    assert records[1].basis == BasisPair("Z", "Y")
    again = read_count_records(format_count_records(records))
    assert again == records
    for bad in ["X X 1 2 3", "X Q 1 2 3 4", "X X 1 2 3 -4"]:
        try:
            read_count_records(f"\n{bad}\n")
        except InputError as m:
            assert "Line 2" in str(m)
        else:
            assert False
