#!/usr/bin/env python

from dataclasses import dataclass, fields, replace

import numpy as np

from navicat_hgate.exceptions import InputError

# Quoted success-probability figures
quoted_gate_factor = 8.5e-8
quoted_gate_quarter = 2.2e-8

efficiency_fields = ["p_pi", "solid_angle_fraction", "t_fiber", "t_optics", "eta"]


@dataclass(frozen=True)
class RateBudget:
    """
    Photon collection budget of one ion.

    Parameters
    ----------
    p_pi : fraction of collected photons that are pi-polarized.
    solid_angle_fraction : collected solid angle over 4 pi.
    t_fiber : transmission into and through the fiber.
    t_optics : transmission of the remaining optics.
    eta : detector quantum efficiency.
    attempt_rate_hz : gate attempts per second, 0 when unknown.
    """

    p_pi: float = 0.5
    solid_angle_fraction: float = 0.02
    t_fiber: float = 0.2
    t_optics: float = 0.95
    eta: float = 0.15
    attempt_rate_hz: float = 0.0

    def __post_init__(self):
        for name in efficiency_fields:
            value = getattr(self, name)
            if not 0 <= value <= 1:
                raise InputError(f"{name} must lie in [0, 1], but {value} was provided.")
        if not self.attempt_rate_hz >= 0 or not np.isfinite(self.attempt_rate_hz):
            raise InputError(
                f"attempt_rate_hz must be finite and non-negative, but {self.attempt_rate_hz} was provided."
            )

    def scaled(self, s):
        return replace(self, **{name: getattr(self, name) * s for name in efficiency_fields})


def per_photon_detection_prob(b):
    return b.p_pi * b.solid_angle_fraction * b.t_fiber * b.t_optics * b.eta


def gate_success_probability(b, p_psi):
    """Both photons detected and found in the antisymmetric state."""
    if not 0 <= p_psi <= 1:
        raise InputError(f"p_psi must lie in [0, 1], but {p_psi} was provided.")
    return p_psi * per_photon_detection_prob(b) ** 2


def expected_events(b, p_psi, duration_s):
    if duration_s < 0:
        raise InputError(f"Duration must be non-negative, but {duration_s} was provided.")
    return b.attempt_rate_hz * duration_s * gate_success_probability(b, p_psi)


def rate_breakdown(b, p_psi=0.25):
    """
    Every factor of the budget with the derived probabilities.

    The quoted figures are kept next to the computed ones with their
    relative deviation; the computed product is the reported value.
    """
    p1 = per_photon_detection_prob(b)
    gate_factor = gate_success_probability(b, 1.0)
    out = {f.name: getattr(b, f.name) for f in fields(b)}
    out.update(
        {
            "per_photon_detection_prob": p1,
            "gate_factor": gate_factor,
            "p_psi": p_psi,
            "gate_success_probability": gate_success_probability(b, p_psi),
            "quoted_gate_factor": quoted_gate_factor,
            "gate_factor_deviation": gate_factor / quoted_gate_factor - 1,
            "quoted_gate_quarter": quoted_gate_quarter,
            "gate_quarter_deviation": gate_success_probability(b, 0.25) / quoted_gate_quarter - 1,
        }
    )
    if b.attempt_rate_hz > 0:
        out["events_per_hour"] = expected_events(b, p_psi, 3600.0)
    return out


def test_per_photon_detection_prob():
    assert np.isclose(per_photon_detection_prob(RateBudget()), 2.85e-4, rtol=1e-12)
    ones = RateBudget(1, 1, 1, 1, 1)
    assert per_photon_detection_prob(ones) == 1
    for name in efficiency_fields:
        assert per_photon_detection_prob(replace(RateBudget(), **{name: 0})) == 0


def test_gate_success_probability():
    b = RateBudget()
    assert np.isclose(gate_success_probability(b, 1), 8.1225e-8, rtol=1e-12)
    assert abs(gate_success_probability(b, 1) / quoted_gate_factor - 1) < 0.05
    assert abs(gate_success_probability(b, 0.25) / quoted_gate_quarter - 1) < 0.10
    assert gate_success_probability(b, 0) == 0
    try:
        gate_success_probability(b, 1.5)
    except InputError:
        pass
    else:
        assert False


def test_quadratic_scaling():
    b = RateBudget()
    base = gate_success_probability(b, 0.25)
    for s in [0.5, 2**-0.5]:
        for name in efficiency_fields:
            one = replace(b, **{name: getattr(b, name) * s})
            assert np.isclose(gate_success_probability(one, 0.25), base * s**2, rtol=1e-12)
        # five factors per photon, two photons
        assert np.isclose(gate_success_probability(b.scaled(s), 0.25), base * s**10, rtol=1e-12)


def test_monotone_in_every_factor():
    b = RateBudget()
    for name in efficiency_fields:
        values = np.linspace(0, 1, 11)
        probs = [gate_success_probability(replace(b, **{name: v}), 0.25) for v in values]
        assert all(q >= p for p, q in zip(probs, probs[1:]))


def test_expected_events():
    b = RateBudget(attempt_rate_hz=1e5)
    n = expected_events(b, 0.25, 3600)
    assert abs(n - 7.31) < 0.01
    assert expected_events(RateBudget(), 0.25, 3600) == 0
    assert expected_events(b, 0.25, 0) == 0
    breakdown = rate_breakdown(b)
    assert np.isclose(breakdown["events_per_hour"], n)
    assert "events_per_hour" not in rate_breakdown(RateBudget())
    try:
        RateBudget(eta=1.2)
    except InputError as m:
        assert "eta" in str(m)
    else:
        assert False
