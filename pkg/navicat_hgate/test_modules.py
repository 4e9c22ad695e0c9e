#!/usr/bin/env python

import os

from navicat_hgate.helpers import (
    test_emit_report,
    test_format_config_fixed_point,
    test_is_count_file,
    test_parse_config_defaults,
    test_parse_config_errors,
)
from navicat_hgate.hgate import (
    test_dispatch_exit_codes,
    test_dispatch_rates,
    test_dispatch_simulate_counts_feed_tomo,
    test_dispatch_table1,
    test_dispatch_tomo,
)
from navicat_hgate.measurement import (
    test_count_record_text,
    test_error_propagation,
    test_fidelity_estimators_are_exact,
    test_fidelity_from_parities_examples,
    test_outcome_probabilities,
    test_outcome_probabilities_properties,
    test_parity,
)
from navicat_hgate.montecarlo import (
    test_calibrated_exact_fidelities,
    test_calibrated_table1_sampling,
    test_config_validation,
    test_determinism,
    test_fast_and_full_modes_agree,
    test_herald_probability_estimates,
    test_ideal_row1,
    test_ideal_row7,
    test_ideal_table1,
    test_no_progress,
    test_row8_false_heralds,
    test_tomography_dataset,
)
from navicat_hgate.noise import (
    test_error_model_validation,
    test_false_herald_state,
    test_noisy_herald_examples,
    test_noisy_herald_ideal_is_exact,
    test_noisy_herald_monotone,
    test_sigma_leak,
    test_sigma_leak_linear,
)
from navicat_hgate.protocol import (
    test_atom_photon_entangle,
    test_coincidence_povm,
    test_gate_kraus_table,
    test_global_phase_invariance,
    test_herald_matches_kraus,
    test_herald_overlap_dependence,
    test_herald_project_examples,
    test_p_psi_minus_table,
    test_prepare_qubit,
)
from navicat_hgate.qcore import (
    test_density_checks,
    test_fidelity_pure,
    test_partial_trace,
    test_pauli_algebra,
    test_tensor_associative,
    test_tensor_conventions,
)
from navicat_hgate.rates import (
    test_expected_events,
    test_gate_success_probability,
    test_monotone_in_every_factor,
    test_per_photon_detection_prob,
    test_quadratic_scaling,
)
from navicat_hgate.tomography import (
    test_concurrence,
    test_entanglement_of_formation,
    test_gradient_matches_finite_differences,
    test_likelihood_minimal_at_truth,
    test_linear_inversion_exact,
    test_neg_log_likelihood_examples,
    test_parameterization,
    test_reconstruct_adversarial_counts,
    test_reconstruct_exact_singlet,
    test_reconstruct_mixed,
    test_reconstruct_sampled_singlet,
    test_summary_and_bars,
    test_swap_covariance,
    test_tomography_input_validation,
)

test_files_dir = f"{os.path.dirname(os.path.abspath(__file__))}/test_files/"

if __name__ == "__main__":
    test_tensor_conventions()
    test_tensor_associative()
    test_partial_trace()
    test_fidelity_pure()
    test_pauli_algebra()
    test_density_checks()
    test_prepare_qubit()
    test_atom_photon_entangle()
    test_p_psi_minus_table()
    test_gate_kraus_table()
    test_coincidence_povm()
    test_herald_project_examples()
    test_herald_matches_kraus()
    test_herald_overlap_dependence()
    test_global_phase_invariance()
    test_sigma_leak()
    test_sigma_leak_linear()
    test_false_herald_state()
    test_noisy_herald_examples()
    test_noisy_herald_ideal_is_exact()
    test_noisy_herald_monotone()
    test_error_model_validation()
    test_outcome_probabilities()
    test_outcome_probabilities_properties()
    test_parity()
    test_fidelity_from_parities_examples()
    test_fidelity_estimators_are_exact()
    test_error_propagation()
    test_count_record_text()
    test_tomography_input_validation()
    test_parameterization()
    test_neg_log_likelihood_examples()
    test_likelihood_minimal_at_truth()
    test_gradient_matches_finite_differences()
    test_linear_inversion_exact()
    test_reconstruct_exact_singlet()
    test_reconstruct_mixed()
    test_reconstruct_sampled_singlet()
    test_reconstruct_adversarial_counts()
    test_swap_covariance()
    test_concurrence()
    test_entanglement_of_formation()
    test_summary_and_bars()
    test_per_photon_detection_prob()
    test_gate_success_probability()
    test_quadratic_scaling()
    test_monotone_in_every_factor()
    test_expected_events()
    test_config_validation()
    test_determinism()
    test_ideal_row1()
    test_ideal_row7()
    test_calibrated_exact_fidelities()
    test_calibrated_table1_sampling()
    test_ideal_table1()
    test_herald_probability_estimates()
    test_fast_and_full_modes_agree()
    test_row8_false_heralds()
    test_no_progress()
    test_tomography_dataset()
    test_parse_config_defaults(path=test_files_dir)
    test_parse_config_errors()
    test_format_config_fixed_point()
    test_is_count_file(path=test_files_dir)
    test_emit_report()
    test_dispatch_rates()
    test_dispatch_exit_codes(path=test_files_dir)
    test_dispatch_tomo(path=test_files_dir)
    test_dispatch_simulate_counts_feed_tomo(path=test_files_dir)
    test_dispatch_table1()
