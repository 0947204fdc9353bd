"""Verification suites, counterexample reproductions and worked rigidity examples."""

from .rigidity import (kernel_circle_example, project_to_quarter_circle, rigidity_affine_examples,
                       toy_block_example)
from .suites import SUITES, SuiteConfig, run_suite, suite_names
from .witnesses import (four_point_residual, minimax_counterexample, orbit_average_universal_check,
                        orbit_infeasibility_witness, reversed_jensen_witness,
                        single_f_characterization_check)

__all__ = ["SUITES", "SuiteConfig", "run_suite", "suite_names", "minimax_counterexample",
           "orbit_average_universal_check", "reversed_jensen_witness", "orbit_infeasibility_witness",
           "single_f_characterization_check", "four_point_residual", "rigidity_affine_examples",
           "kernel_circle_example", "toy_block_example", "project_to_quarter_circle"]
