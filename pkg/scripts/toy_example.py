"""Block projections of the three-prompt toy model under four generators."""

import numpy as np

from coherence_proj.harness.rigidity import TOY_PI0, UNIFORM3, toy_closed_forms, toy_generators, toy_set
from coherence_proj.projection import bregman_project


def main():
    closed = toy_closed_forms()
    print(f"baseline pi0 = {TOY_PI0.ravel().tolist()}, blocks {{1,2}}, {{3}}")
    print(f"{'generator':<20}{'projection':<36}{'closed form error':>18}")
    for name, gen in toy_generators().items():
        got, _ = bregman_project(gen, UNIFORM3, toy_set(), TOY_PI0)
        got = got.ravel()
        err = float(np.max(np.abs(got - closed[name])))
        print(f"{name:<20}{'  '.join(f'{v:.5f}' for v in got):<36}{err:>18.2e}")


if __name__ == "__main__":
    main()
