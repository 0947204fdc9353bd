import numpy as np
import pytest
from hypothesis import given, strategies as st

from coherence_proj.models import (ConditionalModel, PromptDistribution, format_float, from_csv,
                                   from_json, to_csv, to_json)


def test_distribution_validation():
    with pytest.raises(ValueError):
        PromptDistribution(np.array([0.5, 0.6]))
    assert np.allclose(PromptDistribution.normalized([1, 3]).weights, [0.25, 0.75])
    assert PromptDistribution.uniform(4).n == 4


def test_conditional_model_rows_must_sum_to_one():
    with pytest.raises(ValueError):
        ConditionalModel(np.array([[0.5, 0.6]]))


def test_csv_layout():
    text = to_csv(np.array([[0.1, 0.9]]))
    assert text == "y0,y1\r\n0.10000000000000001,0.90000000000000002\r\n"


@given(st.lists(st.lists(st.floats(-1e6, 1e6), min_size=3, max_size=3), min_size=1, max_size=5))
def test_csv_and_json_round_trip_exactly(rows):
    t = np.array(rows)
    assert np.array_equal(from_csv(to_csv(t)), t)
    assert np.array_equal(from_json(to_json(t)), t)


@given(st.floats(allow_nan=False, allow_infinity=False))
def test_seventeen_digits_round_trip(v):
    assert float(format_float(v)) == v
