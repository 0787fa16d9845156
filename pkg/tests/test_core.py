import pytest
from hypothesis import given, strategies as st

from faasched import (EmptySamplesError, IncompleteTaskError, SimulatorError,
                      Task, ms, percentile, seconds, task_metrics)

from oracles import percentile_by_count


def test_time_helpers():
    assert ms(1) == 1_000
    assert ms(0.75) == 750
    assert ms(6.0) == 6_000
    assert seconds(1) == 1_000_000
    assert seconds(1.633) == 1_633_000


def test_task_remaining_defaults_to_demand():
    t = Task(id=1, arrival=0, demand=5_000, memory_mb=128)
    assert t.remaining == 5_000
    assert not t.done
    assert t.preemptions == 0


def test_task_rejects_nonpositive_demand():
    with pytest.raises(SimulatorError):
        Task(id=1, arrival=0, demand=0, memory_mb=128)
    with pytest.raises(SimulatorError):
        Task(id=1, arrival=0, demand=-5, memory_mb=128)


def test_task_metrics_zero_wait():
    t = Task(id=1, arrival=0, demand=seconds(5), memory_mb=128)
    t.first_run = 0
    t.completion = seconds(5)
    m = task_metrics(t)
    assert (m.execution, m.response, m.turnaround) == (seconds(5), 0, seconds(5))


def test_task_metrics_substitution():
    t = Task(id=2, arrival=seconds(2), demand=seconds(7), memory_mb=128)
    t.first_run = seconds(3)
    t.completion = seconds(10)
    m = task_metrics(t)
    assert m.execution == seconds(7)
    assert m.response == seconds(1)
    assert m.turnaround == seconds(8)
    assert m.turnaround == m.execution + m.response


def test_task_metrics_requires_completion():
    t = Task(id=3, arrival=0, demand=100, memory_mb=128)
    with pytest.raises(IncompleteTaskError):
        task_metrics(t)
    t.first_run = 0
    with pytest.raises(IncompleteTaskError):
        task_metrics(t)


def test_percentile_uniform_ladder():
    samples = [ms(i) for i in range(1, 101)]
    assert percentile(samples, 90) == ms(90)
    assert percentile(samples, 95) == ms(95)
    assert percentile(samples, 100) == ms(100)
    assert percentile(samples, 1) == ms(1)


def test_percentile_singleton():
    for p in (0.1, 25, 50, 99.9, 100):
        assert percentile([seconds(5)], p) == seconds(5)


def test_percentile_unsorted_input_with_duplicates():
    assert percentile([30, 10, 10, 20], 50) == 10
    assert percentile([30, 10, 10, 20], 75) == 20
    assert percentile([30, 10, 10, 20], 76) == 30


def test_percentile_rank_is_exact_for_decimal_p():
    # 99.9% of 1000 must be rank 999, not 1000; float math rounds this wrong
    samples = list(range(1, 1001))
    assert percentile(samples, 99.9) == 999


def test_percentile_rejects_bad_input():
    with pytest.raises(EmptySamplesError):
        percentile([], 50)
    for p in (0, -1, 100.1):
        with pytest.raises(SimulatorError):
            percentile([1, 2], p)


@given(
    st.lists(st.integers(min_value=0, max_value=10**9), min_size=1, max_size=200),
    st.one_of(
        st.integers(min_value=1, max_value=100),
        st.decimals(min_value="0.1", max_value="100", places=1).map(float),
    ),
)
def test_percentile_matches_counting_oracle(samples, p):
    assert percentile(samples, p) == percentile_by_count(samples, p)
