import time

import pytest

from dampwave.services.workers import parallel_map


def _slow_square(x: int) -> int:
    # later items finish first
    time.sleep(0.01 * (5 - x))
    return x * x


@pytest.mark.parametrize("threads", [1, 4])
def test_results_keep_input_order(threads):
    assert parallel_map(_slow_square, range(5), threads) == [0, 1, 4, 9, 16]


def test_empty_input():
    assert parallel_map(_slow_square, [], threads=3) == []


def test_worker_error_is_reraised():
    def fn(x):
        if x == 2:
            raise ValueError("boom")
        return x

    with pytest.raises(ValueError, match="boom"):
        parallel_map(fn, range(4), threads=2)
