import numpy as np
import pytest

from dyckin.dyck import DyckConfig, SymbolCodebook, required_completion
from dyckin.taskenv import (BUDGET_FACTOR, TaskInstance, bracket_match_begin, task_begin,
                            task_from_instance, task_indicators, task_move_cursor, task_submit)

D2 = DyckConfig(2)
CB = SymbolCodebook(D2, 8, seed=0)


def state(text):
    inst = TaskInstance.from_prefix(D2, D2.parse(text))
    return task_from_instance(inst, 8, np.random.default_rng(0))


def test_empty_task():
    ts = task_begin(D2, 0, np.random.default_rng(0))
    assert ts.instance.input_with_terminator == (D2.terminator,)
    assert ts.instance.target == (D2.terminator,)


def test_lengths_and_budget():
    ts = task_begin(D2, 10, np.random.default_rng(1))
    assert len(ts.instance.input_with_terminator) == 11
    assert ts.step_budget == BUDGET_FACTOR * (10 + len(ts.instance.target))
    assert list(ts.instance.target) == required_completion(D2, ts.instance.prefix)


def test_begin_is_deterministic():
    a = task_begin(D2, 20, np.random.default_rng(5))
    b = task_begin(D2, 20, np.random.default_rng(5))
    assert a.instance == b.instance and np.array_equal(a.nonce, b.nonce)


def test_negative_length():
    with pytest.raises(ValueError):
        task_begin(D2, -1, np.random.default_rng(0))


def test_cursor_clamps():
    ts = state("((")
    assert np.array_equal(task_move_cursor(ts, "prev", CB), CB.codes[0])
    task_move_cursor(ts, "prev", CB)
    assert ts.cursor == 0
    for _ in range(5):
        v = task_move_cursor(ts, "next", CB)
    assert ts.cursor == 2 and np.array_equal(v, CB.codes[D2.terminator])
    with pytest.raises(ValueError):
        task_move_cursor(ts, "up", CB)


def test_first_move_reveals_first_element():
    ts = state("([")
    assert np.array_equal(task_move_cursor(ts, "next", CB), CB.encode(0))
    assert np.array_equal(task_move_cursor(ts, "next", CB), CB.encode(1))


def test_successful_submission_sequence():
    ts = state("[[")
    out = task_submit(ts, CB.encode(D2.closer(1)), CB)
    assert out.matched and not out.episode_done and out.final_reward is None
    task_submit(ts, CB.encode(D2.closer(1)), CB)
    out = task_submit(ts, CB.encode(D2.terminator), CB)
    assert out.episode_done and out.final_reward == 1 and ts.success
    with pytest.raises(RuntimeError):
        task_submit(ts, CB.encode(D2.terminator), CB)


def test_wrong_submission_continues_then_fails():
    ts = state("((")
    out = task_submit(ts, CB.encode(D2.closer(1)), CB)
    assert not out.matched and ts.mismatch_flag and not out.episode_done
    assert np.array_equal(out.mse_target, CB.encode(D2.closer(0)))
    task_submit(ts, CB.encode(D2.closer(0)), CB)
    out = task_submit(ts, CB.encode(D2.terminator), CB)
    assert out.episode_done and out.final_reward == 0


def test_overflow_ends_the_task():
    ts = state("(")
    task_submit(ts, CB.encode(D2.closer(0)), CB)
    out = task_submit(ts, CB.encode(D2.closer(0)), CB)
    assert not out.episode_done
    assert out.expected == D2.terminator
    out = task_submit(ts, CB.encode(D2.closer(0)), CB)
    assert out.episode_done and out.final_reward == 0


def test_early_terminator_fails():
    ts = state("(")
    out = task_submit(ts, CB.encode(D2.terminator), CB)
    assert out.episode_done and out.final_reward == 0


def test_submit_dimension():
    with pytest.raises(ValueError):
        task_submit(state("("), np.zeros(3), CB)


def test_indicators():
    ts = state("(()")
    assert task_indicators(ts)[0] == 0
    for _ in range(4):
        task_move_cursor(ts, "next", CB)
    ind = task_indicators(ts)
    assert ind[0] == 1.0 and ind[1] == pytest.approx(3 / 1000)
    seen = []
    for _ in range(5):
        ts.steps_taken += 1
        seen.append(task_indicators(ts)[2])
    assert seen == sorted(seen)


def test_bracket_match_task():
    rng = np.random.default_rng(0)
    kinds = set()
    for _ in range(30):
        ts = bracket_match_begin(D2, rng)
        (t,) = ts.instance.prefix
        kinds.add(t)
        assert ts.instance.target == (D2.closer(t), D2.terminator)
    assert kinds == {0, 1}
