import numpy as np
import pytest

from ctmc_occupation.chain_algebra import random_irreducible_generator
from ctmc_occupation.errors import NotAGenerator
from ctmc_occupation.formats import (
    fmt,
    read_generator_csv,
    read_path_csv,
    write_generator_csv,
    write_path_csv,
)
from ctmc_occupation.path_sim import ScalingParams, simulate_path


def test_fmt_round_trips():
    for x in (0.1, 1 / 3, 1e-300, 123456789.123456789, -2.5):
        assert float(fmt(x)) == x


def test_generator_csv_round_trip(tmp_path):
    Q = random_irreducible_generator(5, 3)
    f = tmp_path / "q.csv"
    write_generator_csv(f, Q)
    assert len(f.read_text().splitlines()) == 5
    assert np.array_equal(read_generator_csv(f).matrix, Q.matrix)


def test_generator_csv_rejects_bad_rows(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("-1,1\n1,-2\n")
    with pytest.raises(NotAGenerator):
        read_generator_csv(f)


def test_path_csv_round_trip(tmp_path, asym):
    p = simulate_path(asym, ScalingParams(30), 1.0, seed=8)
    f = tmp_path / "path.csv"
    write_path_csv(f, p)
    lines = f.read_text().splitlines()
    assert lines[0] == "time,state"
    assert lines[1] == f"0,{p.initial_state + 1}"
    assert len(lines) == p.n_jumps + 2
    back = read_path_csv(f, 2, 1.0)
    assert back.initial_state == p.initial_state
    assert np.array_equal(back.jump_times, p.jump_times)
    assert np.array_equal(back.post_jump_states, p.post_jump_states)


def test_path_csv_needs_header(tmp_path):
    f = tmp_path / "p.csv"
    f.write_text("t,s\n0,1\n")
    with pytest.raises(ValueError):
        read_path_csv(f, 2, 1.0)
