import numpy as np
import pytest
from hypothesis import given, strategies as st

from meshsizer.sampling import (DesignSpace, halton, halton_sequence, load_design, radical_inverse,
                                sample_design, save_design, scramble_permutations,
                                star_discrepancy_1d)


def test_radical_inverse_by_hand():
    assert [halton(i, 1)[0] for i in (1, 2, 3)] == [0.5, 0.25, 0.75]
    assert halton(1, 2)[1] == pytest.approx(1 / 3, abs=1e-16)
    assert radical_inverse(0, 2) == 0.0
    assert radical_inverse(5, 3) == pytest.approx(2 / 3 + 1 / 9, abs=1e-15)


def test_errors():
    with pytest.raises(ValueError):
        halton(0, 2)
    with pytest.raises(ValueError):
        halton(1, 26)
    with pytest.raises(ValueError):
        DesignSpace((0.0,), (0.0,))


def test_identity_permutation_gives_plain_halton():
    ident = [np.arange(b) for b in (2, 3, 5)]
    a = halton_sequence(50, 3, scrambled=True, permutations=ident)
    assert np.array_equal(a, halton_sequence(50, 3))


def test_scrambled_differs_and_is_seeded():
    a = halton_sequence(30, 4, scrambled=True, seed=1)
    assert np.array_equal(a, halton_sequence(30, 4, scrambled=True, seed=1))
    assert not np.array_equal(a, halton_sequence(30, 4))
    for p, b in zip(scramble_permutations(4, 1), (2, 3, 5, 7)):
        assert p[0] == 0 and sorted(p) == list(range(b))


def test_range_reduction():
    space = DesignSpace((0.0, 0.4), (1.0, 0.85))
    d = sample_design(space, {"train": 40, "validation": 40, "test": 200})
    assert d["test"][:, 0].min() >= 0.06 and d["test"][:, 0].max() <= 0.94
    assert d["validation"][:, 0].min() >= 0.03 and d["validation"][:, 0].max() <= 0.97
    assert d["train"][:, 1].min() >= 0.4 and d["train"][:, 1].max() <= 0.85


def test_counts_and_disjoint_indices():
    space = DesignSpace((0.4, 0.0), (0.85, 3.0))
    d = sample_design(space, {"train": 20, "validation": 5, "test": 80})
    assert sum(len(v) for v in d.values()) == 105
    u = np.vstack([halton_sequence(105, 2)])
    lo, hi = space.bounds("validation")
    np.testing.assert_allclose(d["validation"], lo + u[20:25] * (hi - lo))


def test_nested_training_sets():
    space = DesignSpace((0.0, 0.0), (1.0, 1.0))
    small = sample_design(space, {"train": 20}, scrambled=True, seed=3)["train"]
    big = sample_design(space, {"train": 80}, scrambled=True, seed=3)["train"]
    assert np.array_equal(big[:20], small)


def test_starts_override():
    space = DesignSpace((0.0,), (1.0,))
    d = sample_design(space, {"train": 4, "test": 3}, starts={"test": 1001})
    np.testing.assert_allclose(d["test"][:, 0], 0.06 + 0.88 * halton_sequence(3, 1, 1001)[:, 0])


@given(st.integers(1, 3), st.integers(1, 300), st.booleans())
def test_no_repeats(dims, n, scrambled):
    pts = halton_sequence(n, dims, scrambled=scrambled, seed=5)
    assert len(np.unique(pts, axis=0)) == n
    assert np.all((pts >= 0) & (pts < 1))


def test_discrepancy_beats_random():
    h = halton_sequence(256, 1)[:, 0]
    r = np.random.default_rng(0).uniform(size=256)
    assert star_discrepancy_1d(h) < star_discrepancy_1d(r)
    # exact: the first 2^k - 1 base-2 points are i / 2^k
    assert star_discrepancy_1d(halton_sequence(255, 1)[:, 0]) == pytest.approx(1 / 256)


def test_design_json(tmp_path):
    space = DesignSpace((0.4, 0.0), (0.85, 3.0), ("mach_inf", "alpha_deg"))
    d = sample_design(space, {"train": 3, "validation": 2, "test": 4}, scrambled=True)
    save_design(space, d, tmp_path / "d.json")
    s2, d2 = load_design(tmp_path / "d.json")
    assert s2 == space
    for k in d:
        assert np.array_equal(d[k], d2[k])
