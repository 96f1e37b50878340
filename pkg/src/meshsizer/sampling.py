"""
Halton and scrambled Halton designs of experiments.

Training points cover the full parameter range; validation and test points
are drawn from ranges shrunk by 3% and 6% at both ends. Splits consume
disjoint, contiguous blocks of sequence indices, training first, so a larger
training set contains the smaller ones.
"""

from dataclasses import dataclass

import numpy as np

from ._jsonio import read_json, write_json

PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47,
          53, 59, 61, 67, 71, 73, 79, 83, 89, 97)

SPLITS = ("train", "validation", "test")
RANGE_REDUCTION = {"train": 0.0, "validation": 0.03, "test": 0.06}


def radical_inverse(index, base, perm=None):
    """Van der Corput radical inverse of ``index`` in ``base``, optionally digit-permuted."""
    if index < 0:
        raise ValueError("index must be non-negative")
    x, f = 0.0, 1.0 / base
    i = int(index)
    while i > 0:
        d = i % base
        if perm is not None:
            d = perm[d]
        x += d * f
        i //= base
        f /= base
    return x


def scramble_permutations(dims, seed):
    """One random digit permutation per base, each fixing the digit 0."""
    rng = np.random.default_rng(seed)
    perms = []
    for b in PRIMES[:dims]:
        perms.append(np.concatenate([[0], 1 + rng.permutation(b - 1)]))
    return perms


def _check_dims(dims):
    if not 1 <= dims <= len(PRIMES):
        raise ValueError(f"dims must be in 1..{len(PRIMES)}, got {dims}")


def halton(index, dims, scrambled=False, seed=0, permutations=None):
    """Halton point number ``index`` (1-based) in ``[0, 1)^dims``."""
    if index < 1:
        raise ValueError(f"Halton index must be >= 1, got {index}")
    _check_dims(dims)
    if scrambled and permutations is None:
        permutations = scramble_permutations(dims, seed)
    if not scrambled:
        permutations = None
    return np.array([radical_inverse(index, PRIMES[k], None if permutations is None else permutations[k])
                     for k in range(dims)])


def halton_sequence(n, dims, start=1, scrambled=False, seed=0, permutations=None):
    """Points ``start .. start + n - 1`` of the (scrambled) Halton sequence, shape (n, dims)."""
    _check_dims(dims)
    if scrambled and permutations is None:
        permutations = scramble_permutations(dims, seed)
    return np.array([halton(start + k, dims, scrambled, seed, permutations)
                     for k in range(n)]).reshape(n, dims)


@dataclass(frozen=True)
class DesignSpace:
    lower: tuple
    upper: tuple
    labels: tuple = ()

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise ValueError("lower and upper bounds differ in length")
        for k, (a, b) in enumerate(zip(lo, hi)):
            if not a < b:
                raise ValueError(f"dimension {k}: lower {a} is not below upper {b}")
        labels = tuple(self.labels) or tuple(f"x{k}" for k in range(len(lo)))
        if len(labels) != len(lo):
            raise ValueError("labels and bounds differ in length")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "labels", labels)

    @property
    def dims(self):
        return len(self.lower)

    def bounds(self, split="train"):
        """(lower, upper) arrays of ``split`` after range reduction."""
        lo, hi = np.array(self.lower), np.array(self.upper)
        r = RANGE_REDUCTION[split] * (hi - lo)
        return lo + r, hi - r

    def to_list(self):
        return [{"label": l, "min": a, "max": b} for l, a, b in zip(self.labels, self.lower, self.upper)]

    @classmethod
    def from_list(cls, items):
        return cls(tuple(d["min"] for d in items), tuple(d["max"] for d in items),
                   tuple(d["label"] for d in items))


def sample_design(space, counts, scrambled=False, seed=0, starts=None):
    """Tagged design points.

    Parameters
    ----------
    space : DesignSpace
    counts : mapping
        Number of points per split (``train``, ``validation``, ``test``).
    scrambled : bool
    seed : int
        Scrambling seed.
    starts : mapping, optional
        First sequence index per split; by default the splits take
        consecutive blocks starting at 1 in the order train, validation, test.

    Returns
    -------
    dict
        Split name to (n, dims) array.
    """
    perms = scramble_permutations(space.dims, seed) if scrambled else None
    out = {}
    nxt = 1
    for split in SPLITS:
        n = int(counts.get(split, 0))
        if n < 0:
            raise ValueError(f"negative count for split '{split}'")
        start = nxt if starts is None or split not in starts else int(starts[split])
        u = halton_sequence(n, space.dims, start, scrambled, seed, perms)
        lo, hi = space.bounds(split)
        out[split] = lo + u * (hi - lo)
        nxt = start + n
    return out


def star_discrepancy_1d(points):
    """Exact star discrepancy of a 1D point set in [0, 1]."""
    x = np.sort(np.asarray(points, float))
    n = len(x)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - x), np.max(x - (i - 1) / n)))


def design_to_dict(space, splits):
    return {"space": space.to_list(),
            "splits": {k: np.asarray(v).tolist() for k, v in splits.items()}}


def save_design(space, splits, path, provenance=None):
    d = design_to_dict(space, splits)
    if provenance:
        d["provenance"] = provenance
    write_json(path, d)


def load_design(path):
    d = read_json(path)
    space = DesignSpace.from_list(d["space"])
    splits = {k: np.asarray(v, float).reshape(-1, space.dims) for k, v in d["splits"].items()}
    return space, splits
