"""Wasserstein distances between uniform empirical measures.

For two clouds of equal size ``n`` with uniform weights the optimal coupling
can be taken to be a permutation, so ``W_p`` reduces to a linear assignment
problem on the cost matrix ``|x_i - y_j|^p``.

Float coordinates are dyadic rationals, so l1 costs and squared euclidean
costs are exact integers on a common ``2**-K`` grid.  Totals of the optimal
assignment are accumulated in that integer arithmetic and rounded once, which
makes the reported value independent of which of several tied optimal
permutations the solver returns.  Euclidean ``W_1`` in dimension >= 2 (square
roots) is summed with ``math.fsum``, which is correctly rounded and so also
independent of summation order.
"""

import csv
import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ArgumentError

MAX_EXACT = 4096
MAX_BRUTEFORCE = 8
NORMS = ("euclidean", "ell1")


@dataclass(frozen=True)
class PointCloud:
    """Uniformly weighted point cloud, one row per point."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        if not np.all(np.isfinite(pts)):
            raise ArgumentError("point cloud contains non-finite coordinates")
        object.__setattr__(self, "points", pts)

    @classmethod
    def from_states(cls, v, g):
        """Single-neuron cloud from voltage and conductance arrays."""
        return cls(np.column_stack([np.ravel(v), np.ravel(g)]))

    @classmethod
    def from_network(cls, v, g):
        """Network cloud: one row ``(v_1..v_N, g_1..g_N)`` per network replica."""
        return cls(np.concatenate([np.atleast_2d(v), np.atleast_2d(g)], axis=1))

    def __len__(self):
        return self.points.shape[0]

    @property
    def dim(self):
        return self.points.shape[1]

    def header(self):
        if self.dim == 2:
            return ["v", "g"]
        n = self.dim // 2
        return [f"v_{i}" for i in range(1, n + 1)] + [f"g_{i}" for i in range(1, n + 1)]

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow(self.header())
            for row in self.points:
                w.writerow([repr(float(x)) for x in row])

    @classmethod
    def from_csv(cls, path, columns=None):
        """Read a cloud (or the ``v,g`` columns of a trajectory CSV)."""
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = [h.strip() for h in next(reader)]
            rows = [[float(x) for x in row] for row in reader if row]
        data = np.array(rows, dtype=np.float64).reshape(len(rows), len(header))
        if columns is None:
            columns = [h for h in header if h != "t"]
        idx = [header.index(c) for c in columns]
        return cls(data[:, idx])


def cost_matrix(x, y, p=1, norm="euclidean"):
    if norm not in NORMS:
        raise ArgumentError(f"unknown ground norm {norm!r}; expected one of {NORMS}")
    if p not in (1, 2):
        raise ArgumentError(f"order p must be 1 or 2, got {p}")
    diff = x[:, None, :] - y[None, :, :]
    if norm == "euclidean":
        sq = np.sum(diff * diff, axis=-1)
        return sq if p == 2 else np.sqrt(sq)
    d = np.sum(np.abs(diff), axis=-1)
    return d * d if p == 2 else d


def _assignment_total(C, perm):
    """Correctly rounded total cost of one assignment."""
    return math.fsum(C[np.arange(C.shape[0]), perm].tolist())


def _finish(total, n, p):
    mean = total / n
    return float(mean) if p == 1 else float(math.sqrt(mean))


def _exact_route(dim, p, norm):
    return norm == "ell1" or p == 2 or dim == 1


def _integer_grid(x, y):
    """Coordinates as Python ints on a shared ``2**-K`` grid, and ``K``."""
    ratios = [float(t).as_integer_ratio() for t in np.concatenate([x.ravel(), y.ravel()])]
    K = max((den.bit_length() - 1 for _, den in ratios), default=0)
    ints = [num << (K - (den.bit_length() - 1)) for num, den in ratios]
    X = np.array(ints[:x.size], dtype=object).reshape(x.shape)
    Y = np.array(ints[x.size:], dtype=object).reshape(y.shape)
    return X, Y, K


def _int_cost(X, Y, p, norm):
    """Exact cost of every row pair ``(X[i], Y[i])`` in units of ``2**(-K * power)``."""
    diff = X - Y
    if norm == "ell1" or X.shape[1] == 1:
        s = np.array([sum(abs(d) for d in row) for row in diff], dtype=object)
        return (s * s, 2) if p == 2 else (s, 1)
    return np.array([sum(d * d for d in row) for row in diff], dtype=object), 2


def _finish_exact(total, n, p, K, power):
    mean = float(Fraction(int(total), n << (K * power)))
    return mean if p == 1 else math.sqrt(mean)


def _check_pair(c1, c2):
    x, y = _points(c1), _points(c2)
    if x.shape != y.shape:
        raise ArgumentError(f"clouds must have equal size and dimension, got {x.shape} and {y.shape}; "
                            "use w_subsampled for unequal clouds")
    return x, y


def _points(c):
    return c.points if isinstance(c, PointCloud) else PointCloud(c).points


def w_exact(c1, c2, p=1, norm="euclidean"):
    """Exact ``W_p`` between equal-size uniform clouds via optimal assignment."""
    x, y = _check_pair(c1, c2)
    n = x.shape[0]
    if n > MAX_EXACT:
        raise ArgumentError(f"w_exact supports at most {MAX_EXACT} points, got {n}")
    C = cost_matrix(x, y, p, norm)
    _, cols = linear_sum_assignment(C)
    if _exact_route(x.shape[1], p, norm):
        X, Y, K = _integer_grid(x, y)
        costs, power = _int_cost(X, Y[cols], p, norm)
        return _finish_exact(sum(costs), n, p, K, power)
    return _finish(_assignment_total(C, cols), n, p)


def w_bruteforce(c1, c2, p=1, norm="euclidean"):
    """Exhaustive minimum over all ``n!`` permutations (test oracle, ``n <= 8``)."""
    x, y = _check_pair(c1, c2)
    n = x.shape[0]
    if n > MAX_BRUTEFORCE:
        raise ArgumentError(f"w_bruteforce supports at most {MAX_BRUTEFORCE} points, got {n}")
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    if _exact_route(x.shape[1], p, norm):
        X, Y, K = _integer_grid(x, y)
        pair = np.empty((n, n), dtype=object)
        for i in range(n):
            pair[i], power = _int_cost(np.repeat(X[i:i + 1], n, axis=0), Y, p, norm)
        best = min(sum(pair[i, perm[i]] for i in range(n)) for perm in perms.tolist())
        return _finish_exact(best, n, p, K, power)
    C = cost_matrix(x, y, p, norm)
    return _finish(min(_assignment_total(C, perm) for perm in perms), n, p)


def w_subsampled(c1, c2, p=1, norm="euclidean", n_sub=512, reps=8, seed=0):
    """Mean and standard error of ``w_exact`` over random equal-size subsamples.

    Repetition ``r`` draws its subsamples from a generator seeded with
    ``(seed, r)``, so results do not depend on evaluation order.
    """
    x, y = _points(c1), _points(c2)
    if x.shape[1] != y.shape[1]:
        raise ArgumentError("clouds must have the same dimension")
    if n_sub > min(len(x), len(y)) or n_sub < 1:
        raise ArgumentError(f"n_sub={n_sub} must be in [1, {min(len(x), len(y))}]")
    if reps < 2:
        raise ArgumentError("reps must be >= 2")
    vals = np.empty(reps)
    for r in range(reps):
        rng = np.random.default_rng([int(seed), r])
        i = rng.choice(len(x), n_sub, replace=False)
        j = rng.choice(len(y), n_sub, replace=False)
        vals[r] = w_exact(x[i], y[j], p, norm)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(reps))


def subsampled_report(c1, c2, p=1, norm="euclidean", n_sub=512, reps=8, seed=0):
    est, se = w_subsampled(c1, c2, p, norm, n_sub, reps, seed)
    return {"estimate": est, "std_error": se, "n_sub": n_sub, "reps": reps}
