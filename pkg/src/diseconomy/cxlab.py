"""Exact checks of decoupling and convex-order inequalities on finite distributions.

``X <=cx Y`` is decided with stop-loss transforms: equal means, and
``E[(X - t)+] <= E[(Y - t)+]`` at every support point of either variable.
Distributions of ``P * S`` with ``P ~ Poisson(1)`` are truncated, and the
neglected tail is carried as explicit slack.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import binom, poisson

from .moments import fractional_bell, poisson_pmf, poisson_truncation

MERGE_TOL = 1e-12
SUPPORT_CAP = 10**6
TAIL_TOL = 1e-13


# ---------------------------------------------------------------------------
# Distributions
# ---------------------------------------------------------------------------


def _stop_loss(values: np.ndarray, probs: np.ndarray, t) -> np.ndarray:
    """``sum_k probs_k (values_k - t)+`` for sorted ``values``, via suffix sums."""
    t = np.asarray(t, dtype=float)
    pv = probs * values
    s1 = np.concatenate([np.cumsum(pv[::-1])[::-1], [0.0]])
    s0 = np.concatenate([np.cumsum(probs[::-1])[::-1], [0.0]])
    k = np.searchsorted(values, t, side="right")
    return np.maximum(s1[k] - t * s0[k], 0.0)


def _merge(values: np.ndarray, probs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    order = np.argsort(values, kind="stable")
    v, p = values[order], probs[order]
    keep = p > 0
    v, p = v[keep], p[keep]
    if v.size == 0:
        raise ValueError("distribution has no positive-probability atoms")
    new_group = np.concatenate([[True], np.diff(v) > MERGE_TOL * np.maximum(1.0, np.abs(v[1:]))])
    idx = np.cumsum(new_group) - 1
    pv = np.bincount(idx, weights=p)
    vv = v[new_group]
    return vv, pv


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite distribution on nonnegative reals; atoms sorted, distinct and merged."""

    values: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        p = np.asarray(self.probs, dtype=float).ravel()
        if v.shape != p.shape:
            raise ValueError("values and probs differ in length")
        if np.any(p < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(p.sum() - 1.0) > 1e-12 * max(1, len(p)):
            raise ValueError(f"probabilities sum to {p.sum():.15g}, not 1")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise ValueError("values must be finite and nonnegative")
        v, p = _merge(v, p)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probs", p)

    @classmethod
    def from_atoms(cls, atoms) -> "DiscreteDistribution":
        atoms = list(atoms.items()) if isinstance(atoms, dict) else list(atoms)
        return cls(np.array([float(a) for a, _ in atoms]), np.array([float(b) for _, b in atoms]))

    @classmethod
    def point(cls, value: float) -> "DiscreteDistribution":
        return cls(np.array([float(value)]), np.array([1.0]))

    @classmethod
    def bernoulli(cls, p: float, scale: float = 1.0) -> "DiscreteDistribution":
        if p >= 1:
            return cls.point(scale)
        if p <= 0:
            return cls.point(0.0)
        return cls(np.array([0.0, scale]), np.array([1 - p, p]))

    def atoms(self) -> dict[float, float]:
        return dict(zip(self.values.tolist(), self.probs.tolist()))

    def mean(self) -> float:
        return float(self.probs @ self.values)

    def expect(self, phi) -> float:
        return float(self.probs @ np.asarray(phi(self.values), dtype=float))

    def moment(self, q: float) -> float:
        return float(self.probs @ np.power(self.values, q))

    def norm(self, q: float) -> float:
        return self.moment(q) ** (1.0 / q)

    def stop_loss(self, t) -> np.ndarray:
        """``E[(X - t)+]`` for each threshold."""
        return _stop_loss(self.values, self.probs, t)


@dataclass(frozen=True)
class JointDistribution:
    """Finite joint law of ``(Y_1, ..., Y_n)``: one row of ``points`` per atom."""

    points: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        p = np.asarray(self.probs, dtype=float).ravel()
        if pts.shape[0] != p.size:
            raise ValueError("need one probability per atom")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12 * max(1, p.size):
            raise ValueError("probabilities must be nonnegative and sum to 1")
        if np.any(pts < 0):
            raise ValueError("values must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", p)

    @property
    def n(self) -> int:
        return self.points.shape[1]

    def marginal(self, i: int) -> DiscreteDistribution:
        return DiscreteDistribution(self.points[:, i], self.probs)

    def marginals(self) -> list[DiscreteDistribution]:
        return [self.marginal(i) for i in range(self.n)]


# ---------------------------------------------------------------------------
# Convex test functions
# ---------------------------------------------------------------------------


class TestConvexFunction:
    """Convex ``phi`` with ``|phi(x)| <= offset + scale * x**power`` for ``x >= 0``."""

    __test__ = False
    offset: float = 0.0
    scale: float = 1.0
    power: float = 1.0

    def __call__(self, x):
        raise NotImplementedError


@dataclass(frozen=True)
class Power(TestConvexFunction):
    q: float

    def __post_init__(self):
        if self.q < 1:
            raise ValueError("Power needs q >= 1")

    def __call__(self, x):
        return np.power(np.asarray(x, dtype=float), self.q)

    @property
    def power(self) -> float:
        return self.q


@dataclass(frozen=True)
class StopLoss(TestConvexFunction):
    threshold: float

    def __call__(self, x):
        return np.maximum(np.asarray(x, dtype=float) - self.threshold, 0.0)


@dataclass(frozen=True)
class Linear(TestConvexFunction):
    slope: float = 1.0
    intercept: float = 0.0

    def __call__(self, x):
        return self.intercept + self.slope * np.asarray(x, dtype=float)

    @property
    def offset(self) -> float:
        return abs(self.intercept)

    @property
    def scale(self) -> float:
        return abs(self.slope)


@dataclass(frozen=True)
class TabulatedTest(TestConvexFunction):
    """Piecewise-linear convex function; the end slopes continue outside the table."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        bp = np.asarray(self.breakpoints, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if bp.size < 2 or bp.shape != vals.shape or np.any(np.diff(bp) <= 0):
            raise ValueError("need >= 2 strictly ascending breakpoints with values")
        slopes = np.diff(vals) / np.diff(bp)
        if np.any(np.diff(slopes) < -1e-12 * np.maximum(1.0, np.abs(slopes[:-1]))):
            raise ValueError("tabulated test function is not convex")

    def _slopes(self):
        return np.diff(self.values) / np.diff(self.breakpoints)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        bp, vals = np.asarray(self.breakpoints), np.asarray(self.values)
        s = self._slopes()
        out = np.interp(x, bp, vals)
        out = np.where(x > bp[-1], vals[-1] + s[-1] * (x - bp[-1]), out)
        return np.where(x < bp[0], vals[0] + s[0] * (x - bp[0]), out)

    @property
    def offset(self) -> float:
        return float(np.max(np.abs(self(np.array([0.0])))))

    @property
    def scale(self) -> float:
        return float(np.max(np.abs(self._slopes())))


# ---------------------------------------------------------------------------
# Sums and Poisson scaling
# ---------------------------------------------------------------------------


class SupportTooLarge(ValueError):
    pass


def independent_sum(dists: Sequence[DiscreteDistribution],
                    cap: int = SUPPORT_CAP) -> DiscreteDistribution:
    """Exact law of a sum of independent variables (atoms merged within 1e-12)."""
    if not dists:
        return DiscreteDistribution.point(0.0)
    v, p = dists[0].values, dists[0].probs
    for d in dists[1:]:
        if v.size * d.values.size > cap:
            raise SupportTooLarge(f"convolution support {v.size * d.values.size} exceeds {cap}")
        v, p = _merge((v[:, None] + d.values[None, :]).ravel(), (p[:, None] * d.probs[None, :]).ravel())
    return DiscreteDistribution(v, p / p.sum())


def sum_of_joint(joint: JointDistribution) -> DiscreteDistribution:
    return DiscreteDistribution(joint.points.sum(axis=1), joint.probs)


@dataclass
class TruncatedMixture:
    """Law of ``P * S`` restricted to ``P <= max_support``.

    ``tail_mean`` bounds ``E[P S ; P > max_support]`` and hence the stop-loss
    error at every threshold.
    """

    values: np.ndarray
    probs: np.ndarray
    max_support: int
    tail_mean: float
    mean: float

    def stop_loss(self, t) -> np.ndarray:
        return _stop_loss(self.values, self.probs, t)


def poisson_scaled(dist: DiscreteDistribution, tol: float = TAIL_TOL,
                   rate: float = 1.0) -> TruncatedMixture:
    mean = dist.mean()
    trunc = poisson_truncation(1.0, tol, rate=rate, scale=max(mean, 1e-300))
    pmf = poisson_pmf(trunc.max_support, rate)
    k = np.arange(trunc.max_support + 1, dtype=float)
    values = (k[:, None] * dist.values[None, :]).ravel()
    probs = (pmf[:, None] * dist.probs[None, :]).ravel()
    v, p = _merge(values, probs)
    return TruncatedMixture(v, p, trunc.max_support, mean * trunc.tail_mass_bound, mean * rate)


def poisson_scale_expectation(dist: DiscreteDistribution, phi: TestConvexFunction,
                              tol: float = 1e-12, rate: float = 1.0) -> float:
    """``E[phi(P * S)]`` with ``P ~ Poisson(rate)`` independent of ``S``, within ``tol``."""
    smax = float(np.max(dist.values))
    power = float(phi.power)
    T = poisson_truncation(power, tol / 2, rate=rate,
                           scale=max(phi.scale * smax ** power, 1e-300)).max_support
    if phi.offset > 0:
        T = max(T, poisson_truncation(0.0, tol / 2, rate=rate, scale=phi.offset).max_support)
    pmf = poisson_pmf(T, rate)
    k = np.arange(T + 1, dtype=float)
    vals = np.asarray(phi((k[:, None] * dist.values[None, :])), dtype=float)
    return float(pmf @ vals @ dist.probs)


# ---------------------------------------------------------------------------
# Convex order
# ---------------------------------------------------------------------------


@dataclass
class CxResult:
    holds: bool
    witness: float | None
    slack: float
    mean_gap: float

    def __bool__(self):
        return self.holds


def cx_dominates(X: DiscreteDistribution, Y, tol: float = 1e-9) -> CxResult:
    """Is ``X <=cx Y``?  ``Y`` may be a :class:`TruncatedMixture`.

    ``slack`` is the smallest ``E[(Y-t)+] - E[(X-t)+]`` over the tested
    thresholds; on failure ``witness`` is the worst threshold (``None`` when
    only the means differ).
    """
    if isinstance(Y, TruncatedMixture):
        y_mean, extra = Y.mean, Y.tail_mean
        y_vals = Y.values
    else:
        y_mean, extra, y_vals = Y.mean(), 0.0, Y.values
    mean_gap = X.mean() - y_mean
    ts = np.union1d(X.values, y_vals)
    diff = Y.stop_loss(ts) + extra - X.stop_loss(ts)
    k = int(np.argmin(diff))
    slack = float(diff[k])
    if slack < -tol:
        return CxResult(False, float(ts[k]), slack, mean_gap)
    if abs(mean_gap) > tol:
        return CxResult(False, None, slack, mean_gap)
    return CxResult(True, None, slack, mean_gap)


# ---------------------------------------------------------------------------
# Decoupling
# ---------------------------------------------------------------------------


@dataclass
class DecouplingReport:
    q: float
    lhs_norm: float
    rhs_norm: float
    holds: bool
    cx_holds: bool
    cx_slack: float
    witness: float | None
    tail_slack: float

    @property
    def norm_slack(self) -> float:
        return self.rhs_norm - self.lhs_norm

    def to_json(self) -> dict:
        return {"q": self.q, "lhs_norm": self.lhs_norm, "rhs_norm": self.rhs_norm,
                "holds": self.holds, "cx_holds": self.cx_holds, "cx_slack": self.cx_slack,
                "witness": self.witness, "tail_slack": self.tail_slack}


def decoupling_check(joint: JointDistribution, q: float, tol: float = 1e-9,
                     cap: int = SUPPORT_CAP) -> DecouplingReport:
    """Compare independent copies of the marginals against ``P`` times the dependent sum."""
    sx = independent_sum(joint.marginals(), cap)
    sy = sum_of_joint(joint)
    return _decoupling_from_sums(sx, sy, q, tol)


def _decoupling_from_sums(sx: DiscreteDistribution, sy: DiscreteDistribution, q: float,
                          tol: float) -> DecouplingReport:
    lhs = sx.norm(q)
    rhs = fractional_bell(q) ** (1.0 / q) * sy.norm(q)
    mix = poisson_scaled(sy)
    cx = cx_dominates(sx, mix, tol)
    return DecouplingReport(q, lhs, rhs, lhs <= rhs + tol, cx.holds, cx.slack, cx.witness,
                            mix.tail_mean)


def random_joint(rng: np.random.Generator, max_n: int = 4, max_atoms: int = 8,
                 denominator: int = 4, max_value: int = 3) -> JointDistribution:
    """Random joint law with small rational values and probabilities."""
    n = int(rng.integers(1, max_n + 1))
    atoms = int(rng.integers(1, max_atoms + 1))
    points = rng.integers(0, max_value * denominator + 1, size=(atoms, n)) / denominator
    weights = rng.integers(1, 10, size=atoms).astype(float)
    return JointDistribution(points, weights / weights.sum())


@dataclass
class CorpusReport:
    seed: int
    size: int
    qs: list[float]
    norm_violations: int
    cx_violations: int
    worst_norm_slack: float
    worst_cx_slack: float
    worst_witness: float | None = None
    failures: list[dict] = field(default_factory=list)

    @property
    def holds(self) -> bool:
        return self.norm_violations == 0 and self.cx_violations == 0

    def to_json(self) -> dict:
        return {"seed": self.seed, "size": self.size, "qs": self.qs,
                "norm_violations": self.norm_violations, "cx_violations": self.cx_violations,
                "worst_norm_slack": self.worst_norm_slack, "worst_cx_slack": self.worst_cx_slack,
                "worst_witness": self.worst_witness, "failures": self.failures[:10]}


def decoupling_corpus(size: int, qs: Sequence[float], seed: int = 0, tol: float = 1e-9,
                      max_n: int = 4, max_atoms: int = 8) -> CorpusReport:
    """Run :func:`decoupling_check` on ``size`` seeded random joints for every ``q``."""
    rng = np.random.default_rng(seed)
    report = CorpusReport(seed, size, [float(q) for q in qs], 0, 0, math.inf, math.inf)
    for item in range(size):
        joint = random_joint(rng, max_n, max_atoms)
        sx = independent_sum(joint.marginals())
        sy = sum_of_joint(joint)
        mix = poisson_scaled(sy)
        cx = cx_dominates(sx, mix, tol)
        if not cx.holds:
            report.cx_violations += 1
            report.failures.append({"item": item, "kind": "cx", "witness": cx.witness})
        if cx.slack < report.worst_cx_slack:
            report.worst_cx_slack, report.worst_witness = cx.slack, cx.witness
        for q in qs:
            slack = fractional_bell(q) ** (1.0 / q) * sy.norm(q) - sx.norm(q)
            report.worst_norm_slack = min(report.worst_norm_slack, slack)
            if slack < -tol:
                report.norm_violations += 1
                report.failures.append({"item": item, "kind": "norm", "q": q, "slack": slack})
    return report


# ---------------------------------------------------------------------------
# Tightness
# ---------------------------------------------------------------------------


@dataclass
class TightnessConstruction:
    """One-hot ``Y`` over ``n`` coordinates (so ``sum Y = 1``) and independent Bernoulli(1/n) ``X``."""

    n: int
    marginal: DiscreteDistribution
    sum_x: DiscreteDistribution
    sum_y: DiscreteDistribution

    def joint(self) -> JointDistribution:
        if self.n > 2000:
            raise SupportTooLarge("explicit one-hot joint is limited to n <= 2000")
        return JointDistribution(np.eye(self.n), np.full(self.n, 1.0 / self.n))

    def ratio(self, phi) -> float:
        """``E[phi(sum X)] / E[phi(P)]``."""
        return self.sum_x.expect(phi) / poisson_scale_expectation(self.sum_y, phi)


def tightness_construction(n: int) -> TightnessConstruction:
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(n + 1)
    pmf = binom.pmf(k, n, 1.0 / n)
    keep = pmf > 0
    pmf = pmf[keep] / pmf[keep].sum()
    return TightnessConstruction(n, DiscreteDistribution.bernoulli(1.0 / n),
                                 DiscreteDistribution(k[keep].astype(float), pmf),
                                 DiscreteDistribution.point(1.0))


def tightness_second_moment(n: int) -> float:
    """``E[(sum X)^2] = 1 + (n - 1) / n`` for ``n`` independent Bernoulli(1/n)."""
    return 1.0 + (n - 1) / n


# ---------------------------------------------------------------------------
# Supporting lemmas
# ---------------------------------------------------------------------------


@dataclass
class ComparisonResult:
    holds: bool
    lhs: float
    rhs: float


def bernoulli_vs_poisson_check(p: float, phi, tol: float = 1e-9) -> ComparisonResult:
    """``E[phi(B)] <= E[phi(P_p)]`` for ``B ~ Bernoulli(p)`` and ``P_p ~ Poisson(p)``."""
    if not 0 < p <= 1:
        raise ValueError("p must lie in (0, 1]")
    if isinstance(phi, (int, float)):
        phi = Power(float(phi))
    lhs = DiscreteDistribution.bernoulli(p).expect(phi)
    rhs = poisson_scale_expectation(DiscreteDistribution.point(1.0), phi, tol / 10, rate=p)
    return ComparisonResult(lhs <= rhs + tol, lhs, rhs)


def exclusive_chain_check(alphas: Sequence[float], probs: Sequence[float],
                          tol: float = 1e-9) -> tuple[CxResult, CxResult]:
    """Exactly one of ``n`` indicators fires (with ``probs``); sums weighted by ``alphas``.

    Returns the two comparisons exclusive <=cx independent and
    independent <=cx ``P`` times exclusive.
    """
    alphas = np.asarray(alphas, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if abs(probs.sum() - 1.0) > 1e-12:
        raise ValueError("indicator probabilities must sum to 1")
    exclusive = DiscreteDistribution(alphas, probs)
    independent = independent_sum([DiscreteDistribution.bernoulli(p, a)
                                   for a, p in zip(alphas, probs)])
    return (cx_dominates(exclusive, independent, tol),
            cx_dominates(independent, poisson_scaled(exclusive), tol))


def poisson_conditional_mean(rate_a: float, rate_b: float, k: int) -> float:
    """``E[P_a | P_a + P_b = k]`` for independent Poisson variables, by direct summation."""
    j = np.arange(k + 1)
    w = poisson.pmf(j, rate_a) * poisson.pmf(k - j, rate_b)
    return float(w @ j / w.sum())


def bernoulli_integer_check(joint: JointDistribution, q: float,
                            tol: float = 1e-9) -> DecouplingReport:
    """Independent Bernoulli ``X_i`` with ``E[X_i] = E[Y_i]`` against integer-valued ``Y``."""
    if not np.allclose(joint.points, np.round(joint.points)):
        raise ValueError("Y must be integer valued")
    means = joint.probs @ joint.points
    if np.any(means > 1 + 1e-12):
        raise ValueError("Bernoulli marginals need E[Y_i] <= 1")
    sx = independent_sum([DiscreteDistribution.bernoulli(float(m)) for m in means])
    return _decoupling_from_sums(sx, sum_of_joint(joint), q, tol)


# ---------------------------------------------------------------------------
# Negatively associated families
# ---------------------------------------------------------------------------


def one_hot_joint(probs: Sequence[float], weights: Sequence[float] | None = None) -> JointDistribution:
    probs = np.asarray(probs, dtype=float)
    w = np.ones(len(probs)) if weights is None else np.asarray(weights, dtype=float)
    return JointDistribution(np.diag(w), probs)


def without_replacement_joint(population: int, draws: int,
                              weights: Sequence[float] | None = None) -> JointDistribution:
    w = np.ones(population) if weights is None else np.asarray(weights, dtype=float)
    subsets = list(itertools.combinations(range(population), draws))
    pts = np.zeros((len(subsets), population))
    for r, s in enumerate(subsets):
        pts[r, list(s)] = w[list(s)]
    return JointDistribution(pts, np.full(len(subsets), 1.0 / len(subsets)))


def comonotone_joint(marginals: Sequence[DiscreteDistribution]) -> JointDistribution:
    """All coordinates driven by one uniform through their quantile functions."""
    cuts = np.unique(np.concatenate([[0.0, 1.0]] + [np.cumsum(m.probs) for m in marginals]))
    cuts = np.clip(cuts, 0.0, 1.0)
    cuts = np.unique(cuts)
    mids = (cuts[:-1] + cuts[1:]) / 2
    widths = np.diff(cuts)
    keep = widths > 1e-15
    pts = np.column_stack([m.values[np.minimum(np.searchsorted(np.cumsum(m.probs), mids[keep]),
                                               len(m.values) - 1)] for m in marginals])
    return JointDistribution(pts, widths[keep] / widths[keep].sum())


def product_joint(marginals: Sequence[DiscreteDistribution]) -> JointDistribution:
    pts, probs = [], []
    for combo in itertools.product(*[list(zip(m.values, m.probs)) for m in marginals]):
        pts.append([v for v, _ in combo])
        probs.append(math.prod(p for _, p in combo))
    return JointDistribution(np.array(pts), np.array(probs))


@dataclass
class NAReport:
    family: str
    q: float
    lhs_norm: float
    independent_norm: float
    couplings: dict[str, DecouplingReport]

    @property
    def holds(self) -> bool:
        return all(r.holds and r.cx_holds for r in self.couplings.values())

    def to_json(self) -> dict:
        return {"family": self.family, "q": self.q, "lhs_norm": self.lhs_norm,
                "independent_norm": self.independent_norm, "holds": self.holds,
                "couplings": {k: v.to_json() for k, v in self.couplings.items()}}


def na_decoupling_experiment(family: str, size: Sequence[int] | int, q: float,
                             tol: float = 1e-9, weights: Sequence[float] | None = None,
                             couplings: Sequence[str] = ("same", "independent", "comonotone")
                             ) -> NAReport:
    """Negatively associated ``X`` from a standard family against ``P`` times ``Y``.

    ``family`` is ``one-hot-categorical`` (``size`` = number of slots, uniform)
    or ``sampling-without-replacement`` (``size`` = (population, draws)).
    Each coupling names a joint law of ``Y`` with the same marginals as ``X``:
    ``same`` (``Y = X``), ``independent`` or ``comonotone``.
    """
    if family == "one-hot-categorical":
        k = int(size if np.ndim(size) == 0 else size[0])
        joint = one_hot_joint(np.full(k, 1.0 / k), weights)
    elif family == "sampling-without-replacement":
        population, draws = (int(s) for s in size)
        if not 0 < draws <= population:
            raise ValueError("need 0 < draws <= population")
        joint = without_replacement_joint(population, draws, weights)
    else:
        raise ValueError(f"unknown family {family!r}")
    sx = sum_of_joint(joint)
    marg = joint.marginals()
    indep = independent_sum(marg)
    builders = {"same": lambda: joint, "independent": lambda: product_joint(marg),
                "comonotone": lambda: comonotone_joint(marg)}
    reports = {}
    for name in couplings:
        if name not in builders:
            raise ValueError(f"unknown coupling {name!r}")
        reports[name] = _decoupling_from_sums(sx, sum_of_joint(builders[name]()), q, tol)
    return NAReport(family, float(q), sx.norm(q), indep.norm(q), reports)

