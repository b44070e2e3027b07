"""Latency engine: finite discrete distributions and operator composition.

Every latency quantity — leaf histogram evidence and every composed
distribution — is a DiscreteDist: a finite, strictly increasing support with
probability masses. Composition follows the operator tree and conditions on
success throughout, so the composed distribution is the latency of a
*successful* journey:

    Series    sum of independent children          (convolution)
    Parallel  max over children (all must succeed)
    Race      min over the children that succeed
    Cond      branch mixture, reweighted by branch success
    KofN      k-th smallest latency among succeeding children given >= k
    Timeout   body-within-deadline vs fallback mixture

Race/KofN/Cond weights therefore involve child success probabilities; for
KofN the identity P(k-th among succeeding <= x, >= k succeed) =
PoissonBinomial_tail_k(A_i * F_i(x)) makes the conditioned form exact, and it
degenerates to Race at k=1 and Parallel at k=n. Cross-leaf independence is
assumed in both modes; failure-domain correlation affects availability only.

Two histogram readings: "point" places bucket mass at midpoints, while
"conservative" places it at upper edges and stochastically dominates point
mode. Pessimistic-mode composition pairs with conservative histograms and
minimizing branch endpoints; optimistic pairs with point and maximizing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from .diagnostics import ResourceLimitError
from .model import (
    Cond, EvidenceModel, JourneyExpr, KofN, LatencyEvidence, Leaf, Parallel,
    ProbEstimate, Race, Series, Timeout, children_of, leaf_names, walk,
)

CAPACITY = 4096          # max support points after any operation
_PRUNE_EPS = 1e-15       # masses below this are dropped (sum stays within 1e-9)
_MASS_TOL = 1e-9

PESSIMISTIC = "pessimistic"
OPTIMISTIC = "optimistic"


class DegenerateTruncation(ValueError):
    """Raised when truncation keeps zero probability mass."""


# ---------------------------------------------------------------------------
# DiscreteDist
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteDist:
    """Finite weighted support; values strictly increasing, masses sum to 1.

    `samples` is the effective evidence sample count (minimum over
    contributing leaves); None marks a purely analytic distribution.
    `capped` records that capacity re-gridding happened somewhere upstream.
    """

    values: np.ndarray
    masses: np.ndarray
    samples: int | None = None
    capped: bool = False

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64, copy=True)
        masses = np.array(self.masses, dtype=np.float64, copy=True)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "masses", masses)
        if values.ndim != 1 or values.shape != masses.shape or len(values) == 0:
            raise ValueError("support and masses must be matching nonempty vectors")
        if len(values) > CAPACITY:
            raise ValueError(f"support exceeds capacity {CAPACITY}")
        if np.any(np.diff(values) <= 0):
            raise ValueError("support values must be strictly increasing")
        if np.any(values < 0):
            raise ValueError("latency values must be nonnegative")
        if np.any(masses < 0):
            raise ValueError("masses must be nonnegative")
        total = float(masses.sum())
        if abs(total - 1.0) > _MASS_TOL:
            raise ValueError(f"masses sum to {total}, expected 1")
        values.setflags(write=False)
        masses.setflags(write=False)

    @classmethod
    def from_pairs(cls, pairs, samples: int | None = None) -> "DiscreteDist":
        vals = np.asarray([p[0] for p in pairs], dtype=np.float64)
        mass = np.asarray([p[1] for p in pairs], dtype=np.float64)
        return _finalize(vals, mass, samples, False)

    @classmethod
    def delta(cls, value: float) -> "DiscreteDist":
        return cls(np.asarray([value], dtype=np.float64),
                   np.asarray([1.0], dtype=np.float64))

    @property
    def support(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.masses.tolist()))

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.masses)

    def cdf_at(self, x) -> np.ndarray | float:
        """P(value <= x), closed boundary; vectorized over x."""
        cum = np.concatenate(([0.0], self.cdf()))
        idx = np.searchsorted(self.values, np.asarray(x, dtype=np.float64),
                              side="right")
        out = cum[idx]
        return float(out) if np.isscalar(x) or np.asarray(x).ndim == 0 else out

    def max_value(self) -> float:
        return float(self.values[-1])


def _min_samples(*parts) -> int | None:
    counts = [p.samples for p in parts if p.samples is not None]
    return min(counts) if counts else None


def _regrid(values: np.ndarray, masses: np.ndarray):
    """Conservative capacity re-grid: merge runs into their highest value."""
    cum = np.cumsum(masses)
    total = cum[-1]
    targets = total * np.arange(1, CAPACITY + 1) / CAPACITY
    ends = np.searchsorted(cum, targets - 1e-12, side="left")
    ends = np.unique(np.minimum(ends, len(values) - 1))
    ends[-1] = len(values) - 1
    starts = np.concatenate(([0], ends[:-1] + 1))
    return values[ends], np.add.reduceat(masses, starts)


def _finalize(values: np.ndarray, masses: np.ndarray, samples: int | None,
              capped: bool) -> DiscreteDist:
    """Merge duplicates, prune dust, cap capacity; the one dist constructor."""
    order = np.argsort(values, kind="stable")
    values, masses = values[order], masses[order]
    uniq, inverse = np.unique(values, return_inverse=True)
    if len(uniq) != len(values):
        masses = np.bincount(inverse, weights=masses, minlength=len(uniq))
        values = uniq
    masses = np.where(masses < 0, 0.0, masses)
    keep = masses >= _PRUNE_EPS
    if not np.all(keep):
        if not np.any(keep):
            raise ValueError("distribution lost all mass")
        values, masses = values[keep], masses[keep]
    if len(values) > CAPACITY:
        values, masses = _regrid(values, masses)
        capped = True
    return DiscreteDist(values, masses, samples, capped)


# ---------------------------------------------------------------------------
# Leaf histograms
# ---------------------------------------------------------------------------

def from_histogram(ev: LatencyEvidence, mode: str) -> DiscreteDist:
    """Turn cumulative histogram evidence into a distribution.

    point: bucket mass at the midpoint (first bucket: half its upper edge).
    conservative: bucket mass at the upper edge; dominates point mode.
    """
    if mode not in (PESSIMISTIC, OPTIMISTIC, "point", "conservative"):
        raise ValueError(f"unknown histogram mode {mode!r}")
    conservative = mode in (PESSIMISTIC, "conservative")
    edges = np.asarray([b[0] for b in ev.buckets], dtype=np.float64)
    counts = np.asarray([b[1] for b in ev.buckets], dtype=np.float64)
    inc = np.diff(counts, prepend=0.0)
    if conservative:
        values = edges
    else:
        values = (np.concatenate(([0.0], edges[:-1])) + edges) / 2.0
    return _finalize(values, inc / float(ev.samples), ev.samples, False)


# ---------------------------------------------------------------------------
# Primitive operations (Table-style, unconditional)
# ---------------------------------------------------------------------------

def convolve(a: DiscreteDist, b: DiscreteDist) -> DiscreteDist:
    """Sum of independent variables: all-pairs values, product masses."""
    values = (a.values[:, None] + b.values[None, :]).ravel()
    masses = (a.masses[:, None] * b.masses[None, :]).ravel()
    return _finalize(values, masses, _min_samples(a, b), a.capped or b.capped)


def _grid_and_cdfs(dists) -> tuple[np.ndarray, np.ndarray]:
    grid = np.unique(np.concatenate([d.values for d in dists]))
    cdfs = np.vstack([d.cdf_at(grid) for d in dists])
    return grid, cdfs


def _from_cdf(grid: np.ndarray, cdf: np.ndarray, samples, capped) -> DiscreteDist:
    return _finalize(grid, np.diff(cdf, prepend=0.0), samples, capped)


def max_indep(dists) -> DiscreteDist:
    """Max of independent variables: CDF product on the merged grid."""
    dists = list(dists)
    grid, cdfs = _grid_and_cdfs(dists)
    return _from_cdf(grid, np.prod(cdfs, axis=0), _min_samples(*dists),
                     any(d.capped for d in dists))


def min_indep(dists) -> DiscreteDist:
    """Min of independent variables: survival product on the merged grid."""
    dists = list(dists)
    grid, cdfs = _grid_and_cdfs(dists)
    return _from_cdf(grid, 1.0 - np.prod(1.0 - cdfs, axis=0),
                     _min_samples(*dists), any(d.capped for d in dists))


def mixture(p: float, a: DiscreteDist, b: DiscreteDist) -> DiscreteDist:
    """Weighted union of supports: `a` with probability p, else `b`."""
    if not 0.0 <= p <= 1.0:
        raise ValueError("mixture weight outside [0, 1]")
    values = np.concatenate([a.values, b.values])
    masses = np.concatenate([p * a.masses, (1.0 - p) * b.masses])
    return _finalize(values, masses, _min_samples(a, b), a.capped or b.capped)


def _pb_tail(k: int, probs: np.ndarray):
    """Pr[at least k of independent Bernoulli(probs) succeed].

    probs has shape (n,) for a scalar result or (n, G) for a per-grid-point
    result; exact O(n^2) dynamic program, fixed summation order.
    """
    probs = np.asarray(probs, dtype=np.float64)
    scalar = probs.ndim == 1
    if scalar:
        probs = probs[:, None]
    n = probs.shape[0]
    if not 1 <= k <= n:
        raise ValueError("order k outside 1..n")
    state = np.zeros((n + 1,) + probs.shape[1:], dtype=np.float64)
    state[0] = 1.0
    for i in range(n):
        p = probs[i]
        state[1:] = state[1:] * (1.0 - p) + state[:-1] * p
        state[0] = state[0] * (1.0 - p)
    tail = state[k:].sum(axis=0)
    return float(tail[0]) if scalar else tail


def order_statistic(k: int, dists) -> DiscreteDist:
    """k-th smallest of independent variables (all participating).

    Per grid point x: Pr[at least k children <= x] via the Poisson-binomial
    tail over per-child CDF values, differenced back to masses.
    """
    dists = list(dists)
    grid, cdfs = _grid_and_cdfs(dists)
    return _from_cdf(grid, _pb_tail(k, cdfs), _min_samples(*dists),
                     any(d.capped for d in dists))


def truncate_renorm(d: DiscreteDist, t: float) -> tuple[DiscreteDist, float]:
    """Conditional distribution given value <= t, plus the mass within t."""
    keep = d.values <= t
    within = float(d.masses[keep].sum())
    if within <= 0.0:
        raise DegenerateTruncation(f"no mass at or below {t}")
    return (_finalize(d.values[keep], d.masses[keep] / within, d.samples,
                      d.capped), within)


def shift(d: DiscreteDist, t: float) -> DiscreteDist:
    """Add a constant delay t to every support value."""
    if t < 0:
        raise ValueError("shift must be nonnegative")
    return DiscreteDist(d.values + t, d.masses, d.samples, d.capped)


# ---------------------------------------------------------------------------
# Quantiles with a distribution-free upper band
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuantileResult:
    point: float
    upper: float
    percentile: float
    delta: float
    effective_samples: int | str  # sample count or "analytic"


def dkw_epsilon(samples: int | None, delta: float) -> float:
    """Half-width of the distribution-free CDF band; 0 for analytic inputs."""
    if samples is None:
        return 0.0
    return math.sqrt(math.log(2.0 / delta) / (2.0 * samples))


def quantile(d: DiscreteDist, p: float, delta: float = 0.05) -> QuantileResult:
    """Point quantile plus an upper value adjusted for finite evidence.

    upper is the smallest support value whose CDF clears p by the band
    epsilon = sqrt(ln(2/delta)/(2n)); when the band pushes past the support
    it falls back to the maximum support value.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("percentile must lie in (0, 1)")
    cum = d.cdf()
    point_idx = int(np.searchsorted(cum, p - 1e-12, side="left"))
    point_idx = min(point_idx, len(cum) - 1)
    point = float(d.values[point_idx])
    eps = dkw_epsilon(d.samples, delta)
    target = p + eps
    if target > float(cum[-1]) + 1e-12:
        upper = d.max_value()
    else:
        upper_idx = int(np.searchsorted(cum, target - 1e-12, side="left"))
        upper = float(d.values[min(upper_idx, len(cum) - 1)])
    return QuantileResult(point, max(upper, point), p, delta,
                          d.samples if d.samples is not None else "analytic")


# ---------------------------------------------------------------------------
# Success-conditioned composition
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TimeoutQ:
    """Per-Timeout deadline SLI q = P(body succeeds within t).

    lo pairs pessimistic body availability with the conservative-mode CDF,
    hi pairs optimistic with point-mode. The cdf functions evaluate the
    success-conditioned body CDF at t under leaf-availability overrides
    (used by the pattern evaluator and sensitivity recomputation).
    """

    t_ms: int
    lo: float
    hi: float
    cdf_lo: float
    cdf_hi: float
    cdf_lo_fn: Callable[[Mapping[str, float]], float] = field(repr=False)
    cdf_hi_fn: Callable[[Mapping[str, float]], float] = field(repr=False)


def _pick_prob(est: ProbEstimate, v_true: float, v_false: float, pick: str) -> float:
    # affine in p: the extreme sits at an interval endpoint
    if pick == "max":
        return est.hi_value if v_true >= v_false else est.lo_value
    return est.lo_value if v_true >= v_false else est.hi_value


class _Composer:
    """One histogram mode's success-conditioned (availability, latency) recursion.

    Memoized on (node path, overrides restricted to the node's leaves), so
    pattern enumeration over failure domains reuses untouched subtrees.
    `timeout_avail` optionally overrides the availability used in Timeout
    mixture weights at the base composition (the pessimistic production pairing).
    """

    def __init__(self, expr: JourneyExpr, leaf_dists: Mapping[str, DiscreteDist],
                 leaf_avail: Mapping[str, float],
                 branch_probs: Mapping[str, ProbEstimate], pick: str,
                 timeout_avail: Mapping[str, float] | None = None):
        self.nodes: dict[str, JourneyExpr] = dict(walk(expr))
        self.leafsets: dict[str, frozenset] = {
            path: frozenset(leaf_names(node)) for path, node in self.nodes.items()
        }
        self.leaf_dists = leaf_dists
        self.leaf_avail = dict(leaf_avail)
        self.branch_probs = branch_probs
        self.pick = pick
        self.timeout_avail = timeout_avail
        self.memo: dict = {}

    def _key(self, path: str, overrides: Mapping[str, float]):
        scope = self.leafsets[path]
        return path, tuple(sorted((k, v) for k, v in overrides.items() if k in scope))

    def prob_of(self, ref) -> ProbEstimate:
        if ref.is_literal:
            return ProbEstimate(ref.value)
        return self.branch_probs[ref.name]

    def node(self, path: str, overrides: Mapping[str, float] | None = None):
        overrides = overrides or {}
        key = self._key(path, overrides)
        hit = self.memo.get(key)
        if hit is not None:
            return hit
        result = self._compute(path, self.nodes[path], overrides)
        self.memo[key] = result
        return result

    def _compute(self, path: str, node: JourneyExpr, overrides):
        if isinstance(node, Leaf):
            avail = overrides.get(node.name, self.leaf_avail[node.name])
            return avail, self.leaf_dists[node.name]

        kids = [self.node(f"{path}.{i}", overrides)
                for i in range(len(children_of(node)))]

        if isinstance(node, (Series, Parallel)):
            avail = 1.0
            for v, _ in kids:
                avail *= v
            if isinstance(node, Series):
                dist = kids[0][1]
                for _, d in kids[1:]:
                    dist = convolve(dist, d)
            else:
                dist = max_indep([d for _, d in kids])
            return avail, dist

        if isinstance(node, (Race, KofN)):
            k = 1 if isinstance(node, Race) else node.k
            avails = np.asarray([v for v, _ in kids], dtype=np.float64)
            avail = _pb_tail(k, avails)
            dists = [d for _, d in kids]
            if avail <= 0.0:
                # unreachable on success; keep a deterministic placeholder
                dist = order_statistic(min(k, len(dists)), dists)
            else:
                grid, cdfs = _grid_and_cdfs(dists)
                joint = _pb_tail(k, avails[:, None] * cdfs) / avail
                dist = _from_cdf(grid, np.clip(joint, 0.0, 1.0),
                                 _min_samples(*dists),
                                 any(d.capped for d in dists))
            return avail, dist

        if isinstance(node, Cond):
            v_true, d_true = kids[0]
            v_false, d_false = kids[1]
            est = self.prob_of(node.p)
            p = _pick_prob(est, v_true, v_false, self.pick)
            avail = p * v_true + (1.0 - p) * v_false
            w = (p * v_true / avail) if avail > 0.0 else p
            return avail, mixture(min(max(w, 0.0), 1.0), d_true, d_false)

        if isinstance(node, Timeout):
            v_body, d_body = kids[0]
            v_fb, d_fb = kids[1]
            cdf_t = float(d_body.cdf_at(float(node.t_ms)))
            avail_body = v_body
            if self.timeout_avail is not None and not overrides:
                avail_body = self.timeout_avail.get(path, v_body)
            q = avail_body * cdf_t
            avail = q + (1.0 - q) * v_fb
            tail = shift(d_fb, float(node.t_ms))
            if cdf_t <= 0.0:  # zero mass within t: all weight on the fallback
                return avail, tail
            trunc, _within = truncate_renorm(d_body, float(node.t_ms))
            w = (q / avail) if avail > 0.0 else 0.0
            return avail, mixture(min(max(w, 0.0), 1.0), trunc, tail)

        raise TypeError(f"not a journey expression node: {node!r}")


def _leaf_dists(model: EvidenceModel, names, hist_mode: str) -> dict[str, DiscreteDist]:
    return {n: from_histogram(model.leaves[n].latency, hist_mode) for n in names}


@dataclass
class ComposeResult:
    dist: DiscreteDist
    q_values: dict[str, TimeoutQ]
    node_avail: dict[str, float]
    node_dists: dict[str, DiscreteDist]
    mode: str


def build_q_values(expr: JourneyExpr, model: EvidenceModel,
                   domains: Mapping[str, frozenset] | None = None, *,
                   lo_hist: str = "conservative",
                   hi_hist: str = "point") -> dict[str, TimeoutQ]:
    """Per-Timeout q intervals plus override-aware CDF evaluators.

    lo = pessimistic body availability x lo_hist CDF at t;
    hi = optimistic body availability x hi_hist CDF at t.
    Deeper Timeout nodes are resolved first so nested deadlines compose.
    """
    from . import availability  # runtime-only; availability never imports back

    if not any(isinstance(n, Timeout) for _, n in walk(expr)):
        return {}
    if domains is None:
        domains = model.domains
    names = set(leaf_names(expr))
    avail = {n: model.availability_of(n) for n in names}
    lo_comp = _Composer(expr, _leaf_dists(model, names, lo_hist), avail,
                        model.branch_probs, pick="min")
    hi_comp = _Composer(expr, _leaf_dists(model, names, hi_hist), avail,
                        model.branch_probs, pick="max")

    q_values: dict[str, TimeoutQ] = {}
    order = [(p, n) for p, n in walk(expr) if isinstance(n, Timeout)]
    for path, node in reversed(order):  # children before parents
        t = float(node.t_ms)
        body_path = f"{path}.0"

        def cdf_fn(composer, bp=body_path, t_ms=t):
            def at(overrides: Mapping[str, float] | None = None) -> float:
                _, dist = composer.node(bp, overrides or {})
                return float(dist.cdf_at(t_ms))
            return at

        lo_fn, hi_fn = cdf_fn(lo_comp), cdf_fn(hi_comp)
        cdf_lo, cdf_hi = lo_fn({}), hi_fn({})
        body = node.body
        # evaluate at the body's absolute path so nested deadline SLIs resolve
        a_opt = availability.eval_optimistic(body, model, q_values,
                                             path=body_path)
        a_pess = availability.eval_pessimistic(body, model, domains, q_values,
                                               path=body_path)
        q_values[path] = TimeoutQ(
            t_ms=node.t_ms,
            lo=a_pess * cdf_lo, hi=a_opt * cdf_hi,
            cdf_lo=cdf_lo, cdf_hi=cdf_hi,
            cdf_lo_fn=lo_fn, cdf_hi_fn=hi_fn,
        )
    return q_values


def compose_detail(expr: JourneyExpr, model: EvidenceModel, mode: str,
                   domains: Mapping[str, frozenset] | None = None,
                   q_values: dict[str, TimeoutQ] | None = None) -> ComposeResult:
    """Full composition in one mode, with per-node results for tracing."""
    from . import availability

    if mode not in (PESSIMISTIC, OPTIMISTIC):
        raise ValueError(f"unknown compose mode {mode!r}")
    if domains is None:
        domains = model.domains
    if q_values is None:
        q_values = build_q_values(expr, model, domains)

    names = set(leaf_names(expr))
    avail = {n: model.availability_of(n) for n in names}
    hist = "conservative" if mode == PESSIMISTIC else "point"
    pick = "min" if mode == PESSIMISTIC else "max"

    timeout_avail = None
    if mode == PESSIMISTIC:
        # production pairing: pessimistic availability drives timeout weights
        timeout_avail = {
            path: availability.eval_pessimistic(node.body, model, domains,
                                                q_values, path=f"{path}.0")
            for path, node in walk(expr) if isinstance(node, Timeout)
        }

    comp = _Composer(expr, _leaf_dists(model, names, hist), avail,
                     model.branch_probs, pick=pick, timeout_avail=timeout_avail)
    comp.node("root", {})
    node_avail, node_dists = {}, {}
    for path in comp.nodes:
        v, d = comp.node(path, {})
        node_avail[path], node_dists[path] = v, d
    return ComposeResult(node_dists["root"], q_values, node_avail, node_dists, mode)


def compose(expr: JourneyExpr, model: EvidenceModel, mode: str,
            domains: Mapping[str, frozenset] | None = None
            ) -> tuple[DiscreteDist, dict[str, TimeoutQ]]:
    """Composed success-latency distribution plus per-Timeout q intervals."""
    detail = compose_detail(expr, model, mode, domains)
    return detail.dist, detail.q_values
