"""Run statistics: cost-vs-complexity fits and anytime scaling curves."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from scipy import stats

from .errors import DegenerateInput, MissingEvaluations
from .topology import ROOT_ID, InferenceTopology


@dataclass(frozen=True)
class LinearFit:
    slope: float
    bias: float
    n: int
    dof: int
    degenerate: bool
    slope_stderr: float | None = None
    bias_stderr: float | None = None
    slope_t: float | None = None
    bias_t: float | None = None
    slope_p: float | None = None
    bias_p: float | None = None
    slope_ci95: tuple[float, float] | None = None
    bias_ci95: tuple[float, float] | None = None


def fit_topology_sizes(points: list[tuple[float, float]]) -> LinearFit:
    """Ordinary least squares of mean topology size against complexity.

    Two points interpolate exactly; inference statistics need at least one
    residual degree of freedom and are flagged degenerate otherwise.
    """
    if len(points) < 2:
        raise DegenerateInput("need at least two (complexity, size) points")
    xs = [float(c) for c, _ in points]
    ys = [float(s) for _, s in points]
    n = len(points)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    if sxx == 0.0:
        raise DegenerateInput("all complexity values identical")
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in zip(xs, ys))
    slope = sxy / sxx
    bias = mean_y - slope * mean_x

    dof = n - 2
    if dof < 1:
        return LinearFit(slope=slope, bias=bias, n=n, dof=dof, degenerate=True)

    ssr = sum((y - (bias + slope * x)) ** 2 for x, y in zip(xs, ys))
    sigma2 = ssr / dof
    slope_stderr = math.sqrt(sigma2 / sxx)
    bias_stderr = math.sqrt(sigma2 * (1.0 / n + mean_x**2 / sxx))
    crit = float(stats.t.ppf(0.975, dof))

    def _t_and_p(estimate: float, stderr: float) -> tuple[float | None, float | None]:
        if stderr == 0.0:
            return None, None
        t_stat = estimate / stderr
        return t_stat, float(2.0 * stats.t.sf(abs(t_stat), dof))

    slope_t, slope_p = _t_and_p(slope, slope_stderr)
    bias_t, bias_p = _t_and_p(bias, bias_stderr)
    return LinearFit(
        slope=slope,
        bias=bias,
        n=n,
        dof=dof,
        degenerate=False,
        slope_stderr=slope_stderr,
        bias_stderr=bias_stderr,
        slope_t=slope_t,
        bias_t=bias_t,
        slope_p=slope_p,
        bias_p=bias_p,
        slope_ci95=(slope - crit * slope_stderr, slope + crit * slope_stderr),
        bias_ci95=(bias - crit * bias_stderr, bias + crit * bias_stderr),
    )


# ---------------------------------------------------------------------------
# Anytime scaling curves
# ---------------------------------------------------------------------------

def _require_evaluations(topology: InferenceTopology) -> None:
    for state_id, state in topology.states.items():
        if state_id != ROOT_ID and state.evaluation is None:
            raise MissingEvaluations(f"state {state_id} has no evaluation")


def best_by_prefix(topology: InferenceTopology) -> list[dict]:
    """Running best (vqa, clip) after each creation step.

    State ids are dense and creation-ordered, so the prefix of the first n
    states is exactly the run as it stood after step n.
    """
    _require_evaluations(topology)
    rows = []
    best: tuple[Fraction, float] | None = None
    for state_id in sorted(topology.states):
        if state_id == ROOT_ID:
            continue
        evaluation = topology.states[state_id].evaluation
        key = (evaluation.vqa_score, evaluation.clip_i)
        if best is None or key > best:
            best = key
        rows.append(
            {
                "run_id": topology.run_id,
                "n": state_id,
                "best_vqa": str(best[0]),
                "best_clip": best[1],
            }
        )
    return rows


def per_depth_means(topologies: list[InferenceTopology]) -> list[dict]:
    """Mean vqa and clip per depth layer, pooled across runs. Root excluded."""
    buckets: dict[int, list[tuple[Fraction, float]]] = {}
    for topology in topologies:
        _require_evaluations(topology)
        for state_id, state in topology.states.items():
            if state_id == ROOT_ID:
                continue
            buckets.setdefault(state.depth, []).append(
                (state.evaluation.vqa_score, state.evaluation.clip_i)
            )
    rows = []
    for depth in sorted(buckets):
        entries = buckets[depth]
        rows.append(
            {
                "depth": depth,
                "count": len(entries),
                "mean_vqa": float(sum(v for v, _ in entries) / len(entries)),
                "mean_clip": sum(c for _, c in entries) / len(entries),
            }
        )
    return rows


def scaling_report(topologies: list[InferenceTopology], mode: str) -> list[dict]:
    if mode == "steps":
        rows = []
        for topology in topologies:
            rows.extend(best_by_prefix(topology))
        return rows
    if mode == "depth":
        return per_depth_means(topologies)
    raise ValueError(f"unknown scaling mode {mode!r}")


def mean_and_stderr(values: list[float]) -> tuple[float, float]:
    """Sample mean and standard error; stderr 0 for a single value."""
    if not values:
        raise DegenerateInput("no values to aggregate")
    n = len(values)
    mean = sum(values) / n
    if n == 1:
        return mean, 0.0
    var = sum((v - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var / n)
