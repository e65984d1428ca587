"""What an eavesdropper learns from watching health telemetry.

An episode is a sequence of (health, action) samples.  Damage per step
is Poisson with a per-action rate, so anyone who intercepts the stream
can estimate those rates by averaging the observed drops.  This module
provides the degradation model, a simulator, the interceptor's
estimator, and the two quantities that turn the threat into numbers: a
Chebyshev-style bound on how often the estimate lands within epsilon of
the truth, and its inversion (how many samples the interceptor needs).

All estimator arithmetic is exact: health values are integers and
estimates are `Fraction`s.  Float arguments to the bound helpers are
read as the decimal literal they print as (so 0.05 means 1/20, not the
nearest binary double), which keeps the published numbers reproducible.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple

__all__ = [
    "LeakageError",
    "HealthModel",
    "EpisodeTrace",
    "ActionEstimate",
    "ActionCheck",
    "DEFAULT_RATES",
    "simulate",
    "estimate",
    "deviation_bound",
    "required_samples",
    "monte_carlo_check",
    "leakage_report",
    "parse_trace",
    "emit_trace",
]


class LeakageError(ValueError):
    """Invalid model, trace, policy, or bound argument."""


# Plausible wear magnitudes for a two-action system (a gentle and an
# aggressive maneuver).  Defaults for demos and the CLI; nothing in the
# math depends on them.
DEFAULT_RATES = (0.01, 0.05)


def _frac(x) -> Fraction:
    """Exact rational view of a number.

    Floats go through their shortest decimal repr, so the caller's
    ``0.05`` becomes 1/20 rather than the binary double's exact value.
    """
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


@dataclass(frozen=True)
class HealthModel:
    """Per-action Poisson damage rates; action i uses ``rates[i-1]``."""

    rates: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if not self.rates:
            raise LeakageError("need at least one action rate")
        for i, r in enumerate(self.rates, start=1):
            if r < 0:
                raise LeakageError(f"rate for action {i} is negative: {r}")

    @property
    def m(self) -> int:
        return len(self.rates)


@dataclass(frozen=True)
class EpisodeTrace:
    """Observed (health, action) samples with the action count ``m``.

    Health must never increase (the model only takes damage) and every
    action index must lie in 1..m.
    """

    m: int
    steps: tuple

    def __post_init__(self) -> None:
        object.__setattr__(self, "steps", tuple((int(h), int(a)) for h, a in self.steps))
        if self.m < 1:
            raise LeakageError(f"action count must be >= 1, got {self.m}")
        prev = None
        for n, (h, a) in enumerate(self.steps):
            if not 1 <= a <= self.m:
                raise LeakageError(f"step {n}: action {a} out of range 1..{self.m}")
            if prev is not None and h > prev:
                raise LeakageError(f"step {n}: health rose from {prev} to {h}")
            prev = h

    def __len__(self) -> int:
        return len(self.steps)


def _poisson(rng: random.Random, lam: float) -> int:
    # Inversion by sequential search.  Exact for the rates we care
    # about; large means are split so exp(-lam) stays representable.
    if lam <= 0.0:
        return 0
    total = 0
    while lam > 500.0:
        total += _poisson(rng, 500.0)
        lam -= 500.0
    u = rng.random()
    p = math.exp(-lam)
    c = p
    k = 0
    while u > c:
        k += 1
        p *= lam / k
        c += p
        if p == 0.0:
            break
    return total + k


def _policy_fn(model: HealthModel, policy, rng: random.Random):
    """Turn a policy into ``t -> action``.

    A sequence of ints is followed positionally (cycling if the trace
    outlives it); a sequence of floats is a stationary distribution over
    the m actions, sampled independently each step.
    """
    items = list(policy)
    if not items:
        raise LeakageError("empty policy")
    if all(isinstance(x, int) and not isinstance(x, bool) for x in items):
        for a in items:
            if not 1 <= a <= model.m:
                raise LeakageError(f"policy action {a} out of range 1..{model.m}")
        return lambda t: items[t % len(items)]
    try:
        probs = [float(x) for x in items]
    except (TypeError, ValueError):
        raise LeakageError("policy must be all action indices or all probabilities")
    if len(probs) != model.m or any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-9:
        raise LeakageError("invalid distribution")
    cum = []
    acc = 0.0
    for p in probs:
        acc += p
        cum.append(acc)
    cum[-1] = 1.0

    def draw(t: int) -> int:
        u = rng.random()
        for i, c in enumerate(cum):
            if u <= c:
                return i + 1
        return model.m

    return draw


def simulate(
    model: HealthModel,
    policy,
    horizon: int,
    seed: int,
    *,
    start_health: int = 100,
) -> EpisodeTrace:
    """Run the degradation process for ``horizon`` steps.

    Returns horizon+1 samples, or fewer if health is exhausted: the
    first sample at health 0 ends the trace.  Damage at step t is one
    Poisson draw at the rate of the action taken there.  The same seed
    always yields the same trace; a fixed action sequence consumes no
    randomness for its choices, so its draws depend only on the seed
    and the rates.
    """
    if horizon < 1:
        raise LeakageError(f"horizon must be >= 1, got {horizon}")
    if start_health < 1:
        raise LeakageError(f"start health must be >= 1, got {start_health}")
    rng = random.Random(seed)
    act = _policy_fn(model, policy, rng)
    steps = []
    h = start_health
    for t in range(horizon + 1):
        a = act(t)
        steps.append((h, a))
        if h == 0 or t == horizon:
            break
        h = max(0, h - _poisson(rng, model.rates[a - 1]))
    return EpisodeTrace(model.m, tuple(steps))


class ActionEstimate(NamedTuple):
    lambda_hat: Fraction
    samples: int


def estimate(trace: EpisodeTrace) -> dict:
    """The interceptor's rate estimate per action.

    For each action, average the health drops over the steps that took
    it and have a successor sample; the final step has none and is
    never counted.  Actions without such steps get no entry.  Exact
    rationals throughout, so the result is reproducible arithmetic,
    not floating point.
    """
    if len(trace) < 2:
        raise LeakageError(f"trace too short: need at least 2 steps, got {len(trace)}")
    drops: dict = {}
    for (h0, a), (h1, _) in zip(trace.steps, trace.steps[1:]):
        drops.setdefault(a, []).append(h0 - h1)
    return {
        a: ActionEstimate(Fraction(sum(ds), len(ds)), len(ds))
        for a, ds in sorted(drops.items())
    }


def deviation_bound(lam, n: int, epsilon) -> Fraction:
    """Worst-case probability that an n-sample estimate misses by >= epsilon.

    ``min(1, lam / (n * epsilon**2))``, exact.  A zero rate gives a
    zero bound: the estimate is then always exactly right.
    """
    lam = _frac(lam)
    eps = _frac(epsilon)
    if lam < 0:
        raise LeakageError(f"rate must be >= 0, got {lam}")
    if eps <= 0:
        raise LeakageError(f"epsilon must be > 0, got {eps}")
    n = int(n)
    if n < 1:
        raise LeakageError(f"sample count must be >= 1, got {n}")
    if lam == 0:
        return Fraction(0)
    return min(Fraction(1), lam / (n * eps * eps))


def required_samples(lam, epsilon, delta) -> int:
    """Samples needed before the miss probability drops to delta.

    Smallest N with ``lam / (N * epsilon**2) <= delta``, i.e. the
    ceiling of ``lam / (delta * epsilon**2)``.  A zero rate needs just
    one sample.
    """
    lam = _frac(lam)
    eps = _frac(epsilon)
    delta = _frac(delta)
    if lam < 0:
        raise LeakageError(f"rate must be >= 0, got {lam}")
    if eps <= 0:
        raise LeakageError(f"epsilon must be > 0, got {eps}")
    if not 0 < delta < 1:
        raise LeakageError(f"delta must be in (0, 1), got {delta}")
    if lam == 0:
        return 1
    return max(1, math.ceil(lam / (delta * eps * eps)))


@dataclass(frozen=True)
class ActionCheck:
    """One action's row of a Monte-Carlo validation run."""

    action: int
    rate: Fraction
    samples: int
    trials: int
    epsilon: Fraction
    mean_estimate: Fraction
    deviation_frequency: Fraction
    bound: Fraction


def monte_carlo_check(
    model: HealthModel,
    n: int,
    trials: int,
    epsilon,
    seed: int,
) -> list:
    """Validate the estimator and its bound empirically.

    Each trial produces an n-sample rate estimate per action and the
    run reports, per action: the mean estimate (should sit on the true
    rate), how often the estimate missed by at least epsilon, and the
    theoretical bound on that frequency.

    The n damage draws of one trial are independent Poissons, so their
    sum is itself one Poisson draw at n times the rate; each trial
    therefore draws that sum directly instead of n addends.  The
    estimate's distribution is identical and the run stays fast at
    large n.  Trial RNGs are derived from the master seed, one per
    trial, so the report does not depend on scheduling.
    """
    if trials < 100:
        raise LeakageError(f"need at least 100 trials, got {trials}")
    n = int(n)
    if n < 1:
        raise LeakageError(f"sample count must be >= 1, got {n}")
    eps = _frac(epsilon)
    if eps <= 0:
        raise LeakageError(f"epsilon must be > 0, got {eps}")
    master = random.Random(seed)
    trial_seeds = [master.getrandbits(64) for _ in range(trials)]
    rates = [_frac(r) for r in model.rates]
    sums = [0] * model.m
    misses = [0] * model.m
    for ts in trial_seeds:
        rng = random.Random(ts)
        for i in range(model.m):
            k = _poisson(rng, float(rates[i]) * n)
            sums[i] += k
            if abs(Fraction(k, n) - rates[i]) >= eps:
                misses[i] += 1
    out = []
    for i in range(model.m):
        out.append(
            ActionCheck(
                action=i + 1,
                rate=rates[i],
                samples=n,
                trials=trials,
                epsilon=eps,
                mean_estimate=Fraction(sums[i], n * trials),
                deviation_frequency=Fraction(misses[i], trials),
                bound=deviation_bound(rates[i], n, eps),
            )
        )
    return out


def leakage_report(trace: EpisodeTrace, epsilon) -> str:
    """Human-readable summary of what the trace gives away.

    One row per observed action: sample count, estimated rate, and the
    probability bound (at the estimated rate) on the estimate being off
    by at least epsilon.  Low bounds mean the interceptor has already
    pinned the rate down that tightly.
    """
    eps = _frac(epsilon)
    est = estimate(trace)
    lines = [f"{'action':>6}  {'samples':>7}  {'rate':>10}  {'bound':>8}"]
    if not est:
        lines.append("no leakage observed")
    for a, (lam, n) in est.items():
        b = deviation_bound(lam, n, eps)
        lines.append(f"{a:>6}  {n:>7}  {float(lam):>10.5f}  {float(b):>8.5f}")
    lines.append("")
    for a, (lam, n) in est.items():
        b = deviation_bound(lam, n, eps)
        lines.append(f"action={a} samples={n} rate={lam} bound={b}")
    lines.append(
        f"bound = min(1, rate / (samples * epsilon^2)): worst-case probability "
        f"that an intercepted trace of that many samples estimates the rate "
        f"more than {eps} off."
    )
    return "\n".join(lines) + "\n"


def parse_trace(text: str) -> EpisodeTrace:
    """Read the trace format: an ``m=<actions>`` header, then ``h a`` lines."""
    lines = text.splitlines()
    idx = 0
    while idx < len(lines) and not lines[idx].strip():
        idx += 1
    if idx >= len(lines) or not lines[idx].strip().startswith("m="):
        raise LeakageError("missing 'm=<actions>' header")
    try:
        m = int(lines[idx].strip()[2:])
    except ValueError:
        raise LeakageError(f"line {idx + 1}: bad action count {lines[idx].strip()!r}")
    steps = []
    for lineno in range(idx + 1, len(lines)):
        line = lines[lineno].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise LeakageError(f"line {lineno + 1}: expected 'h a', got {line!r}")
        try:
            steps.append((int(parts[0]), int(parts[1])))
        except ValueError:
            raise LeakageError(f"line {lineno + 1}: expected integers, got {line!r}")
    try:
        return EpisodeTrace(m, tuple(steps))
    except LeakageError as exc:
        raise LeakageError(f"invalid trace: {exc}") from None


def emit_trace(trace: EpisodeTrace) -> str:
    out = [f"m={trace.m}"]
    for h, a in trace.steps:
        out.append(f"{h} {a}")
    return "\n".join(out) + "\n"
