"""Converse bound, cooperation/parallel gains, and numeric gap certification.

The cut-set style lower bound on the optimal delay combines three families
of cuts: the half-rate singleton cut (1/2)(1-M/N), server-only cuts
s - K*M/floor(N/s), and cooperative cuts (s - s*M/floor(N/s))/(1+alpha_max),
each maximised over the cut size s in 1..K.

Gap certification sweeps explicit config grids (the shipped default grid
lives in data/acceptance_grid.json) and checks the achievable-to-lower-bound
ratio against regime constants: 31 for the centralized scheme (2 on the
large-cache region t >= K-1), and for the decentralized scheme 24 on a
shared link, 6 above the memory threshold p_th with full parallelism, 77 in
the intermediate-parallelism regime.  p_th(K) is the unique root of
(K+1)(1-p)^(K-1) = 1; side-of-threshold tests are exact rational
comparisons, and the reported value is a bisection interval of width 1e-9.
"""

from __future__ import annotations

import functools
import json
import math
from dataclasses import dataclass, field
from fractions import Fraction as Frac
from importlib import resources
from typing import Iterable, Iterator, Optional, Union

from .centralized import centralized_delay, choose_alpha, coding_gain_m
from .decentralized import decentralized_delay
from .model import SystemConfig, as_frac

# ---------------------------------------------------------------------------
# threshold p_th and friends
# ---------------------------------------------------------------------------


def p_at_least_threshold(K: int, p: Frac) -> bool:
    """Exact test of p >= p_th(K), i.e. (K+1)(1-p)^(K-1) <= 1."""
    if K < 2:
        raise ValueError(f"threshold needs K >= 2, got {K}")
    return (K + 1) * (1 - p) ** (K - 1) <= 1


@functools.lru_cache(maxsize=None)
def p_threshold(K: int, width: Frac = Frac(1, 10**9)) -> tuple[Frac, Frac]:
    """Rational interval (lo, hi) of width < ``width`` bracketing p_th(K)."""
    if K < 2:
        raise ValueError(f"threshold needs K >= 2, got {K}")
    lo, hi = Frac(0), Frac(1)
    while hi - lo >= width:
        mid = (lo + hi) / 2
        if (K + 1) * (1 - mid) ** (K - 1) > 1:
            lo = mid
        else:
            hi = mid
    return lo, hi


def p_star(K: int) -> Frac:
    """Memory point where the uncached load is farthest above the converse."""
    return Frac(1, 2 * K + 1)


# ---------------------------------------------------------------------------
# lower bound
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundReport:
    """Converse evaluation at a single config.

    ``cutset_terms`` are the three cut-family maxima (half-rate, server-only,
    cooperative); ``T_lower`` is their overall max; ``gap_ratio`` is the
    centralized achievable delay over T_lower (1 at the M = N degenerate
    point where both vanish); ``regime`` names the decentralized gap branch
    that applies to (K, alpha_max, p); ``p_th`` is a float approximation of
    the memory threshold.
    """

    cutset_terms: tuple[Frac, Frac, Frac]
    T_lower: Frac
    gap_ratio: Frac
    regime: str
    p_th: float


def gap_regime(config: SystemConfig) -> str:
    """Theorem-branch label for the decentralized gap at this config."""
    K, amax = config.K, config.alpha_max
    if amax == K // 2:
        kind = "flexible"
    elif amax == 1:
        kind = "shared"
    else:
        kind = "middle"
    side = ">=p_th" if p_at_least_threshold(K, config.p) else "<p_th"
    return f"{kind}/p{side}"


def lower_bound(config: SystemConfig) -> BoundReport:
    """Best cut-set lower bound on the optimal delay (exact rational).

    Inner terms may go negative for large M; the max is still taken, and the
    half-rate term keeps the bound nonnegative.
    """
    N, K, M = config.N, config.K, config.M
    half = (1 - M / N) / 2
    server_only = max(Frac(s) - Frac(K) * M / (N // s) for s in range(1, K + 1))
    coop = max(
        (Frac(s) - Frac(s) * M / (N // s)) / (1 + config.alpha_max)
        for s in range(1, K + 1)
    )
    T_lower = max(half, server_only, coop)
    upper = centralized_delay(config)
    gap = Frac(1) if T_lower == 0 and upper == 0 else upper / T_lower
    lo, hi = p_threshold(K)
    return BoundReport(
        (half, server_only, coop),
        T_lower,
        gap,
        gap_regime(config),
        float((lo + hi) / 2),
    )


# ---------------------------------------------------------------------------
# baselines and centralized gains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Baselines:
    """Reference delays: server-only multicast and serverless device-to-device."""

    server_only: Frac
    d2d_only: Frac


def baselines(config: SystemConfig) -> Baselines:
    """K(1-M/N)/(1+t) (no cooperation) and (N/M)(1-M/N) (no server)."""
    if config.M == 0:
        raise ValueError("device-to-device baseline undefined at M = 0")
    one_minus = 1 - config.M / config.N
    return Baselines(
        Frac(config.K) * one_minus / (1 + config.t),
        Frac(config.N) / config.M * one_minus,
    )


def centralized_gains(
    config: SystemConfig, alpha: Union[int, Frac, None] = None
) -> tuple[Frac, Frac]:
    """(G_c, G_p): delay reduction factors versus the two baselines.

    G_c = 1/(1 + (alpha/(1+t))*m) against the no-cooperation scheme and
    G_p = 1/(1 + 1/t + (alpha/t)*m) against the serverless scheme, with
    m = min(floor(K/alpha)-1, t).  ``alpha`` may be a rational (the relaxed
    optimum K/(t+1)); it defaults to the best integer choice.  G_p is
    undefined at t = 0.
    """
    t = config.t
    if t.denominator != 1:
        raise ValueError(f"gains need integer t, got {t}")
    if alpha is None:
        alpha = choose_alpha(config)
    alpha = as_frac(alpha)
    if not (1 <= alpha <= config.alpha_max):
        raise ValueError(f"alpha {alpha} outside [1, {config.alpha_max}]")
    m = min(Frac(math.floor(Frac(config.K) / alpha) - 1), t)
    G_c = 1 / (1 + alpha * m / (1 + t))
    if t == 0:
        raise ValueError("parallel gain undefined at t = 0")
    G_p = 1 / (1 + Frac(1) / t + alpha * m / t)
    return G_c, G_p


def piecewise_gains(config: SystemConfig) -> tuple[Frac, Frac, str]:
    """(G_c, G_p, branch) from the closed three-branch forms at alpha*.

    Branches: "high-t" (t >= K-1, alpha* = 1), "low-t"
    (t <= floor(K/alpha_max)-1, alpha* = alpha_max), "interior" (alpha* =
    K/(t+1), relaxed).  Matches ``centralized_gains`` evaluated at the same
    alpha*.
    """
    t = config.t
    if t.denominator != 1 or t == 0:
        raise ValueError(f"piecewise gains need integer t >= 1, got {t}")
    K, amax = config.K, config.alpha_max
    if t >= K - 1:
        return Frac(1 + t, K + t), Frac(t, K + t), "high-t"
    if t <= K // amax - 1:
        denom = amax * t + t + 1
        return Frac(1 + t, denom), Frac(t, denom), "low-t"
    alpha_star = Frac(K, int(t) + 1)
    m = math.floor(Frac(K) / alpha_star) - 1
    G_c = (1 + t) / (m * alpha_star + t + 1)
    G_p = t / (alpha_star * t + t + 1)
    return G_c, G_p, "interior"


# ---------------------------------------------------------------------------
# grid verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GapPoint:
    config: SystemConfig
    ratio: Frac
    regime: str


@dataclass
class CentralizedGapReport:
    """Worst achievable/converse ratios over a centralized grid."""

    worst: Optional[GapPoint] = None
    worst_high_t: Optional[GapPoint] = None  # restricted to t >= K-1
    violations: list[GapPoint] = field(default_factory=list)
    points: int = 0

    BOUND = Frac(31)
    HIGH_T_BOUND = Frac(2)

    @property
    def passed(self) -> bool:
        return self.points > 0 and not self.violations


def verify_gap_centralized(grid: Iterable[SystemConfig]) -> CentralizedGapReport:
    """Check T_central/T_lower <= 31 on ``grid`` (and <= 2 where t >= K-1).

    Ratios use exact rationals; the M = N point counts as ratio 1.  Every
    offending config lands in ``violations``.
    """
    report = CentralizedGapReport()
    for config in grid:
        rep = lower_bound(config)
        point = GapPoint(config, rep.gap_ratio, rep.regime)
        report.points += 1
        if report.worst is None or point.ratio > report.worst.ratio:
            report.worst = point
        high_t = config.t >= config.K - 1
        if high_t and (
            report.worst_high_t is None or point.ratio > report.worst_high_t.ratio
        ):
            report.worst_high_t = point
        bound = report.HIGH_T_BOUND if high_t else report.BOUND
        if point.ratio > bound:
            report.violations.append(point)
    return report


def decentralized_gap_bound(config: SystemConfig) -> tuple[Frac, str, bool]:
    """(bound, branch label, min_form_binding) for the decentralized gap.

    Branch by parallelism: alpha_max = floor(K/2) takes the tight
    full-parallelism bound (6 above threshold, max{6, 2K(2K/(2K+1))^(K-1)}
    below), alpha_max = 1 the shared-link constant 24, anything between the
    intermediate constant 77 (below threshold relaxed to
    max{77, min{12(1+alpha_max), 2K(2K/(2K+1))^(K-1)}}).
    ``min_form_binding`` marks intermediate below-threshold points where the
    min-form term alone (without the 77 floor) is the larger of the two.
    """
    K, amax = config.K, config.alpha_max
    below = not p_at_least_threshold(K, config.p)
    growth = 2 * K * Frac(2 * K, 2 * K + 1) ** (K - 1)
    if amax == K // 2:
        kind = "flexible"
        bound = max(Frac(6), growth) if below else Frac(6)
        return bound, f"{kind}/p{'<' if below else '>='}p_th", False
    if amax == 1:
        return Frac(24), f"shared/p{'<' if below else '>='}p_th", False
    kind = "middle"
    if not below:
        return Frac(77), f"{kind}/p>=p_th", False
    min_form = min(Frac(12) * (1 + amax), growth)
    return max(Frac(77), min_form), f"{kind}/p<p_th", min_form > 77


@dataclass
class DecentralizedGapReport:
    """Worst decentralized achievable/converse ratio per gap branch."""

    worst_by_branch: dict[str, GapPoint] = field(default_factory=dict)
    violations: list[GapPoint] = field(default_factory=list)
    min_form_exceedances: list[GapPoint] = field(default_factory=list)
    points: int = 0

    @property
    def passed(self) -> bool:
        return self.points > 0 and not self.violations


def verify_gap_decentralized(grid: Iterable[SystemConfig]) -> DecentralizedGapReport:
    """Check T_decentral/T_lower against the branch bounds on ``grid``.

    Points whose ratio exceeds the bare min-form bound (but not the floored
    branch bound) are recorded in ``min_form_exceedances`` rather than
    failed.
    """
    report = DecentralizedGapReport()
    for config in grid:
        T_dec = decentralized_delay(config)
        rep = lower_bound(config)
        if rep.T_lower == 0:
            ratio = Frac(1) if T_dec == 0 else Frac(10**9)
        else:
            ratio = T_dec / rep.T_lower
        bound, branch, min_binding = decentralized_gap_bound(config)
        point = GapPoint(config, ratio, branch)
        report.points += 1
        cur = report.worst_by_branch.get(branch)
        if cur is None or ratio > cur.ratio:
            report.worst_by_branch[branch] = point
        if ratio > bound:
            report.violations.append(point)
        elif min_binding and ratio > min(Frac(12) * (1 + config.alpha_max),
                                         2 * config.K * Frac(2 * config.K, 2 * config.K + 1) ** (config.K - 1)):
            report.min_form_exceedances.append(point)
    return report


# ---------------------------------------------------------------------------
# shipped default grids
# ---------------------------------------------------------------------------


def load_grid_spec(path: Optional[str] = None) -> dict:
    """Grid description, from ``path`` or the packaged default."""
    if path is not None:
        with open(path) as fh:
            return json.load(fh)
    return json.loads(
        resources.files("coopcache").joinpath("data/acceptance_grid.json").read_text()
    )


def _alpha_max_choices(K: int, choices: list) -> list[int]:
    out = []
    cap = max(1, K // 2)
    for c in choices:
        v = K // 2 if c == "half" else int(c)
        if 1 <= v <= cap and v not in out:
            out.append(v)
    return sorted(out)


def centralized_gap_grid(spec: Optional[dict] = None) -> Iterator[SystemConfig]:
    """Configs for the centralized gap sweep: all integer-t memory points."""
    spec = (spec or load_grid_spec())["centralized_gap"]
    K_lo, K_hi = spec["K"]
    for K in range(K_lo, K_hi + 1):
        for N in range(K, spec["N_max_multiple"] * K + 1):
            for t in range(1, K + 1):
                M = Frac(t * N, K)
                for amax in _alpha_max_choices(K, spec["alpha_max_choices"]):
                    yield SystemConfig(N=N, K=K, M=M, alpha_max=amax)


def decentralized_gap_grid(spec: Optional[dict] = None) -> Iterator[SystemConfig]:
    """Configs for the decentralized gap sweep: uniform interior p grid."""
    spec = (spec or load_grid_spec())["decentralized_gap"]
    K_lo, K_hi = spec["K"]
    den = spec["p_grid_denominator"]
    for K in range(K_lo, K_hi + 1):
        for amax in range(1, max(1, K // 2) + 1):
            for i in range(1, den):
                yield SystemConfig(N=K, K=K, M=Frac(i * K, den), alpha_max=amax)
