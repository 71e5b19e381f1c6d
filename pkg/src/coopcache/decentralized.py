"""Decentralized cooperative coded caching: random placement, exact delivery.

Placement: each user independently caches a fraction p = M/N of every file
(bit mode: exactly floor(M*F/N) uniformly chosen bits per file).  The bits
of file n cached by exactly the user set T form subfile W_{n,T}; in the
large-file fluid limit |W_{n,T}|/F = p^|T| (1-p)^(K-|T|).

Delivery splits every cached subfile (T nonempty) into a server share
(fraction ``lambda``) and a user share.  The server sends the uncached
W_{d_k,empty} raw plus the classic multicast XOR of the server shares for
every nonempty S (rate R_empty + lambda*R_s); the users deliver the user
shares in K-1 parallel rounds, round s = 2..K serving the subfiles cached
at s-1 others (per-link rate (1-lambda)*R_u).

Round s groups users into sending groups of size s; inside a group each
member in turn broadcasts an XOR of fragments, one per other member, of
mini-files W^u_{d_j, S\\{j}} cached by the whole rest of the group.  The
number and shape of parallel groups per round:

* case 1 (ceil(K/s) > alpha_max): alpha_max disjoint s-groups at a time,
  the full-width cap binds;
* case 2 (ceil(K/s) <= alpha_max, K mod s < 2): floor(K/s) s-groups cover
  (almost) everyone;
* case 3 (otherwise): floor(K/s) s-groups plus one remainder group of size
  s* = K mod s >= 2, which serves its members' mini-files through every
  s-superset S of itself; the user share is further split u1/u2 between
  regular and remainder service with lambda2 chosen to equalise lane loads.

The resulting per-round per-lane loads are equal by construction, which is
what makes the closed-form R_u of the delay theorem exact for the scheduler.

A faithful wart, kept deliberately: with this scheme's lambda (from the
"Choice of lambda" rule), the balanced server/user loads R_empty+lambda*R_s
= (1-lambda)*R_u sit slightly above the headline delay formula
T = R_s*R_u/(R_s+R_u-R_empty) whenever R_u > R_empty > 0; ``T`` here is the
closed-form target and max(R1, R2) is what the schedule realises.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction as Frac
from typing import Optional, Sequence

from .model import (
    Constituent,
    DeliverySchedule,
    FragmentId,
    GroupPartition,
    SchedulingError,
    SystemConfig,
    XorSymbol,
    enumerate_equal_partitions,
    enumerate_remainder_partitions,
    enumerate_subsets,
    f_ks,
    group_multiplicity,
    remainder_group_multiplicity,
    validate_demands,
)

# ---------------------------------------------------------------------------
# rate components and the server/user allocation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateComponents:
    """Load building blocks: uncached, server-only, and user-only rates."""

    R_empty: Frac
    R_s: Frac
    R_u: Frac


def rate_components(config: SystemConfig) -> RateComponents:
    """Exact R_empty, R_s, R_u for this config.

    R_empty = K q^K (content cached nowhere, q = 1-p);
    R_s = (q/p)(1 - q^K) (server delivering everything single-handedly;
    continuity value K at p = 0);
    R_u = per-link user rate: rounds below the parallelism knee contribute
    (1/alpha_max) * s*C(K,s)/(s-1) * p^(s-1) q^(K-s+1), rounds at or above
    it contribute K*C(K-1,s-1)/f(K,s) * p^(s-1) q^(K-s+1).
    """
    K, p = config.K, config.p
    q = 1 - p
    R_empty = K * q**K
    R_s = Frac(K) if p == 0 else (q / p) * (1 - q**K)
    knee = -(-K // config.alpha_max)  # ceil(K / alpha_max)
    R_u = Frac(0)
    for s in range(2, knee):
        R_u += (
            Frac(s * math.comb(K, s), s - 1)
            * p ** (s - 1)
            * q ** (K - s + 1)
            / config.alpha_max
        )
    for s in range(max(2, knee), K + 1):
        R_u += (
            Frac(K * math.comb(K - 1, s - 1), f_ks(K, s))
            * p ** (s - 1)
            * q ** (K - s + 1)
        )
    return RateComponents(R_empty, R_s, R_u)


def select_case(K: int, s: int, alpha_max: int) -> tuple[int, int]:
    """Round-s delivery case and the number of parallel groups alpha_D."""
    if not (2 <= s <= K):
        raise ValueError(f"round size s={s} outside [2, K={K}]")
    if -(-K // s) > alpha_max:
        return 1, alpha_max
    if K % s < 2:
        return 2, K // s
    return 3, -(-K // s)


def lambda2_split(K: int, s: int) -> Frac:
    """Case-3 share of the user mini-file served by the regular groups.

    Chosen so a regular lane (s symbols per partition, fragments of the u1
    share split (s-1)-fold per group visit) and the remainder lane (serving
    the u2 share through every s-superset) carry equal bits:
    lambda2 = floor(K/s)(s-1) / (K - 1 - floor(K/s)).
    """
    q, r = divmod(K, s)
    if r < 2:
        raise ValueError(f"round K={K}, s={s} has no remainder group")
    return Frac(q * (s - 1), K - 1 - q)


@dataclass(frozen=True)
class AllocationPlan:
    """Server/user traffic split for decentralized delivery.

    ``server_share`` (lambda) follows the balance rule: 0 when users cannot
    even absorb the uncached load (R_u < R_empty), else
    (R_u - R_empty)/(R_s + R_u), which equalises R_empty + lambda*R_s and
    (1-lambda)*R_u.  ``lambda2_by_round`` carries the case-3 intra-round
    split for each round that has a remainder group.
    """

    server_share: Frac
    lambda2_by_round: dict[int, Frac]
    R_empty: Frac
    R_s: Frac
    R_u: Frac

    def __post_init__(self) -> None:
        if not (0 <= self.server_share <= 1):
            raise ValueError(f"server share {self.server_share} outside [0, 1]")
        for s, l2 in self.lambda2_by_round.items():
            if not (0 <= l2 <= 1):
                raise ValueError(f"round {s} split {l2} outside [0, 1]")


def allocation_plan(config: SystemConfig) -> AllocationPlan:
    rc = rate_components(config)
    if rc.R_u < rc.R_empty or rc.R_s + rc.R_u == 0:
        lam = Frac(0)
    else:
        lam = (rc.R_u - rc.R_empty) / (rc.R_s + rc.R_u)
    lam2 = {
        s: lambda2_split(config.K, s)
        for s in range(2, config.K + 1)
        if select_case(config.K, s, config.alpha_max)[0] == 3
    }
    return AllocationPlan(lam, lam2, rc.R_empty, rc.R_s, rc.R_u)


@dataclass(frozen=True)
class DecentralizedRates:
    """Closed-form rates.  R1/R2 are the balanced link loads the schedule
    realises; T is the headline delay formula (see module docstring)."""

    R1: Frac
    R2: Frac
    T: Frac
    server_share: Frac
    components: RateComponents


def decentralized_rates(config: SystemConfig) -> DecentralizedRates:
    rc = rate_components(config)
    denom = rc.R_s + rc.R_u - rc.R_empty
    if rc.R_u < rc.R_empty or denom == 0:
        lam = Frac(0)
        T = rc.R_empty
    else:
        lam = (rc.R_u - rc.R_empty) / (rc.R_s + rc.R_u)
        T = rc.R_s * rc.R_u / denom
    R1 = rc.R_empty + lam * rc.R_s
    R2 = (1 - lam) * rc.R_u
    return DecentralizedRates(R1, R2, T, lam, rc)


def decentralized_delay(config: SystemConfig) -> Frac:
    """Headline decentralized delay T (exact)."""
    return decentralized_rates(config).T


# ---------------------------------------------------------------------------
# gains and closed-form bounds on R_u
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GainReport:
    G_c: Frac
    G_p: Frac
    limit_point: bool = False  # value is a one-sided limit (p -> 1)


def decentralized_gains(config: SystemConfig) -> GainReport:
    """Cooperation gains: delay relative to the no-cooperation scheme.

    G_c = max{R_empty/R_s, R_u/(R_s+R_u-R_empty)} (coded caching baseline),
    G_p = G_c*(1-(1-p)^K) (uncoded baseline); both lie in [0, 1].
    At p = 1 every component vanishes; the exact one-sided limit
    G_c -> K/(2K-1) is returned with ``limit_point`` set.  p = 0 is a
    domain error (no cached content, both baselines degenerate).
    """
    p, K = config.p, config.K
    if p == 0:
        raise ValueError("cooperation gain undefined at p = 0 (empty caches)")
    if p == 1:
        lim = Frac(K, 2 * K - 1)
        return GainReport(lim, lim, limit_point=True)
    rc = rate_components(config)
    G_c = max(rc.R_empty / rc.R_s, rc.R_u / (rc.R_s + rc.R_u - rc.R_empty))
    G_p = G_c * (1 - (1 - p) ** K)
    return GainReport(G_c, G_p)


def corollary_bounds(config: SystemConfig) -> tuple[str, object]:
    """Closed-form upper bound on R_u for the applicable alpha_max regime.

    Returns (regime, bound) with regime one of "shared" (alpha_max = 1),
    "flexible" (alpha_max = floor(K/2), K >= 3), "middle" (in between):

      shared:   (q/p)[1 - (5/2)Kpq^(K-1) - 4q^K + 3(1-q^(K+1))/((K+1)p)]
      flexible: (Kq/(K-1))[1 - q^(K-1) + (2/p)(1 - q^K - Kpq^(K-1))/(K-2)]
      middle:   shared/alpha_max + flexible

    p = 0 returns math.inf (the bounds blow up as 1/p).
    """
    K, p, amax = config.K, config.p, config.alpha_max
    if K >= 3 and amax == K // 2:
        regime = "flexible"
    elif amax == 1:
        regime = "shared"
    else:
        regime = "middle"
    if p == 0:
        return regime, math.inf
    q = 1 - p

    def shared() -> Frac:
        return (q / p) * (
            1
            - Frac(5, 2) * K * p * q ** (K - 1)
            - 4 * q**K
            + 3 * (1 - q ** (K + 1)) / ((K + 1) * p)
        )

    def flexible() -> Frac:
        if K < 3:
            raise ValueError(f"flexible bound needs K >= 3, got K={K}")
        return (Frac(K) * q / (K - 1)) * (
            1 - q ** (K - 1) + Frac(2) / p * (1 - q**K - K * p * q ** (K - 1)) / (K - 2)
        )

    if regime == "shared":
        return regime, shared()
    if regime == "flexible":
        return regime, flexible()
    return regime, shared() / amax + flexible()


# ---------------------------------------------------------------------------
# placement
# ---------------------------------------------------------------------------


@dataclass
class DecentralPlacement:
    """Random-caching state.  Fluid mode carries only exact subfile sizes;
    bit mode additionally stores, per file, each bit's caching set."""

    config: SystemConfig
    mode: str  # "fluid" | "bits"
    seed: int = 0
    # bit mode only: (user, file) -> sorted positions; (file, T) -> positions
    cache_positions: dict = field(default_factory=dict, repr=False)
    subfile_positions: dict = field(default_factory=dict, repr=False)

    def subfile_size(self, T: tuple[int, ...]) -> Frac:
        """Fluid size of W_{n,T} as a fraction of F (any n)."""
        p = self.config.p
        return p ** len(T) * (1 - p) ** (self.config.K - len(T))

    def subfile_bit_count(self, file: int, T: tuple[int, ...]) -> int:
        return len(self.subfile_positions[(file, T)])

    def caches(self, user: int, T: tuple[int, ...]) -> bool:
        return user in T


def build_decentral_placement(
    config: SystemConfig, seed: int = 0, mode: str = "fluid"
) -> DecentralPlacement:
    if mode == "fluid":
        return DecentralPlacement(config, "fluid", seed)
    if mode != "bits":
        raise ValueError(f"unknown placement mode {mode!r}")
    import numpy as np

    if config.F is None:
        raise ValueError("bit-mode placement needs config.F")
    K, N, F = config.K, config.N, config.F
    per_file = int(config.M * F / config.N)  # floor(M*F/N)
    pl = DecentralPlacement(config, "bits", seed)
    masks = {}
    for n in range(1, N + 1):
        mask = np.zeros(F, dtype=np.uint32)
        for k in range(1, K + 1):
            rng = np.random.default_rng((seed, k, n))
            pos = rng.choice(F, size=per_file, replace=False)
            pos.sort()
            pl.cache_positions[(k, n)] = pos
            mask[pos] |= np.uint32(1 << (k - 1))
        masks[n] = mask
    for n in range(1, N + 1):
        mask = masks[n]
        order = np.argsort(mask, kind="stable")
        sorted_mask = mask[order]
        for size in range(0, K + 1):
            for T in enumerate_subsets(K, size):
                code = sum(1 << (k - 1) for k in T)
                lo = np.searchsorted(sorted_mask, code, side="left")
                hi = np.searchsorted(sorted_mask, code, side="right")
                pos = order[lo:hi]
                pos.sort()
                pl.subfile_positions[(n, T)] = pos
    return pl


# ---------------------------------------------------------------------------
# delivery
# ---------------------------------------------------------------------------


class _FragmentCounters:
    """Monotone per-(receiver, T, part) fragment cursors.

    Each needed mini-file part is split into a fixed number of fragments;
    every use consumes the next index.  Running past the end means some
    group multiplicity was miscounted — a scheduling error.
    """

    def __init__(self) -> None:
        self.next_index: dict = {}
        self.capacity: dict = {}

    def take(self, receiver: int, T: tuple[int, ...], part: str, count: int) -> int:
        key = (receiver, T, part)
        cap = self.capacity.setdefault(key, count)
        if cap != count:
            raise SchedulingError(
                f"fragment count for {key} changed {cap} -> {count}"
            )
        idx = self.next_index.get(key, 0)
        if idx >= count:
            raise SchedulingError(
                f"fragment exhaustion for {key}: need index {idx} of {count}"
            )
        self.next_index[key] = idx + 1
        return idx

    def assert_consumed(self, receiver: int, T: tuple[int, ...], part: str) -> None:
        key = (receiver, T, part)
        cap = self.capacity.get(key)
        got = self.next_index.get(key, 0)
        if cap is None or got != cap:
            raise SchedulingError(
                f"mini-file {key} only {got}/{cap} fragments delivered"
            )


@dataclass
class _PartGeometry:
    """Fragmentation of one round's mini-file parts (sizes per fragment)."""

    part: str
    frag_count: int
    frag_size: Frac  # fluid fraction of F


def _round_geometry(
    config: SystemConfig, plan: AllocationPlan, s: int
) -> tuple[int, int, list[_PartGeometry]]:
    """(case, alpha_D, per-part fragmentation) for round s."""
    K = config.K
    case, alpha_d = select_case(K, s, config.alpha_max)
    w_u = (1 - plan.server_share) * config.p ** (s - 1) * (1 - config.p) ** (
        K - s + 1
    )
    if case in (1, 2):
        gamma = group_multiplicity(K, s, alpha_d)
        return case, alpha_d, [
            _PartGeometry("u", (s - 1) * gamma, w_u / ((s - 1) * gamma))
        ]
    s_star = K % s
    lam2 = plan.lambda2_by_round[s]
    gamma_reg = group_multiplicity(K, s, alpha_d)
    gamma_rem = remainder_group_multiplicity(K, s)
    n1 = (s - 1) * gamma_reg
    n2 = (s_star - 1) * math.comb(s - 1, s_star - 1) * gamma_rem
    return case, alpha_d, [
        _PartGeometry("u1", n1, lam2 * w_u / n1),
        _PartGeometry("u2", n2, (1 - lam2) * w_u / n2),
    ]


def inner_group_coding(
    s: int,
    group: tuple[int, ...],
    part_label: str,
    gamma: int,
    demands: Sequence[int],
    placement: DecentralPlacement,
    counters: Optional[_FragmentCounters] = None,
    plan: Optional[AllocationPlan] = None,
) -> list[XorSymbol]:
    """Symbols one group sends during one partition appearance of round s.

    A regular group (size s, part "u" or "u1") works on S = group itself:
    each member k broadcasts the XOR of one fresh fragment of
    W^{part}_{d_j, group\\{j}} for every other member j.  A remainder group
    (part "u2", size s* < s) runs that same rotation for every s-superset
    S of itself, using mini-files W^{u2}_{d_j, S\\{j}}.

    ``gamma`` is the group's multiplicity across the round's partitions; it
    fixes the fragment counts ((s-1)*gamma per mini-file for regular parts,
    (s*-1)*C(s-1,s*-1)*gamma for remainder parts) so that total consumption
    exactly exhausts every fragment.
    """
    if counters is None:
        counters = _FragmentCounters()
    cfg = placement.config
    if plan is None:
        plan = allocation_plan(cfg)
    K = cfg.K
    demands = tuple(demands)
    w_u = (1 - plan.server_share) * cfg.p ** (s - 1) * (1 - cfg.p) ** (K - s + 1)
    out: list[XorSymbol] = []

    if part_label in ("u", "u1"):
        if len(group) != s:
            raise ValueError(f"regular group {group} is not size s={s}")
        n_frag = (s - 1) * gamma
        share = plan.lambda2_by_round[s] if part_label == "u1" else Frac(1)
        size = share * w_u / n_frag
        supersets = [group]
    elif part_label == "u2":
        s_star = len(group)
        if s_star != K % s or s_star < 2:
            raise ValueError(f"remainder group {group} inconsistent with K={K}, s={s}")
        n_frag = (s_star - 1) * math.comb(s - 1, s_star - 1) * gamma
        size = (1 - plan.lambda2_by_round[s]) * w_u / n_frag
        rest = [u for u in range(1, K + 1) if u not in group]
        supersets = [
            tuple(sorted(group + extra))
            for extra in itertools.combinations(rest, s - len(group))
        ]
    else:
        raise ValueError(f"unknown part label {part_label!r}")

    if size == 0:
        return out
    for S in supersets:
        for sender in group:
            cons = []
            for j in group:
                if j == sender:
                    continue
                T = tuple(x for x in S if x != j)
                idx = counters.take(j, T, part_label, n_frag)
                cons.append(
                    Constituent(j, FragmentId(demands[j - 1], T, part_label, idx, n_frag))
                )
            out.append(XorSymbol(sender, group, tuple(cons), size))
    return out


def parallel_user_delivery(
    config: SystemConfig,
    placement: DecentralPlacement,
    demands: Sequence[int],
    plan: Optional[AllocationPlan] = None,
) -> DeliverySchedule:
    """All user rounds: s = 2..K, each a sweep over the round's partitions.

    Audits itself: after each round every needed mini-file part must have
    consumed exactly all its fragments (coverage-exactly-once).
    """
    d = validate_demands(config, demands)
    if plan is None:
        plan = allocation_plan(config)
    K = config.K
    sched = DeliverySchedule()
    if plan.server_share == 1:
        return sched
    counters = _FragmentCounters()
    round_index = 0
    for s in range(2, K + 1):
        case, alpha_d, geometry = _round_geometry(config, plan, s)
        if all(g.frag_size == 0 for g in geometry):
            continue
        if case in (1, 2):
            partitions = enumerate_equal_partitions(K, s, alpha_d)
            gamma = group_multiplicity(K, s, alpha_d)
            for part in partitions:
                syms: list[XorSymbol] = []
                for G in part:
                    syms.extend(
                        inner_group_coding(s, G, "u", gamma, d, placement, counters, plan)
                    )
                sched.user_rounds.append((GroupPartition(part, round_index), syms))
                round_index += 1
        else:
            partitions = enumerate_remainder_partitions(K, s)
            gamma_reg = group_multiplicity(K, s, alpha_d)
            gamma_rem = remainder_group_multiplicity(K, s)
            for part in partitions:
                syms = []
                for G in part[:-1]:
                    syms.extend(
                        inner_group_coding(
                            s, G, "u1", gamma_reg, d, placement, counters, plan
                        )
                    )
                syms.extend(
                    inner_group_coding(
                        s, part[-1], "u2", gamma_rem, d, placement, counters, plan
                    )
                )
                canon = tuple(sorted(part, key=min))
                sched.user_rounds.append((GroupPartition(canon, round_index), syms))
                round_index += 1
        # coverage audit for this round's mini-files
        for geo in geometry:
            for j in config.users():
                for T in enumerate_subsets(K, s - 1):
                    if j in T:
                        continue
                    counters.assert_consumed(j, T, geo.part)
    return sched


def server_delivery_decentralized(
    config: SystemConfig,
    placement: DecentralPlacement,
    demands: Sequence[int],
    plan: Optional[AllocationPlan] = None,
) -> list[XorSymbol]:
    """Server phase: raw uncached subfiles, then the lambda-share multicast.

    For every nonempty S the server XORs the server shares W^s_{d_k,S\\{k}}
    of its members (singleton S symbols repeat material already inside the
    raw W_{d_k,empty} transmissions; they are kept — flagged redundant — so
    the fluid server load is exactly R_empty + lambda*R_s).
    """
    d = validate_demands(config, demands)
    if plan is None:
        plan = allocation_plan(config)
    K, p = config.K, config.p
    q = 1 - p
    lam = plan.server_share
    everyone = tuple(config.users())
    out: list[XorSymbol] = []
    raw_size = q**K
    if raw_size > 0:
        for k in everyone:
            out.append(
                XorSymbol(
                    0,
                    everyone,
                    (Constituent(k, FragmentId(d[k - 1], (), "full", 0, 1)),),
                    raw_size,
                )
            )
    if lam == 0:
        return out
    for s_sz in range(1, K + 1):
        size = lam * p ** (s_sz - 1) * q ** (K - s_sz + 1)
        if size == 0:
            continue
        for S in enumerate_subsets(K, s_sz):
            cons = tuple(
                Constituent(
                    k, FragmentId(d[k - 1], tuple(x for x in S if x != k), "s", 0, 1)
                )
                for k in S
            )
            out.append(XorSymbol(0, everyone, cons, size, redundant=(s_sz == 1)))
    return out


def build_decentral_delivery(
    config: SystemConfig,
    placement: DecentralPlacement,
    demands: Sequence[int],
) -> tuple[AllocationPlan, DeliverySchedule]:
    """Full decentralized delivery: user rounds plus server symbols."""
    plan = allocation_plan(config)
    sched = parallel_user_delivery(config, placement, demands, plan)
    sched.server_symbols = server_delivery_decentralized(config, placement, demands, plan)
    return plan, sched
