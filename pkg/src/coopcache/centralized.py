"""Centralized cooperative coded caching: placement, split plan, schedules.

Placement (integer t = K*M/N): every file is cut into C(K,t) equal subfiles
W_{n,T}, one per t-subset T of users, and user k caches W_{n,T} iff k in T.

Delivery for demands d splits every needed subfile into a server share
(fraction ``lambda``) and a user share (fraction 1-lambda):

* the server sends, for every (t+1)-subset S, the XOR of the server shares
  W^s_{d_k, S\\{k}} over k in S — the classic single-shot multicast;
* the users cut each user share into L equal pico-files and deliver them
  over the cooperation network: alpha disjoint groups of size fp transmit in
  parallel, and an in-group sender's symbol XORs one pico-file for each of
  the fp-1 other members (each of whom caches the rest of the XOR).

The group size is fp = min(K//alpha, t+1): a group member's pico-file must
be cached by the whole rest of the group, which caps useful group size at
t+1; the number of parallel groups caps it at K//alpha.  Every symbol hence
codes m = fp-1 = min(K//alpha - 1, t) pico-files, giving per-link user rate
R2 = (1-lambda) * K(1-M/N) / (alpha*m) against the server's
R1 = lambda * K(1-M/N) / (1+t).  The default lambda equalises the two.

The scheduler here realises those rates *exactly*: it fixes a slot sequence
(alpha disjoint groups per slot, cycling the canonical partition list),
derives per-group symbol quotas from it, routes every pico-file to a hosting
group with a small integer max-flow, and assembles each group's symbols so
that a receiver never appears in its own sender slot.  A refinement factor
rho (pico-files sub-split into rho equal units) is raised through a
deterministic ladder until the flow is feasible; a uniform full-cycle
sequence is always feasible, so the ladder terminates.  Rates are invariant
to rho.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
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
    enumerate_subsets,
    validate_demands,
)

# ---------------------------------------------------------------------------
# placement
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CentralPlacement:
    """Deterministic subfile placement for integer replication factor t."""

    config: SystemConfig
    t: int
    subsets: tuple[tuple[int, ...], ...]  # all t-subsets, lex order

    def cache_subsets(self, user: int) -> tuple[tuple[int, ...], ...]:
        """Subfile labels cached by ``user`` (those T containing it)."""
        return tuple(T for T in self.subsets if user in T)

    def caches(self, user: int, subset: tuple[int, ...]) -> bool:
        return user in subset


def build_central_placement(config: SystemConfig) -> CentralPlacement:
    t = config.t
    if t.denominator != 1:
        raise ValueError(
            f"centralized placement needs integer t=K*M/N, got t={t}; "
            "use memory sharing (rate interpolation) for this M"
        )
    ti = int(t)
    return CentralPlacement(config, ti, tuple(enumerate_subsets(config.K, ti)))


# ---------------------------------------------------------------------------
# parallelism degree and the server/user split
# ---------------------------------------------------------------------------


def coding_gain_m(K: int, t: Frac, alpha: int) -> Frac:
    """Pico-files XOR-coded per user symbol: min(K//alpha - 1, t)."""
    return min(Frac(K // alpha - 1), Frac(t))


def _delay_denominator(K: int, t: Frac, alpha: int) -> Frac:
    return 1 + t + alpha * coding_gain_m(K, t, alpha)


def choose_alpha(config: SystemConfig) -> int:
    """Delay-minimising number of parallel groups, by exhaustive search.

    Minimises K(1-M/N) / (1 + t + alpha*min(K//alpha - 1, t)) over
    alpha in [1, alpha_max]; ties resolve to the smallest alpha.
    """
    K, t = config.K, config.t
    best, best_val = 1, _delay_denominator(K, t, 1)
    for alpha in range(2, config.alpha_max + 1):
        val = _delay_denominator(K, t, alpha)
        if val > best_val:
            best, best_val = alpha, val
    return best


def piecewise_alpha(config: SystemConfig) -> Frac:
    """Analytic optimiser of the delay denominator, as an exact rational.

    Three regimes: alpha* = 1 when t >= K-1 (a single full group already
    codes t pico-files per symbol); alpha* = K/(t+1) (possibly fractional)
    in the middle where groups of size t+1 are ideal; alpha* = alpha_max
    when t <= K//alpha_max - 1 (caches too small to fill even the widest
    grouping).  ``choose_alpha`` is the integer ground truth; this exposes
    the idealised curve for cross-checking.
    """
    K, t = config.K, config.t
    if t >= K - 1:
        return Frac(1)
    if t <= K // config.alpha_max - 1:
        return Frac(config.alpha_max)
    return Frac(K) / (t + 1)


@dataclass(frozen=True)
class SplitPlan:
    """Server/user delivery split: parallelism alpha, server share, layers.

    ``server_share`` (lambda) is the fraction of every needed subfile the
    server delivers; the rest is cut into L1 pico-files per subfile for user
    delivery.  The default lambda = (1+t) / (alpha*m + 1 + t) balances the
    two links; an explicit override (kept in [0,1]) is allowed for running
    deliberately unbalanced schedules.  L1 is the smallest layer count
    making the per-link user symbol count K*C(K-1,t)*L1/(alpha*m) integral.
    """

    alpha: int
    server_share: Frac
    L1: int

    def __post_init__(self) -> None:
        if not (0 <= self.server_share <= 1):
            raise ValueError(f"server share {self.server_share} outside [0, 1]")
        if self.L1 < 1:
            raise ValueError(f"layer count L1={self.L1} must be positive")


def make_split_plan(
    config: SystemConfig,
    alpha: Optional[int] = None,
    server_share: Optional[Frac] = None,
) -> SplitPlan:
    """Build the delivery split for integer t; see ``SplitPlan``."""
    t = config.t
    if t.denominator != 1:
        raise ValueError(f"split plan needs integer t, got {t}")
    ti = int(t)
    if alpha is None:
        alpha = choose_alpha(config)
    if not (1 <= alpha <= config.alpha_max):
        raise ValueError(f"alpha={alpha} outside [1, alpha_max={config.alpha_max}]")
    m = coding_gain_m(config.K, Frac(ti), alpha)
    if server_share is None:
        server_share = Frac(1 + ti, int(alpha * m) + 1 + ti) if m > 0 else Frac(1)
    else:
        server_share = Frac(server_share)
    if m == 0:
        return SplitPlan(alpha, server_share, 1)
    per_link = Frac(config.K * math.comb(config.K - 1, ti), alpha * int(m))
    L1 = per_link.denominator  # smallest L1 with per_link*L1 an integer
    return SplitPlan(alpha, server_share, L1)


# ---------------------------------------------------------------------------
# closed-form rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CentralizedRates:
    """Closed-form delivery rates: server R1, per-link user R2, delay T."""

    R1: Frac
    R2: Frac
    T: Frac
    alpha: Optional[int]
    server_share: Optional[Frac]
    L1: Optional[int]
    interpolated: bool = False


def _rates_integer_t(
    config: SystemConfig,
    ti: int,
    alpha: Optional[int],
    server_share: Optional[Frac],
) -> CentralizedRates:
    sub = SystemConfig(config.N, config.K, Frac(ti * config.N, config.K),
                       config.alpha_max, config.F)
    plan = make_split_plan(sub, alpha=alpha, server_share=server_share)
    K = config.K
    base = K * (1 - sub.p)
    lam = plan.server_share
    R1 = lam * base / (1 + ti)
    m = coding_gain_m(K, Frac(ti), plan.alpha)
    R2 = (1 - lam) * base / (plan.alpha * m) if m > 0 else Frac(0)
    if base == 0:
        R1 = R2 = Frac(0)
    return CentralizedRates(R1, R2, max(R1, R2), plan.alpha, lam, plan.L1)


def centralized_rates(
    config: SystemConfig,
    alpha: Optional[int] = None,
    server_share: Optional[Frac] = None,
) -> CentralizedRates:
    """Delivery rates for the centralized scheme at this config.

    Integer t: exact formulas at the given (or delay-optimal) alpha.
    Non-integer t: memory sharing between the two adjacent integer-t
    placements — the file/caches are split so each sub-placement is run at
    its own optimum (or at the fixed alpha if given), and rates combine
    linearly.
    """
    t = config.t
    if t.denominator == 1:
        return _rates_integer_t(config, int(t), alpha, server_share)
    t0, t1 = int(t), int(t) + 1
    theta = t - t0  # fraction of memory/time on the upper placement
    lo = _rates_integer_t(config, t0, alpha, server_share)
    hi = _rates_integer_t(config, t1, alpha, server_share)
    mix = lambda a, b: (1 - theta) * a + theta * b
    return CentralizedRates(
        mix(lo.R1, hi.R1),
        mix(lo.R2, hi.R2),
        mix(lo.T, hi.T),
        alpha,
        None,
        None,
        interpolated=True,
    )


def centralized_delay(config: SystemConfig, alpha: Optional[int] = None) -> Frac:
    """Delivery delay T = max(R1, R2) at balanced split (convenience)."""
    return centralized_rates(config, alpha=alpha).T


# ---------------------------------------------------------------------------
# server schedule
# ---------------------------------------------------------------------------


def build_server_schedule(
    config: SystemConfig, plan: SplitPlan, demands: Sequence[int]
) -> list[XorSymbol]:
    """Server multicast: for each (t+1)-subset S, XOR of server shares
    W^s_{d_k, S\\{k}} over k in S; each symbol is lambda*F/C(K,t) long."""
    d = validate_demands(config, demands)
    placement = build_central_placement(config)
    t, K = placement.t, config.K
    lam = plan.server_share
    if lam == 0 or t >= K:
        return []
    size = lam / math.comb(K, t)
    everyone = tuple(config.users())
    out: list[XorSymbol] = []
    for S in enumerate_subsets(K, t + 1):
        cons = tuple(
            Constituent(k, FragmentId(d[k - 1], tuple(x for x in S if x != k), "s", 0, 1))
            for k in S
        )
        out.append(XorSymbol(0, everyone, cons, size))
    return out


# ---------------------------------------------------------------------------
# user schedule: quota flow + Latin assembly + slot-sequence execution
# ---------------------------------------------------------------------------


class _Dinic:
    """Small deterministic integer max-flow (adjacency in insertion order)."""

    def __init__(self, n: int) -> None:
        self.n = n
        self.adj: list[list[int]] = [[] for _ in range(n)]
        self.to: list[int] = []
        self.cap: list[int] = []

    def add_edge(self, u: int, v: int, cap: int) -> int:
        eid = len(self.to)
        self.adj[u].append(eid)
        self.to.append(v)
        self.cap.append(cap)
        self.adj[v].append(eid + 1)
        self.to.append(u)
        self.cap.append(0)
        return eid

    def max_flow(self, s: int, t: int) -> int:
        flow = 0
        while True:
            level = [-1] * self.n
            level[s] = 0
            queue = [s]
            for u in queue:
                for eid in self.adj[u]:
                    v = self.to[eid]
                    if self.cap[eid] > 0 and level[v] < 0:
                        level[v] = level[u] + 1
                        queue.append(v)
            if level[t] < 0:
                return flow
            it = [0] * self.n

            def dfs(u: int, pushed: int) -> int:
                if u == t:
                    return pushed
                while it[u] < len(self.adj[u]):
                    eid = self.adj[u][it[u]]
                    v = self.to[eid]
                    if self.cap[eid] > 0 and level[v] == level[u] + 1:
                        got = dfs(v, min(pushed, self.cap[eid]))
                        if got > 0:
                            self.cap[eid] -= got
                            self.cap[eid ^ 1] += got
                            return got
                    it[u] += 1
                return 0

            while True:
                pushed = dfs(s, 1 << 60)
                if pushed == 0:
                    break
                flow += pushed


def _solve_hosting(
    classes: list[tuple[int, tuple[int, ...]]],
    candidates: dict[tuple[int, tuple[int, ...]], list[tuple[int, ...]]],
    quotas: dict[tuple[int, ...], int],
    L: int,
    m: int,
) -> Optional[dict[tuple[int, tuple[int, ...]], list[tuple[tuple[int, ...], int]]]]:
    """Route L pico-file units per class (receiver j, subset T) to hosting
    groups, respecting per-(receiver, group) caps of quota(G) (a receiver
    occupies at most one constituent slot per symbol) and per-group totals
    of m*quota(G) (each symbol carries m constituents).

    Returns {class: [(group, units), ...]} or None if infeasible.
    """
    total = L * len(classes)
    groups = sorted(g for g, q in quotas.items() if q > 0)
    gid = {g: i for i, g in enumerate(groups)}
    n_class = len(classes)
    # nodes: src, classes, (receiver, group) pairs, groups, sink.  The
    # receiver-group layer caps a receiver's total hosting inside one group
    # at quota(G): a receiver occupies at most one constituent per symbol.
    jg_ids: dict[tuple[int, tuple[int, ...]], int] = {}
    for cls in classes:
        j = cls[0]
        for G in candidates[cls]:
            if quotas.get(G, 0) > 0 and (j, G) not in jg_ids:
                jg_ids[(j, G)] = len(jg_ids)
    n_nodes = 1 + n_class + len(jg_ids) + len(groups) + 1
    src, dst = 0, n_nodes - 1
    jg_base = 1 + n_class
    grp_base = jg_base + len(jg_ids)
    net = _Dinic(n_nodes)
    class_edges: list[list[tuple[int, tuple[int, ...]]]] = []
    for ci, cls in enumerate(classes):
        net.add_edge(src, 1 + ci, L)
        edges_here: list[tuple[int, tuple[int, ...]]] = []
        for G in candidates[cls]:
            if quotas.get(G, 0) > 0:
                eid = net.add_edge(1 + ci, jg_base + jg_ids[(cls[0], G)], L)
                edges_here.append((eid, G))
        class_edges.append(edges_here)
    for (j, G), ji in sorted(jg_ids.items()):
        net.add_edge(jg_base + ji, grp_base + gid[G], quotas[G])
    for G in groups:
        net.add_edge(grp_base + gid[G], dst, m * quotas[G])
    if net.max_flow(src, dst) != total:
        return None
    out: dict[tuple[int, tuple[int, ...]], list[tuple[tuple[int, ...], int]]] = {}
    for ci, cls in enumerate(classes):
        alloc = []
        for eid, G in class_edges[ci]:
            used = net.cap[eid ^ 1]  # flow = reverse residual
            if used:
                alloc.append((G, used))
        out[cls] = alloc
    return out


def _slot_quotas(
    partitions: list[tuple[tuple[int, ...], ...]], slots: int, offset: int
) -> tuple[list[tuple[tuple[int, ...], ...]], Counter]:
    """Cyclic slot sequence over the canonical partition list, plus the
    per-group appearance counts it induces."""
    beta = len(partitions)
    seq = [partitions[(offset + i) % beta] for i in range(slots)]
    quotas: Counter = Counter()
    for part in seq:
        for G in part:
            quotas[G] += 1
    return seq, quotas


def _rho_ladder(slots1: int, beta: int) -> list[tuple[int, int]]:
    """Deterministic (rho, offset) attempts.  slots1 = slot count at rho=1
    (an integer by the minimality of L1).

    Small rhos with a few cyclic offsets are tried first (they keep symbol
    counts minimal, and the canonical worked examples run at rho=1); the
    uniform full-cycle rho — always feasible because the even fractional
    hosting solution respects uniform quotas with slack — terminates the
    ladder.
    """
    rho_uniform = beta // math.gcd(slots1, beta)
    attempts: list[tuple[int, int]] = []
    for rho in (1, 2, 3, 4, 6, 8, 12):
        for off in range(min(beta, 12)):
            attempts.append((rho, off))
    for mult in (1, 2, 3, 4):
        attempts.append((rho_uniform * mult, 0))
    seen: set[tuple[int, int]] = set()
    out: list[tuple[int, int]] = []
    for a in attempts:
        if a not in seen:
            seen.add(a)
            out.append(a)
    return out


def build_user_schedule(
    config: SystemConfig, plan: SplitPlan, demands: Sequence[int]
) -> DeliverySchedule:
    """Cooperative user delivery covering every pico-file exactly once.

    Groups of size fp = min(K//alpha, t+1) transmit in parallel (alpha
    disjoint groups per slot); a symbol from sender u in group G XORs one
    pico-file W^{u,l}_{d_j,T_j} for every other member j (with G\\{j}
    contained in T_j, so everyone else in G caches it and j can strip it).
    Raises SchedulingError if no feasible assignment exists at any rung of
    the refinement ladder (which would indicate an internal inconsistency —
    the uniform full-cycle rung is provably feasible).
    """
    d = validate_demands(config, demands)
    placement = build_central_placement(config)
    t, K = placement.t, config.K
    alpha, lam = plan.alpha, plan.server_share
    sched = DeliverySchedule()
    if t == 0 or t >= K or lam == 1:
        return sched  # nothing for users to deliver
    g = K // alpha
    fp = min(g, t + 1)
    m = fp - 1
    assert m == int(coding_gain_m(K, Frac(t), alpha))
    subsets_t = enumerate_subsets(K, t)
    classes = [(j, T) for j in config.users() for T in subsets_t if j not in T]
    candidates = {
        (j, T): [tuple(sorted((j,) + B)) for B in itertools.combinations(T, m)]
        for (j, T) in classes
    }
    partitions = enumerate_equal_partitions(K, fp, alpha)
    beta = len(partitions)
    P1 = K * math.comb(K - 1, t) * plan.L1
    if P1 % (m * alpha):
        raise SchedulingError(
            f"layer count L1={plan.L1} does not make the slot count integral"
        )
    slots1 = P1 // (m * alpha)

    last_err = "no attempts made"
    for rho, offset in _rho_ladder(slots1, beta):
        L = plan.L1 * rho
        slots = slots1 * rho
        seq, quotas = _slot_quotas(partitions, slots, offset)
        assignment = _solve_hosting(classes, candidates, dict(quotas), L, m)
        if assignment is None:
            last_err = f"hosting flow infeasible at rho={rho}, offset={offset}"
            continue
        return _assemble_schedule(
            config, placement, plan, d, seq, quotas, assignment, L, fp
        )
    raise SchedulingError(
        f"user delivery infeasible for K={K}, t={t}, alpha={alpha}: {last_err}"
    )


def _assemble_schedule(
    config: SystemConfig,
    placement: CentralPlacement,
    plan: SplitPlan,
    demands: tuple[int, ...],
    seq: list[tuple[tuple[int, ...], ...]],
    quotas: Counter,
    assignment: dict,
    L: int,
    fp: int,
) -> DeliverySchedule:
    """Latin assembly per group, then execution along the slot sequence."""
    K = config.K
    m = fp - 1
    size = (1 - plan.server_share) / Frac(math.comb(K, placement.t) * L)

    # Per-group receiver workloads: ordered pico-file lists per receiver.
    group_load: dict[tuple[int, ...], dict[int, list[FragmentId]]] = {
        G: {u: [] for u in G} for G in quotas if quotas[G] > 0
    }
    next_layer: Counter = Counter()
    for (j, T) in sorted(assignment.keys()):
        for G, units in sorted(assignment[(j, T)]):
            for _ in range(units):
                layer = next_layer[(j, T)]
                next_layer[(j, T)] += 1
                frag = FragmentId(demands[j - 1], T, "u", layer, L)
                group_load[G][j].append(frag)

    # Assemble each group's symbols: sender u appears quota - c_u times and
    # receiver j's picos land exactly on the symbols whose sender is not j.
    group_symbols: dict[tuple[int, ...], list[XorSymbol]] = {}
    for G, per_recv in group_load.items():
        Q = quotas[G]
        counts = {u: len(per_recv[u]) for u in G}
        if any(c > Q for c in counts.values()) or sum(counts.values()) != m * Q:
            raise SchedulingError(f"group {G} workload inconsistent with quota {Q}")
        senders: list[int] = []
        for u in G:
            senders.extend([u] * (Q - counts[u]))
        if len(senders) != Q:
            raise SchedulingError(f"group {G} sender multiset does not fill quota")
        taken = {u: 0 for u in G}
        symbols = []
        for i in range(Q):
            cons = []
            for j in G:
                if j == senders[i]:
                    continue
                frag = per_recv[j][taken[j]]
                taken[j] += 1
                cons.append(Constituent(j, frag))
            symbols.append(XorSymbol(senders[i], G, tuple(cons), size))
        group_symbols[G] = symbols

    # Execute along the slot sequence; merge consecutive equal partitions
    # into rounds for the per-link delay accounting.
    sched = DeliverySchedule()
    cursor: Counter = Counter()
    i = 0
    round_index = 0
    while i < len(seq):
        j = i
        while j < len(seq) and seq[j] == seq[i]:
            j += 1
        part = GroupPartition(seq[i], round_index)
        round_syms: list[XorSymbol] = []
        for slot in range(i, j):
            for G in seq[i]:
                round_syms.append(group_symbols[G][cursor[G]])
                cursor[G] += 1
        sched.user_rounds.append((part, round_syms))
        round_index += 1
        i = j

    _audit_user_schedule(config, placement, demands, sched, L, m, size)
    return sched


def _audit_user_schedule(
    config: SystemConfig,
    placement: CentralPlacement,
    demands: tuple[int, ...],
    sched: DeliverySchedule,
    L: int,
    m: int,
    size: Frac,
) -> None:
    """Hard guarantees: every pico-file delivered exactly once, every symbol
    decodable by construction, every constituent cached by its co-members."""
    seen: Counter = Counter()
    for part, syms in sched.user_rounds:
        for sym in syms:
            if len(sym.constituents) != m:
                raise SchedulingError(f"symbol codes {len(sym.constituents)} != {m}")
            if sym.size != size:
                raise SchedulingError("unequal pico sizes in user schedule")
            if sym.sender not in sym.group:
                raise SchedulingError("sender outside its group")
            for c in sym.constituents:
                j, frag = c.receiver, c.fragment
                if j == sym.sender or j not in sym.group:
                    raise SchedulingError("constituent receiver misplaced")
                others = set(sym.group) - {j}
                if not others <= set(frag.subset):
                    raise SchedulingError(
                        f"group {sym.group} cannot strip {frag} for user {j}"
                    )
                seen[(j, frag.subset, frag.index)] += 1
    users = list(config.users())
    for j in users:
        for T in placement.subsets:
            if j in T:
                continue
            for layer in range(L):
                if seen[(j, T, layer)] != 1:
                    raise SchedulingError(
                        f"pico (user {j}, T={T}, layer {layer}) delivered "
                        f"{seen[(j, T, layer)]} times"
                    )


def build_delivery(
    config: SystemConfig,
    demands: Sequence[int],
    alpha: Optional[int] = None,
    server_share: Optional[Frac] = None,
) -> tuple[SplitPlan, DeliverySchedule]:
    """Full centralized delivery: server symbols plus user rounds."""
    plan = make_split_plan(config, alpha=alpha, server_share=server_share)
    sched = build_user_schedule(config, plan, demands)
    sched.server_symbols = build_server_schedule(config, plan, demands)
    return plan, sched
