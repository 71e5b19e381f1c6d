"""End-to-end schedule execution, load measurement, and decode verification.

Two link classes run in parallel: the server's broadcast link and the user
cooperation links.  A schedule is executed into a :class:`TransmissionLog`
whose slots are per-link ordering indices — the server timeline and the user
timeline both start at slot 0 and overlap in wall-clock time, which is what
makes the delay max{R1, R2} rather than a sum.

Two payload modes:

* fluid — symbols carry exact rational sizes (fractions of F); measured
  loads must equal the closed-form rates exactly, no tolerance;
* bits — a concrete :class:`BitLibrary` is materialised, fragments map to
  real bit positions, symbols carry XOR payloads, and decoding is checked
  bit-for-bit.

Loads: R1 is the total on the server link; R2 sums, round by round, the
busiest cooperation lane (groups inside one round transmit in parallel, so
the round lasts as long as its most loaded group).

:func:`brute_force_decode_check` re-derives what every user can decode by
peeling: starting from its cache, a user resolves any received symbol with
at most one unknown constituent, iterating to a fixpoint.  It never consults
the scheduler's own coverage bookkeeping, so scheduler bugs cannot vouch
for themselves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction as Frac
from typing import Optional, Sequence, Union

import numpy as np

from .centralized import (
    CentralPlacement,
    SplitPlan,
    build_central_placement,
    build_delivery,
    centralized_rates,
)
from .decentralized import (
    AllocationPlan,
    DecentralPlacement,
    allocation_plan,
    build_decentral_delivery,
    build_decentral_placement,
    decentralized_rates,
)
from .model import (
    DeliverySchedule,
    FragmentId,
    SystemConfig,
    XorSymbol,
    enumerate_subsets,
    validate_demands,
)

# ---------------------------------------------------------------------------
# library and log
# ---------------------------------------------------------------------------


@dataclass
class BitLibrary:
    """N independent F-bit files, deterministically regenerable from seed."""

    N: int
    F: int
    seed: int
    files: dict[int, np.ndarray] = field(default_factory=dict, repr=False)

    @classmethod
    def build(cls, N: int, F: int, seed: int = 0) -> "BitLibrary":
        lib = cls(N, F, seed)
        for n in range(1, N + 1):
            rng = np.random.default_rng((seed, n))
            lib.files[n] = rng.integers(0, 2, size=F, dtype=np.uint8)
        return lib


@dataclass(frozen=True)
class LogEntry:
    """One transmitted symbol: where it sat in its link's timeline and who
    heard it.  ``bits`` is an int (bit mode) or a fraction of F (fluid)."""

    slot: int
    round_index: int  # -1 for the server link
    sender: int  # 0 = server
    group: tuple[int, ...]
    receivers: tuple[int, ...]
    bits: Union[int, Frac]
    symbol: XorSymbol


@dataclass
class TransmissionLog:
    """Ordered record of an executed schedule, with load accounting."""

    config: SystemConfig
    mode: str  # "fluid" | "bits"
    entries: list[LogEntry] = field(default_factory=list)
    resolver: Optional["FragmentResolver"] = None

    def _as_rate(self, bits: Union[int, Frac]) -> Frac:
        if self.mode == "bits":
            return Frac(int(bits), self.config.F)
        return bits if isinstance(bits, Frac) else Frac(bits)

    def server_load(self) -> Frac:
        """Total traffic on the server link, as a fraction of F."""
        return sum(
            (self._as_rate(e.bits) for e in self.entries if e.sender == 0), Frac(0)
        )

    def user_load(self) -> Frac:
        """Cooperation-link delay: per round, the busiest lane; summed."""
        per_round_lane: dict[int, dict[tuple, Frac]] = {}
        for e in self.entries:
            if e.sender == 0:
                continue
            lanes = per_round_lane.setdefault(e.round_index, {})
            lanes[e.group] = lanes.get(e.group, Frac(0)) + self._as_rate(e.bits)
        return sum((max(lanes.values()) for lanes in per_round_lane.values()), Frac(0))

    def delay(self) -> Frac:
        return max(self.server_load(), self.user_load())

    def verify_slot_discipline(self) -> None:
        """Each slot: at most one server symbol; user senders bounded by
        alpha_max and their groups pairwise disjoint."""
        server_slots = set()
        user_slots: dict[int, list[LogEntry]] = {}
        for e in self.entries:
            if e.sender == 0:
                if e.slot in server_slots:
                    raise ValueError(f"two server symbols in slot {e.slot}")
                server_slots.add(e.slot)
            else:
                user_slots.setdefault(e.slot, []).append(e)
        for slot, entries in user_slots.items():
            if len(entries) > self.config.alpha_max:
                raise ValueError(
                    f"slot {slot} has {len(entries)} user senders "
                    f"(alpha_max={self.config.alpha_max})"
                )
            seen: set[int] = set()
            for e in entries:
                if seen & set(e.group):
                    raise ValueError(f"slot {slot} has overlapping groups")
                seen |= set(e.group)

    def export_lines(self) -> list[str]:
        """Stable text export, one record per symbol.

        Format: header ``slot,sender,receivers,bits`` then one line per
        entry; receivers are '|'-joined user ids; bits is an integer in bit
        mode and an exact fraction of F (like ``1/45``) in fluid mode.
        """
        out = ["slot,sender,receivers,bits"]
        for e in self.entries:
            recv = "|".join(str(r) for r in e.receivers)
            out.append(f"{e.slot},{e.sender},{recv},{e.bits}")
        return out


# ---------------------------------------------------------------------------
# fragment resolution: fragment id -> exact size / concrete bit positions
# ---------------------------------------------------------------------------


class FragmentResolver:
    """Maps fragment ids to exact sizes (fluid) or bit positions (bits).

    This is protocol knowledge — placement layout plus the public split
    plan — available to every decoder, as opposed to the scheduler's private
    bookkeeping of who decodes what when.
    """

    def subfile_keys(self) -> list[tuple[int, ...]]:
        raise NotImplementedError

    def subfile_size(self, T: tuple[int, ...]) -> Frac:
        raise NotImplementedError

    def subfile_positions(self, file: int, T: tuple[int, ...]) -> np.ndarray:
        raise NotImplementedError

    def frag_size(self, frag: FragmentId) -> Frac:
        raise NotImplementedError

    def frag_positions(self, frag: FragmentId) -> np.ndarray:
        raise NotImplementedError


def required_central_F(config: SystemConfig, plan: SplitPlan) -> int:
    """Smallest F for which every centralized fragment is a whole number of
    bits: the subfile, its server share, and each of the L1 user slices."""
    t = int(config.t)
    C = math.comb(config.K, t)
    dens = [
        Frac(1, C).denominator,
        (plan.server_share / C).denominator,
        ((1 - plan.server_share) / (C * plan.L1)).denominator,
    ]
    return math.lcm(*dens)


class CentralFragmentResolver(FragmentResolver):
    """Deterministic contiguous layout for the centralized scheme.

    File bits are split into C(K,t) equal subfiles in lexicographic subset
    order; each subfile is a server prefix (share lambda) followed by L1
    equal user slices.  A schedule may refine each slice into rho equal
    sub-slices (fragments then carry count = L1*rho); sub-slice positions
    split near-equally.  Layout is file-independent.
    """

    def __init__(
        self,
        placement: CentralPlacement,
        plan: SplitPlan,
        F: Optional[int] = None,
    ) -> None:
        self.config = placement.config
        self.plan = plan
        t = int(self.config.t)
        self.C = math.comb(self.config.K, t)
        self._index = {T: i for i, T in enumerate(placement.subsets)}
        self.F = F
        if F is not None:
            need = required_central_F(self.config, plan)
            if F % need:
                raise ValueError(
                    f"F={F} cannot be split exactly; use a multiple of {need}"
                )
            self.sub_len = F // self.C
            self.s_len = int(plan.server_share * self.sub_len)
            self.u_len = (self.sub_len - self.s_len) // plan.L1

    def subfile_keys(self) -> list[tuple[int, ...]]:
        return list(self._index)

    def subfile_size(self, T: tuple[int, ...]) -> Frac:
        return Frac(1, self.C)

    def subfile_positions(self, file: int, T: tuple[int, ...]) -> np.ndarray:
        start = self._index[T] * self.sub_len
        return np.arange(start, start + self.sub_len)

    def frag_size(self, frag: FragmentId) -> Frac:
        if frag.part == "s":
            return self.plan.server_share / self.C
        if frag.part == "u":
            return (1 - self.plan.server_share) / (self.C * frag.count)
        raise ValueError(f"unknown centralized part {frag.part!r}")

    def frag_positions(self, frag: FragmentId) -> np.ndarray:
        start = self._index[frag.subset] * self.sub_len
        if frag.part == "s":
            return np.arange(start, start + self.s_len)
        if frag.part == "u":
            L1 = self.plan.L1
            if frag.count % L1:
                raise ValueError(
                    f"fragment count {frag.count} does not refine L1={L1}"
                )
            rho = frag.count // L1
            lo = start + self.s_len + (frag.index // rho) * self.u_len
            slice_pos = np.arange(lo, lo + self.u_len)
            return np.array_split(slice_pos, rho)[frag.index % rho]
        raise ValueError(f"unknown centralized part {frag.part!r}")


class DecentralFragmentResolver(FragmentResolver):
    """Random-placement layout: subfile positions from the placement, the
    server share as a floor(lambda * len) prefix, the user remainder split
    near-equally (u) or lambda2-prefixed then split (u1/u2)."""

    def __init__(self, placement: DecentralPlacement, plan: AllocationPlan) -> None:
        self.placement = placement
        self.plan = plan
        self.config = placement.config
        K = self.config.K
        self._keys = [
            T for size in range(K + 1) for T in enumerate_subsets(K, size)
        ]

    def subfile_keys(self) -> list[tuple[int, ...]]:
        return self._keys

    def subfile_size(self, T: tuple[int, ...]) -> Frac:
        return self.placement.subfile_size(T)

    def subfile_positions(self, file: int, T: tuple[int, ...]) -> np.ndarray:
        return self.placement.subfile_positions[(file, T)]

    def _shares(self, frag: FragmentId) -> tuple[Frac, Frac]:
        """(start, length) of the fragment inside its subfile, as shares."""
        lam = self.plan.server_share
        if frag.part == "full":
            return Frac(0), Frac(1)
        if frag.part == "s":
            return Frac(0), lam
        user = 1 - lam
        if frag.part == "u":
            return lam + user * Frac(frag.index, frag.count), user / frag.count
        s = len(frag.subset) + 1  # round that serves |T| = s-1
        lam2 = self.plan.lambda2_by_round[s]
        if frag.part == "u1":
            base, span = lam, user * lam2
        elif frag.part == "u2":
            base, span = lam + user * lam2, user * (1 - lam2)
        else:
            raise ValueError(f"unknown decentralized part {frag.part!r}")
        return base + span * Frac(frag.index, frag.count), span / frag.count

    def frag_size(self, frag: FragmentId) -> Frac:
        _, span = self._shares(frag)
        return span * self.subfile_size(frag.subset)

    def frag_positions(self, frag: FragmentId) -> np.ndarray:
        pos = self.subfile_positions(frag.file, frag.subset)
        n = len(pos)
        lam = self.plan.server_share
        s_len = math.floor(lam * n)
        if frag.part == "full":
            return pos
        if frag.part == "s":
            return pos[:s_len]
        user = pos[s_len:]
        if frag.part == "u":
            return np.array_split(user, frag.count)[frag.index]
        s = len(frag.subset) + 1
        u1_len = math.floor(self.plan.lambda2_by_round[s] * len(user))
        if frag.part == "u1":
            return np.array_split(user[:u1_len], frag.count)[frag.index]
        if frag.part == "u2":
            return np.array_split(user[u1_len:], frag.count)[frag.index]
        raise ValueError(f"unknown decentralized part {frag.part!r}")


# ---------------------------------------------------------------------------
# schedule execution
# ---------------------------------------------------------------------------


def _symbol_payload(
    sym: XorSymbol, resolver: FragmentResolver, library: BitLibrary
) -> tuple[np.ndarray, int]:
    parts = [
        library.files[c.fragment.file][resolver.frag_positions(c.fragment)]
        for c in sym.constituents
    ]
    length = max((len(p) for p in parts), default=0)
    out = np.zeros(length, dtype=np.uint8)
    for p in parts:
        out[: len(p)] ^= p
    return out, length


def execute_schedule(
    config: SystemConfig,
    schedule: DeliverySchedule,
    resolver: FragmentResolver,
    mode: str,
    library: Optional[BitLibrary] = None,
) -> TransmissionLog:
    """Run a built schedule into a transmission log.

    Server symbols occupy their own link's slots 0..; each user round packs
    its lanes in parallel (lane i's j-th symbol in relative slot j).  Bit
    mode attaches XOR payloads and counts real lengths; fluid mode carries
    the symbols' rational sizes.
    """
    if mode == "bits" and library is None:
        raise ValueError("bit mode needs a BitLibrary")
    log = TransmissionLog(config, mode, resolver=resolver)

    def bits_of(sym: XorSymbol) -> tuple[Union[int, Frac], XorSymbol]:
        if mode == "fluid":
            return sym.size, sym
        payload, length = _symbol_payload(sym, resolver, library)
        return length, XorSymbol(
            sym.sender, sym.group, sym.constituents, sym.size, payload, sym.redundant
        )

    for slot, sym in enumerate(schedule.server_symbols):
        bits, carried = bits_of(sym)
        log.entries.append(
            LogEntry(slot, -1, 0, sym.group, sym.receivers(), bits, carried)
        )
    base = 0
    for partition, symbols in schedule.user_rounds:
        lanes: dict[tuple, list[XorSymbol]] = {}
        for sym in symbols:
            lanes.setdefault(sym.group, []).append(sym)
        depth = max((len(v) for v in lanes.values()), default=0)
        for j in range(depth):
            for group, lane_syms in lanes.items():
                if j < len(lane_syms):
                    sym = lane_syms[j]
                    bits, carried = bits_of(sym)
                    log.entries.append(
                        LogEntry(
                            base + j,
                            partition.round_index,
                            sym.sender,
                            group,
                            carried.receivers(),
                            bits,
                            carried,
                        )
                    )
        base += depth
    log.verify_slot_discipline()
    return log


# ---------------------------------------------------------------------------
# decode verification
# ---------------------------------------------------------------------------


def _peel_known_fragments(
    log: TransmissionLog, user: int, library: Optional[BitLibrary] = None
) -> dict[FragmentId, Optional[np.ndarray]]:
    """Fragments ``user`` ends up knowing: cached subsets plus everything
    peelable from received symbols (at most one unknown constituent each).
    Values are payloads in bit mode, None in fluid mode."""
    resolver = log.resolver
    bit_mode = log.mode == "bits"
    known: dict[FragmentId, Optional[np.ndarray]] = {}

    def knows(frag: FragmentId) -> bool:
        if frag in known:
            return True
        if user in frag.subset:
            return True
        if bit_mode:
            return len(resolver.frag_positions(frag)) == 0
        return resolver.frag_size(frag) == 0

    def payload_of(frag: FragmentId) -> np.ndarray:
        if frag in known and known[frag] is not None:
            return known[frag]
        # cached (or empty) fragment: read it straight off the subfile bits
        return library.files[frag.file][resolver.frag_positions(frag)]

    received = [e for e in log.entries if user in e.receivers]
    progress = True
    while progress:
        progress = False
        for e in received:
            unknown = [c for c in e.symbol.constituents if not knows(c.fragment)]
            if len(unknown) != 1:
                continue
            target = unknown[0].fragment
            if bit_mode:
                acc = np.array(e.symbol.payload, copy=True)
                for c in e.symbol.constituents:
                    if c.fragment == target:
                        continue
                    part = payload_of(c.fragment)
                    acc[: len(part)] ^= part
                length = len(resolver.frag_positions(target))
                known[target] = acc[:length]
            else:
                known[target] = None
            progress = True
    return known


def _uncovered_subfile(
    log: TransmissionLog, user: int, want: int, known: dict
) -> Optional[tuple[int, ...]]:
    """First needed subfile of ``want`` that ``known`` does not fully cover
    (exact size bookkeeping; parts partition their subfile)."""
    resolver = log.resolver
    bit_mode = log.mode == "bits"
    for T in resolver.subfile_keys():
        if user in T:
            continue
        if bit_mode:
            target = Frac(len(resolver.subfile_positions(want, T)))
        else:
            target = resolver.subfile_size(T)
        if target == 0:
            continue
        if FragmentId(want, T, "full", 0, 1) in known:
            continue
        sizes = (
            (Frac(len(resolver.frag_positions(f))) if bit_mode else resolver.frag_size(f))
            for f in known
            if f.file == want and f.subset == T and f.part != "full"
        )
        if sum(sizes, Frac(0)) != target:
            return T
    return None


def brute_force_decode_check(
    log: TransmissionLog,
    placement,
    demands: Sequence[int],
    library: Optional[BitLibrary] = None,
) -> bool:
    """True iff every user can reconstruct its demanded file from its cache
    plus the logged transmissions, derived independently of the scheduler.

    Fluid mode checks exact size coverage of every needed subfile; bit mode
    reassembles the file bit-for-bit and compares against the library.
    """
    config = log.config
    resolver = log.resolver
    if resolver is None:
        raise ValueError("log carries no fragment resolver")
    if log.mode == "bits" and library is None:
        raise ValueError("bit-mode decode check needs the library")
    demands = validate_demands(config, demands)

    for k in config.users():
        want = demands[k - 1]
        known = _peel_known_fragments(log, k, library)
        if log.mode == "fluid":
            if _uncovered_subfile(log, k, want, known) is not None:
                return False
        else:
            rebuilt = np.full(config.F, 2, dtype=np.uint8)
            for T in resolver.subfile_keys():
                if k in T:
                    pos = resolver.subfile_positions(want, T)
                    rebuilt[pos] = library.files[want][pos]
            for frag, payload in known.items():
                if frag.file != want or payload is None:
                    continue
                pos = resolver.frag_positions(frag)
                rebuilt[pos] = payload
            if not np.array_equal(rebuilt, library.files[want]):
                return False
    return True


# ---------------------------------------------------------------------------
# rate reporting and the end-to-end runs
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateReport:
    """Measured loads next to their closed-form targets.

    ``R1``/``R2`` are what the log realises (server link, cooperation
    links); ``T`` = max{R1, R2} is the realised delay.  ``closed_T`` is the
    scheme's headline delay formula — for the decentralized scheme that
    formula sits at or below the balanced max{R1, R2}.  Component rates and
    splits are carried for the decentralized scheme.
    """

    R1: Frac
    R2: Frac
    T: Frac
    closed_R1: Frac
    closed_R2: Frac
    closed_T: Frac
    matches_closed: bool
    server_share: Frac
    R_empty: Optional[Frac] = None
    R_s: Optional[Frac] = None
    R_u: Optional[Frac] = None
    lambda2_by_round: dict = field(default_factory=dict)


@dataclass
class SimulationResult:
    log: TransmissionLog
    decode_ok: Optional[bool]
    rates: RateReport
    plan: object
    schedule: DeliverySchedule
    placement: object
    library: Optional[BitLibrary] = None


def run_centralized(
    config: SystemConfig,
    demands: Optional[Sequence[int]] = None,
    seed: int = 0,
    mode: str = "fluid",
    alpha: Optional[int] = None,
    server_share: Optional[Frac] = None,
    check_decode: bool = True,
) -> SimulationResult:
    """Place, schedule, execute, measure, and decode the centralized scheme.

    Needs integer t.  Bit mode needs config.F divisible by the split
    denominators (the error message names the required multiple); demands
    default to user k wanting file k.
    """
    demands = validate_demands(
        config, demands if demands is not None else list(config.users())
    )
    placement = build_central_placement(config)
    plan, schedule = build_delivery(
        config, demands, alpha=alpha, server_share=server_share
    )
    library = None
    if mode == "bits":
        library = BitLibrary.build(config.N, config.F, seed)
        resolver = CentralFragmentResolver(placement, plan, config.F)
    elif mode == "fluid":
        resolver = CentralFragmentResolver(placement, plan)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    log = execute_schedule(config, schedule, resolver, mode, library)
    closed = centralized_rates(config, alpha=plan.alpha, server_share=plan.server_share)
    R1, R2 = log.server_load(), log.user_load()
    report = RateReport(
        R1,
        R2,
        max(R1, R2),
        closed.R1,
        closed.R2,
        closed.T,
        R1 == closed.R1 and R2 == closed.R2,
        plan.server_share,
    )
    decode_ok = (
        brute_force_decode_check(log, placement, demands, library)
        if check_decode
        else None
    )
    return SimulationResult(log, decode_ok, report, plan, schedule, placement, library)


def run_decentralized(
    config: SystemConfig,
    demands: Optional[Sequence[int]] = None,
    seed: int = 0,
    mode: str = "fluid",
    check_decode: bool = True,
) -> SimulationResult:
    """Place, schedule, execute, measure, and decode the decentralized
    scheme.  Fluid mode must reproduce the component rate identities
    exactly; bit mode is the convergence/decode oracle."""
    demands = validate_demands(
        config, demands if demands is not None else list(config.users())
    )
    placement = build_decentral_placement(config, seed=seed, mode=mode)
    plan, schedule = build_decentral_delivery(config, placement, demands)
    resolver = DecentralFragmentResolver(placement, plan)
    library = None
    if mode == "bits":
        library = BitLibrary.build(config.N, config.F, seed)
    log = execute_schedule(config, schedule, resolver, mode, library)
    closed = decentralized_rates(config)
    R1, R2 = log.server_load(), log.user_load()
    report = RateReport(
        R1,
        R2,
        max(R1, R2),
        closed.R1,
        closed.R2,
        closed.T,
        R1 == closed.R1 and R2 == closed.R2,
        plan.server_share,
        R_empty=plan.R_empty,
        R_s=plan.R_s,
        R_u=plan.R_u,
        lambda2_by_round=dict(plan.lambda2_by_round),
    )
    decode_ok = None
    if check_decode:
        decode_ok = brute_force_decode_check(log, placement, demands, library)
        if not decode_ok:
            first = _first_undecodable(log, demands, library)
            raise RuntimeError(f"decode failure: user cannot recover {first}")
    return SimulationResult(log, decode_ok, report, plan, schedule, placement, library)


def _first_undecodable(log, demands, library):
    """Name one (user, subfile) pair that the peeling decoder cannot cover."""
    for k in log.config.users():
        want = demands[k - 1]
        known = _peel_known_fragments(log, k, library)
        T = _uncovered_subfile(log, k, want, known)
        if T is not None:
            return f"user {k}, file {want}, subfile {T}"
    return "a fragment not visible to coverage accounting"
