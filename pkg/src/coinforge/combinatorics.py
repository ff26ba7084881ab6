"""Random committee lists and sparse publish graphs, with verification.

Two combinatorial objects back the protocol:

  * a list of q committees (s-element subsets of [n]) such that no corruption
    set B of size <= (alpha-epsilon)*n overloads (|Q_i ∩ B| >= alpha*s) c or
    more of them;
  * per committee, a bipartite graph assigning every one of the n receiver
    vertices exactly Delta distinct neighbors inside the committee, such that
    no fault set B ⊂ Q of size ceil(s/3)-1 gives d or more receivers at least
    Delta/2 neighbors in B.

Both are produced Las-Vegas style: sample uniformly, verify, resample on
failure. Sampling is a partial Fisher-Yates shuffle, which matches the
hypergeometric analysis behind the failure bounds. Committees are public,
deterministic objects fixed before any execution; the adversary never
influences generation.

Verification modes: "exhaustive" enumerates every maximal-size B (maximality
suffices by monotonicity), "sampled" draws uniform sets plus one greedy
adversarial set (parties ranked by membership count — a heuristic, never a
proof), "none" skips. Exhaustive enumeration is budgeted by (B, row)
membership checks; past the budget the caller is told to use sampled mode.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass

import numpy as np

from ._kernels import membership_matrix, rows_meeting_threshold
from .params import ParamError

DEFAULT_CHECK_BUDGET = 10_000_000
DEFAULT_SAMPLE_TRIALS = 200
DEFAULT_MAX_ATTEMPTS = 1000
_CHUNK = 8192


class VerificationBudgetError(ParamError):
    """Exhaustive enumeration would exceed the configured check budget."""


class GenerationError(RuntimeError):
    """The Las-Vegas loop hit its resample cap without an accepted object."""


@dataclass(frozen=True)
class VerifyResult:
    passed: bool
    mode: str
    witness: tuple[int, ...] | None = None
    enumerated: bool = True
    checks: int = 0
    note: str = ""

    def __bool__(self) -> bool:
        return self.passed


@dataclass(frozen=True)
class CommitteeLayout:
    n: int
    q: int
    s: int
    committees: tuple[tuple[int, ...], ...]
    verified: str
    seed: int
    attempts: int = 1


@dataclass(frozen=True)
class PublishGraph:
    committee_id: int
    adjacency: tuple[tuple[int, ...], ...]  # one sorted neighbor set per receiver vertex
    verified: str
    seed: int

    @property
    def delta_cap(self) -> int:
        return len(self.adjacency[0]) if self.adjacency else 0


def sample_without_replacement(rng: random.Random, pool: list[int], k: int) -> tuple[int, ...]:
    """Partial Fisher-Yates over a copy of `pool`; returns a sorted k-subset."""
    if k > len(pool):
        raise ParamError("cannot sample more elements than the pool holds")
    items = list(pool)
    limit = len(items)
    for i in range(k):
        j = rng.randrange(i, limit)
        items[i], items[j] = items[j], items[i]
    return tuple(sorted(items[:k]))


def _verified_tag(mode: str, trials: int) -> str:
    if mode == "exhaustive":
        return "exhaustive"
    if mode == "sampled":
        return f"sampled({trials})"
    return "unverified"


def _iter_b_chunks(n_items: int, size: int, universe: list[int] | None = None):
    """Yield (m, size) index arrays over all size-subsets, in lex order."""
    base = range(n_items) if universe is None else universe
    combos = itertools.combinations(base, size)
    while True:
        chunk = list(itertools.islice(combos, _CHUNK))
        if not chunk:
            return
        yield np.array(chunk, dtype=np.int64)


def _scan(member: np.ndarray, size: int, threshold: float, cap: int, universe: list[int] | None = None):
    """First B (lex order) whose row count >= cap, else None. Returns (witness, checks)."""
    checks = 0
    if size == 0:
        return None, 0
    for chunk in _iter_b_chunks(member.shape[1], size, universe):
        counts = rows_meeting_threshold(member, chunk, threshold)
        checks += chunk.shape[0] * member.shape[0]
        bad = np.nonzero(counts >= cap)[0]
        if bad.size:
            return tuple(int(x) for x in chunk[bad[0]]), checks
    return None, checks


def _sampled_scan(member, size, threshold, cap, rng, trials, universe=None):
    """Uniform B draws plus one greedy adversarial B (highest-membership parties)."""
    pool = list(range(member.shape[1])) if universe is None else list(universe)
    candidates = []
    if size:
        load = member.sum(axis=0)
        ranked = sorted(pool, key=lambda p: (-int(load[p]), p))
        candidates.append(tuple(sorted(ranked[:size])))
        for _ in range(trials):
            candidates.append(sample_without_replacement(rng, pool, size))
    checks = 0
    for cand in candidates:
        arr = np.array([cand], dtype=np.int64)
        counts = rows_meeting_threshold(member, arr, threshold)
        checks += member.shape[0]
        if counts[0] >= cap:
            return cand, checks
    return None, checks


# --- committees ------------------------------------------------------------


def committee_fault_size(n: int, alpha: float, epsilon: float) -> int:
    return math.floor((alpha - epsilon) * n)


def verify_committees(
    committees: tuple[tuple[int, ...], ...] | CommitteeLayout,
    n: int | None,
    alpha: float,
    epsilon: float,
    c: int,
    mode: str = "exhaustive",
    *,
    rng: random.Random | None = None,
    sample_trials: int = DEFAULT_SAMPLE_TRIALS,
    check_budget: int = DEFAULT_CHECK_BUDGET,
) -> VerifyResult:
    """Check the bad-committee cap: every maximal B overloads fewer than c committees.

    Exhaustive mode enumerates all B with |B| = floor((alpha-epsilon)*n); the
    returned witness is the lexicographically smallest violating B. Sampled
    mode draws uniform sets plus the greedy heavy-membership set.
    """
    if isinstance(committees, CommitteeLayout):
        layout = committees
        committees, n = layout.committees, layout.n
    if n is None:
        raise ParamError("n is required when passing raw committees")
    if c < 1:
        raise ParamError("c must be at least 1")
    if mode not in ("exhaustive", "sampled", "none"):
        raise ParamError(f"unknown verify mode {mode!r}")
    if mode == "none":
        return VerifyResult(True, mode, enumerated=False, note="verification skipped")

    s = len(committees[0])
    b = committee_fault_size(n, alpha, epsilon)
    threshold = alpha * s
    member = membership_matrix(committees, n)

    if b == 0:
        return VerifyResult(True, mode, enumerated=False, note="fault sets are empty")

    if mode == "exhaustive":
        total = math.comb(n, b) * len(committees)
        if total > check_budget:
            raise VerificationBudgetError(
                f"verification infeasible, use sampled: {total} checks exceed budget {check_budget}"
            )
        witness, checks = _scan(member, b, threshold, c)
    else:
        witness, checks = _sampled_scan(member, b, threshold, c, rng or random.Random(0), sample_trials)
    if witness is not None:
        return VerifyResult(False, mode, witness=witness, checks=checks)
    return VerifyResult(True, mode, checks=checks)


def gen_committees(
    n: int,
    q: int,
    s: int,
    alpha: float,
    epsilon: float,
    c: int,
    seed: int,
    verify_mode: str = "exhaustive",
    *,
    sample_trials: int = DEFAULT_SAMPLE_TRIALS,
    check_budget: int = DEFAULT_CHECK_BUDGET,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> CommitteeLayout:
    """Las-Vegas committee list generator.

    With s = n there is nothing to sample: q copies of [n] satisfy the cap for
    any c >= 1 (|Q_i ∩ B| = |B| <= (alpha-epsilon)*n < alpha*n), and the layout
    is marked exhaustively verified without enumeration.
    """
    if c < 1:
        raise ParamError("c must be at least 1")
    if not (1 <= s <= n):
        raise ParamError("s must be in [1, n]")
    if q < 1:
        raise ParamError("q must be at least 1")

    if s == n:
        full = tuple(range(n))
        return CommitteeLayout(n, q, s, tuple(full for _ in range(q)), "exhaustive", seed, attempts=1)

    rng = random.Random(seed)
    pool = list(range(n))
    for attempt in range(1, max_attempts + 1):
        committees = tuple(sample_without_replacement(rng, pool, s) for _ in range(q))
        res = verify_committees(
            committees, n, alpha, epsilon, c, verify_mode,
            rng=rng, sample_trials=sample_trials, check_budget=check_budget,
        )
        if res.passed:
            return CommitteeLayout(n, q, s, committees, _verified_tag(verify_mode, sample_trials), seed, attempt)
    raise GenerationError(f"no acceptable committee list within {max_attempts} resamples (seed {seed})")


# --- publish graphs ---------------------------------------------------------


def graph_fault_size(s: int) -> int:
    return math.ceil(s / 3) - 1


def verify_publish_graph(
    graph: PublishGraph,
    committee: tuple[int, ...],
    d: int,
    mode: str = "exhaustive",
    *,
    force_enumeration: bool = False,
    rng: random.Random | None = None,
    sample_trials: int = DEFAULT_SAMPLE_TRIALS,
    check_budget: int = DEFAULT_CHECK_BUDGET,
) -> VerifyResult:
    """Check the mishearing cap: every B ⊂ Q of size ceil(s/3)-1 leaves fewer
    than d receivers with >= Delta/2 neighbors in B.

    Two quantifier-vacuous cases short-circuit without enumeration unless
    force_enumeration is set: d > n (too few receivers to fail) and
    Delta = ceil(2s/3) (|B| < s/3 <= Delta/2 makes the receiver condition
    unreachable).
    """
    if d < 1:
        raise ParamError("d must be at least 1")
    if mode not in ("exhaustive", "sampled", "none"):
        raise ParamError(f"unknown verify mode {mode!r}")
    if mode == "none":
        return VerifyResult(True, mode, enumerated=False, note="verification skipped")

    s = len(committee)
    n = len(graph.adjacency)
    delta = graph.delta_cap
    b = graph_fault_size(s)

    if not force_enumeration:
        if d > n:
            return VerifyResult(True, mode, enumerated=False, note="trivial: d exceeds receiver count")
        if delta >= math.ceil(2 * s / 3):
            return VerifyResult(True, mode, enumerated=False, note="trivial: degree at ceil(2s/3)")
    if b == 0:
        return VerifyResult(True, mode, enumerated=False, note="fault sets are empty")

    member = membership_matrix(graph.adjacency, max(max(committee) + 1, n))
    threshold = delta / 2.0
    universe = sorted(committee)

    if mode == "exhaustive":
        total = math.comb(s, b) * n
        if total > check_budget:
            raise VerificationBudgetError(
                f"verification infeasible, use sampled: {total} checks exceed budget {check_budget}"
            )
        witness, checks = _scan(member, b, threshold, d, universe=universe)
    else:
        witness, checks = _sampled_scan(member, b, threshold, d, rng or random.Random(0), sample_trials, universe)
    if witness is not None:
        return VerifyResult(False, mode, witness=witness, checks=checks)
    return VerifyResult(True, mode, checks=checks)


def gen_publish_graph(
    committee: tuple[int, ...],
    n: int,
    d: int,
    delta_cap: int,
    seed: int,
    verify_mode: str = "exhaustive",
    *,
    committee_id: int = 0,
    sample_trials: int = DEFAULT_SAMPLE_TRIALS,
    check_budget: int = DEFAULT_CHECK_BUDGET,
    max_attempts: int = DEFAULT_MAX_ATTEMPTS,
) -> PublishGraph:
    """Las-Vegas publish graph generator for one committee.

    Every receiver vertex v_1..v_n independently samples delta_cap distinct
    neighbors inside the committee (members' own vertices included; their
    tallies go unused by the protocol but the edges exist and are paid for).
    """
    s = len(committee)
    if not (1 <= delta_cap <= s):
        raise ParamError("delta_cap must be in [1, s]")
    rng = random.Random(seed)
    members = sorted(committee)
    for attempt in range(1, max_attempts + 1):
        adjacency = tuple(sample_without_replacement(rng, members, delta_cap) for _ in range(n))
        graph = PublishGraph(committee_id, adjacency, _verified_tag(verify_mode, sample_trials), seed)
        res = verify_publish_graph(
            graph, tuple(members), d, verify_mode,
            rng=rng, sample_trials=sample_trials, check_budget=check_budget,
        )
        if res.passed:
            return graph
    raise GenerationError(f"no acceptable publish graph within {max_attempts} resamples (seed {seed})")


# --- failure bounds ---------------------------------------------------------


@dataclass(frozen=True)
class FailureBound:
    bound: float
    log2_bound: float | None
    note: str = ""


def generation_failure_bound(kind: str, **kw) -> FailureBound:
    """Union-bound probability that one uniform sample fails verification.

    kind "publish_graph" expects s, d, n:   C(s, ceil(s/3)-1) * n^d * 2^(-s - d*log2 n)
    kind "committee_list" expects n, q, c, alpha, epsilon:
                                            C(n, floor((a-e)n)) * q^c * 2^(-n - c*log2 q)
    Evaluated in log space. Vacuous cases report a zero bound.
    """
    if kind == "publish_graph":
        s, d, n = kw["s"], kw["d"], kw["n"]
        if d > n:
            return FailureBound(0.0, None, "event impossible: d exceeds receiver count")
        b = graph_fault_size(s)
        if b <= 0:
            return FailureBound(0.0, None, "event impossible: empty fault set")
        log2 = math.log2(math.comb(s, b)) + d * math.log2(n) - s - d * math.log2(n)
    elif kind == "committee_list":
        n, q, c = kw["n"], kw["q"], kw["c"]
        b = committee_fault_size(n, kw["alpha"], kw["epsilon"])
        if b <= 0:
            return FailureBound(0.0, None, "event impossible: empty fault set")
        log2 = math.log2(math.comb(n, b)) + c * math.log2(q) - n - c * math.log2(q)
    else:
        raise ParamError(f"unknown failure-bound kind {kind!r}")
    return FailureBound(2.0**log2, log2)


# --- serialization ----------------------------------------------------------


def layout_document(layout: CommitteeLayout, graphs: list[PublishGraph] | None = None) -> dict:
    graphs = graphs or []
    return {
        "n": layout.n,
        "q": layout.q,
        "s": layout.s,
        "seed": layout.seed,
        "committees": [list(c) for c in layout.committees],
        "graphs": [
            {
                "committee_id": g.committee_id,
                "adjacency": [list(a) for a in g.adjacency],
                "verified": g.verified,
                "seed": g.seed,
            }
            for g in graphs
        ],
        "verified": layout.verified,
    }


def layout_from_document(doc: dict) -> tuple[CommitteeLayout, list[PublishGraph]]:
    layout = CommitteeLayout(
        n=doc["n"],
        q=doc["q"],
        s=doc["s"],
        committees=tuple(tuple(c) for c in doc["committees"]),
        verified=doc["verified"],
        seed=doc["seed"],
    )
    graphs = [
        PublishGraph(
            committee_id=g["committee_id"],
            adjacency=tuple(tuple(a) for a in g["adjacency"]),
            verified=g["verified"],
            seed=g["seed"],
        )
        for g in doc["graphs"]
    ]
    return layout, graphs


def dumps_layout(layout: CommitteeLayout, graphs: list[PublishGraph] | None = None) -> str:
    return json.dumps(layout_document(layout, graphs), sort_keys=True, indent=2) + "\n"


def loads_layout(text: str) -> tuple[CommitteeLayout, list[PublishGraph]]:
    return layout_from_document(json.loads(text))
