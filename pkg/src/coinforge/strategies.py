"""Adversary strategies: the scheduling/corruption plugin API plus built-ins.

A strategy sees an AdversaryView and steers the run through two channels:

  * delay_for(env) is consulted once per cross-party send and returns the
    delivery delay in (0, 1]; None means the 1-unit deadline. This is sugar
    for an immediate "delay" action and keeps the common path cheap.
  * next_action(view) is polled after every event while it returns actions
    (corrupt / drop / delay / deliver / inject / coin_set). Only strategies
    with `reactive = True` are polled.

Built-ins (all deterministic given their bound seed):

  fifo               every delivery at the deadline, order = send order.
  random_delay       seeded delays on a dyadic 1/256 grid (exact in binary64,
                     so uniformly rescaling by powers of two is lossless).
  committee_targeter corrupts ceil(alpha*s) members of each named committee,
                     lowest ids first, dropping their in-flight messages;
                     overdrawing the corruption budget faults the strategy.
  publish_delayer    holds publish fan-out messages toward a receiver fraction
                     at the deadline, everything else travels faster.
  benor_biaser       full-information attack on the majority-bit coin: corrupt
                     late members, read honest bits in flight, counter the
                     majority and split delivery orders between two halves of
                     the committee. Demands payload visibility and therefore
                     faults in secure-channel mode.
"""

from __future__ import annotations

import math
import random

from .simnet import AdversaryAction, DEADLINE, K_COIN, K_PUB, MIN_DELAY, StrategyViolation


class Strategy:
    name = "base"
    reactive = False

    def bind(self, sim, rng):
        self.sim = sim
        self.rng = rng

    def delay_for(self, env):
        return None  # deadline

    def next_action(self, view):
        return None

    def coin_offsets(self, spec, view):
        return None  # every member outputs at the latest allowed instant R

    def adversarial_coin_bit(self, spec, member, view):
        return 0


class FifoStrategy(Strategy):
    name = "fifo"


class RandomDelayStrategy(Strategy):
    """Uniform dyadic delays in (0, scale]; coin outputs at R*scale."""

    name = "random_delay"

    def __init__(self, scale: float = 1.0):
        if not (0.0 < scale <= 1.0):
            raise ValueError("scale must be in (0, 1]")
        self.scale = scale

    def delay_for(self, env):
        return self.rng.randrange(1, 257) / 256.0 * self.scale

    def coin_offsets(self, spec, view):
        return {m: spec.R * self.scale for m in spec.members}


class CommitteeTargeterStrategy(Strategy):
    """Corrupt enough members of each named committee to make it bad.

    Quota per committee is ceil(alpha*s); already-corrupted members count
    toward it. Corruption happens at the first adversary phase (time 0) and
    the victims' undelivered messages are dropped. A target list whose quotas
    exceed the budget faults at the first overdrawing corruption.
    """

    name = "committee_targeter"
    reactive = True

    def __init__(self, targets):
        self.targets = list(targets)
        self._planned = False
        self._queue = []

    def _plan(self, view):
        proto = view.protocol
        layout = proto.layout
        alpha = proto.alpha
        chosen = set(view.corrupted)
        for j in self.targets:
            committee = sorted(layout.committees[j])
            quota = math.ceil(alpha * len(committee))
            have = sum(1 for m in committee if m in chosen)
            for m in committee:
                if have >= quota:
                    break
                if m not in chosen:
                    chosen.add(m)
                    have += 1
                    self._queue.append(AdversaryAction.corrupt(m))
        new = {a.party for a in self._queue}
        for env in view.pending_envelopes():
            if env.sender in new:
                self._queue.append(AdversaryAction.drop(env.id))

    def next_action(self, view):
        if not self._planned:
            self._planned = True
            self._plan(view)
        return self._queue.pop(0) if self._queue else None


class PublishDelayerStrategy(Strategy):
    """Publish fan-out toward the first ceil(fraction*n) receivers waits until
    the deadline; all other traffic moves at base_delay."""

    name = "publish_delayer"

    def __init__(self, fraction: float, base_delay: float = 0.5):
        if not (0.0 <= fraction <= 1.0):
            raise ValueError("fraction must be in [0, 1]")
        if not (0.0 < base_delay <= DEADLINE):
            raise ValueError("base_delay must be in (0, 1]")
        self.fraction = fraction
        self.base_delay = base_delay

    def bind(self, sim, rng):
        super().bind(sim, rng)
        self._cut = math.ceil(self.fraction * sim.n)

    def delay_for(self, env):
        if env.kind == K_PUB and env.recipient < self._cut:
            return DEADLINE
        return self.base_delay


class BenorBiaserStrategy(Strategy):
    """Counter the honest majority of a majority-bit committee coin.

    Needs full-information mode (it reads honest coin bits in flight) and a
    positive corruption budget. Corrupts the highest-id members, silences
    them, injects the countering bit from them, then delivers bit-sorted
    orders to the two halves of the committee so slim majorities split.
    """

    name = "benor_biaser"
    reactive = True

    def __init__(self, early: float = 0.25):
        self.early = early
        self._planned = False
        self._queue = []

    def bind(self, sim, rng):
        if sim.mode != "full_info":
            raise StrategyViolation("benor_biaser demands payload visibility (full-information mode)")
        super().bind(sim, rng)

    def _plan(self, view):
        n = view.n
        budget = view.budget_remaining
        if budget <= 0:
            return
        victims = list(range(n - budget, n))
        for p in victims:
            self._queue.append(AdversaryAction.corrupt(p))
        victim_set = set(victims)
        pending = view.pending_envelopes()
        honest_bits = {}
        for env in pending:
            if env.kind != K_COIN:
                continue
            if env.sender in victim_set:
                self._queue.append(AdversaryAction.drop(env.id))
            else:
                honest_bits.setdefault(env.sender, env.payload)  # full-info read
        ones = sum(honest_bits.values())
        b_maj = 1 if 2 * ones > len(honest_bits) else 0
        counter = 1 - b_maj
        for p in victims:
            for r in range(n):
                if r in victim_set:
                    continue
                self._queue.append(AdversaryAction.inject(
                    {"sender": p, "recipient": r, "inst": 0, "kind": K_COIN, "payload": counter},
                    time=MIN_DELAY))
        # group A (low ids) hears majority-bit senders first, group B the rest
        half = n // 2
        for env in pending:
            if env.kind != K_COIN or env.sender in victim_set or env.recipient == env.sender:
                continue
            favors_maj = env.payload == b_maj
            early_for_recipient = favors_maj if env.recipient < half else not favors_maj
            t = env.sent_at + (self.early if early_for_recipient else DEADLINE)
            self._queue.append(AdversaryAction.delay(env.id, t))

    def next_action(self, view):
        if not self._planned:
            self._planned = True
            self._plan(view)
        return self._queue.pop(0) if self._queue else None


class CombinedStrategy(Strategy):
    """Compose strategies; later parts win delay_for, actions drain in order."""

    name = "combined"

    def __init__(self, *parts):
        self.parts = list(parts)
        self.reactive = any(getattr(p, "reactive", False) for p in self.parts)

    def bind(self, sim, rng):
        super().bind(sim, rng)
        for p in self.parts:
            p.bind(sim, random.Random(rng.getrandbits(63)))

    def delay_for(self, env):
        chosen = None
        for p in self.parts:
            d = p.delay_for(env)
            if d is not None:
                chosen = d
        return chosen

    def next_action(self, view):
        for p in self.parts:
            act = p.next_action(view)
            if act is not None:
                return act
        return None

    def coin_offsets(self, spec, view):
        merged = {}
        for p in self.parts:
            merged.update(p.coin_offsets(spec, view) or {})
        return merged or None

    def adversarial_coin_bit(self, spec, member, view):
        bit = 0
        for p in self.parts:
            bit = p.adversarial_coin_bit(spec, member, view)
        return bit


def built_in_strategies() -> dict:
    """Name -> constructor for the stock adversaries."""
    return {
        "fifo": FifoStrategy,
        "random_delay": RandomDelayStrategy,
        "committee_targeter": CommitteeTargeterStrategy,
        "publish_delayer": PublishDelayerStrategy,
        "benor_biaser": BenorBiaserStrategy,
    }
