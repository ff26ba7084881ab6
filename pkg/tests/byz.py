"""Test adversaries built on the plugin API."""

from coinforge.simnet import AdversaryAction, K_CRUS_AUX, K_CRUS_RELAY, K_CRUS_VAL, K_PUB, BOT
from coinforge.strategies import Strategy


class ScriptedByzantine(Strategy):
    """Corrupt `victims` at time 0, drop their in-flight traffic, then replay
    a script of injections. build(view, rng, victims) -> [(time, sender,
    recipient, inst, kind, payload), ...].

    Honest traffic travels at the deadline by default, so byzantine messages
    injected within (0, 1] stay inside the same delay envelope as honest ones
    (the regime of the stated crusader latency bound; see the late-sender
    stretch test for what happens outside it)."""

    reactive = True

    def __init__(self, victims, build=None, base_delay=1.0):
        self.victims = list(victims)
        self.build = build
        self.base_delay = base_delay
        self._queue = None

    def delay_for(self, env):
        if self.base_delay is None:
            return self.rng.randrange(1, 257) / 256.0
        return self.base_delay

    def next_action(self, view):
        if self._queue is None:
            self._queue = [AdversaryAction.corrupt(p) for p in self.victims]
            victims = set(self.victims)
            for env in view.pending_envelopes():
                if env.sender in victims:
                    self._queue.append(AdversaryAction.drop(env.id))
            if self.build is not None:
                for (t, snd, rcp, inst, kind, payload) in self.build(view, self.rng, self.victims):
                    self._queue.append(AdversaryAction.inject(
                        {"sender": snd, "recipient": rcp, "inst": inst,
                         "kind": kind, "payload": payload}, time=t))
        return self._queue.pop(0) if self._queue else None


def random_crusader_behavior(view, rng, victims):
    """One point of the structured byzantine-behavior space: per victim and
    honest recipient, independent choices of which VAL/RELAY/AUX bits to send
    and when (dyadic times within the deadline envelope), covering
    equivocation and selective silence."""
    script = []
    honest = [p for p in range(view.n) if p not in victims]
    for v in victims:
        for r in honest:
            t = lambda: rng.randrange(1, 257) / 256.0
            val = rng.choice((None, 0, 1))
            if val is not None:
                script.append((t(), v, r, 0, K_CRUS_VAL, val))
            for bit in (0, 1):
                if rng.random() < 0.4:
                    script.append((t(), v, r, 0, K_CRUS_RELAY, bit))
            aux = rng.choice((None, 0, 1))
            if aux is not None:
                script.append((t(), v, r, 0, K_CRUS_AUX, aux))
    return script


def crusader_worst_cases(s):
    """Hand-scripted single-victim attacks for committees of size s (victim = s-1)."""
    v = s - 1
    half = [r for r in range(s - 1)][: (s - 1) // 2]
    rest = [r for r in range(s - 1) if r not in half]

    def split_val(view, rng, victims):
        # equivocate the initial value round
        return ([(0.5, v, r, 0, K_CRUS_VAL, 0) for r in half]
                + [(0.5, v, r, 0, K_CRUS_VAL, 1) for r in rest])

    def opposite_aux(view, rng, victims):
        # echo along, then push a conflicting aux at the deadline
        return ([(0.25, v, r, 0, K_CRUS_VAL, 1) for r in range(s - 1)]
                + [(1.0, v, r, 0, K_CRUS_AUX, 0) for r in range(s - 1)])

    def silent(view, rng, victims):
        return []

    def flood_duplicates(view, rng, victims):
        # repeats must be deduplicated by recipients
        return [(0.125 + 0.109375 * i, v, r, 0, K_CRUS_RELAY, i % 2)
                for i in range(8) for r in range(s - 1)]

    def late_relay_push(view, rng, victims):
        return ([(1.0, v, r, 0, K_CRUS_RELAY, 0) for r in half]
                + [(1.0, v, r, 0, K_CRUS_RELAY, 1) for r in rest]
                + [(1.0, v, r, 0, K_CRUS_AUX, rng.getrandbits(1)) for r in range(s - 1)])

    return [split_val, opposite_aux, silent, flood_duplicates, late_relay_push]


class PublishCorrupter(Strategy):
    """Corrupt `victims` at `when`; drop their undelivered traffic; optionally
    inject a chosen publish payload from them to every receiver."""

    reactive = True

    def __init__(self, victims, when=1.5, inject_payload=BOT, base_delay=0.5):
        self.victims = list(victims)
        self.when = when
        self.inject_payload = inject_payload
        self.base_delay = base_delay
        self._done = False

    def delay_for(self, env):
        return self.base_delay

    def next_action(self, view):
        if self._done or view.now < self.when:
            return None
        self._done = True
        queue = [AdversaryAction.corrupt(p) for p in self.victims]
        victims = set(self.victims)
        for env in view.pending_envelopes():
            if env.sender in victims:
                queue.append(AdversaryAction.drop(env.id))
        if self.inject_payload is not None:
            for v in self.victims:
                for r in range(view.n):
                    if r not in victims:
                        queue.append(AdversaryAction.inject(
                            {"sender": v, "recipient": r, "inst": 0,
                             "kind": K_PUB, "payload": self.inject_payload},
                            time=view.now + 0.25))
        self._queue = queue
        self.next_action = self._drain  # type: ignore[method-assign]
        return self._drain(view)

    def _drain(self, view):
        return self._queue.pop(0) if self._queue else None
