"""Links between simulated nodes: one-way delay, uniform jitter, Bernoulli loss."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .scenario import ScenarioValidationError, ms_to_us

TESTER = -1
HEADNODE = 0


class UnknownNodeError(KeyError):
    pass


@dataclass(frozen=True)
class Link:
    endpoint_a: int
    endpoint_b: int
    one_way_delay_ms: float = 0.0
    jitter_ms: float = 0.0
    loss_prob: float = 0.0
    delay_us: int = field(init=False, repr=False, compare=False)
    jitter_us: int = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.one_way_delay_ms < 0 or self.jitter_ms < 0:
            raise ScenarioValidationError("link delay and jitter must be >= 0")
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ScenarioValidationError("loss_prob out of range")
        object.__setattr__(self, "delay_us", ms_to_us(self.one_way_delay_ms, "one_way_delay_ms"))
        object.__setattr__(self, "jitter_us", ms_to_us(self.jitter_ms, "jitter_ms"))

    @property
    def deterministic(self) -> bool:
        return self.jitter_us == 0 and self.loss_prob == 0.0


def sample_traversal(link: Link, stream: random.Random) -> int | None:
    """Delay in microseconds for one message, or ``None`` if the link drops it.

    Draws are only taken for the features that are switched on, so a
    jitter-free, loss-free link never touches its stream. Jitter is uniform
    over the integers ``[delay - jitter, delay + jitter]``, clamped at zero.
    """
    if link.loss_prob > 0.0 and stream.random() < link.loss_prob:
        return None
    if link.jitter_us == 0:
        return link.delay_us
    span = 2 * link.jitter_us + 1
    delay = link.delay_us - link.jitter_us + int(stream.random() * span)
    return delay if delay > 0 else 0


class Network:
    """Star of links around the headnode: tester access link plus one intra link per worker."""

    def __init__(self, access: Link, intra: list[Link], streams):
        self.access = access
        self.intra = intra
        self.access_stream = streams.stream("link/access")
        self.intra_streams = [streams.stream(f"link/intra/{i + 1}") for i in range(len(intra))]

    def link_for(self, a: int, b: int) -> tuple[Link, random.Random]:
        if {a, b} == {TESTER, HEADNODE}:
            return self.access, self.access_stream
        other = b if a == HEADNODE else a if b == HEADNODE else None
        if other is None or not 1 <= other <= len(self.intra):
            raise UnknownNodeError(f"no link between {a} and {b}")
        return self.intra[other - 1], self.intra_streams[other - 1]

    def send(self, src: int, dst: int, kernel, kind: int, payload: int, aux: int = 0) -> int | None:
        """Schedule arrival of a message at ``dst``; returns the handle or ``None`` when dropped."""
        link, stream = self.link_for(src, dst)
        delay = sample_traversal(link, stream)
        if delay is None:
            return None
        return kernel.schedule(kernel.now + delay, kind, payload, aux)


def build_network(delays, worker_count: int, streams) -> Network:
    """Access link carries the client-side delay; intra links carry the inter-node delay.

    The access link always gets jitter and loss. Intra links only get them
    when they carry emulated delay, so single-site intra links stay ideal.
    """
    access = Link(TESTER, HEADNODE, delays.access_delay_ms, delays.jitter_ms, delays.loss_prob)
    if delays.intra_delay_ms > 0:
        intra = [Link(HEADNODE, w, delays.intra_delay_ms, delays.jitter_ms, delays.loss_prob)
                 for w in range(1, worker_count + 1)]
    else:
        intra = [Link(HEADNODE, w) for w in range(1, worker_count + 1)]
    return Network(access, intra, streams)
