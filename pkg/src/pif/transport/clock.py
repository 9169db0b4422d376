"""Clock-offset estimation between a local consumer and a remote producer.

One exchange captures (t_send, t_remote, t_reply), all under the assumption
that network delay is roughly symmetric. The remote clock's offset relative
to ours is then t_remote minus the local midpoint. A batch of exchanges is
summarized by the median (robust to odd slow round trips) and half the
interquartile range as its uncertainty.

Convert a remote timestamp to the local timebase with t_remote - offset.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass

from .streams import TransportError

MIN_EXCHANGES = 5


@dataclass(frozen=True)
class ClockOffset:
    offset: float  # seconds the remote clock runs ahead of ours
    uncertainty: float  # half the IQR of per-exchange estimates
    n_exchanges: int
    measured_at: float

    def to_local(self, remote_timestamp: float) -> float:
        return remote_timestamp - self.offset


def estimate_offset(peer, exchanges: int = 9, local_clock=time.monotonic) -> ClockOffset:
    """Measure a peer's clock offset over repeated ping-pong exchanges.

    ``peer`` is anything with ``probe(local_clock) -> (t_send, t_remote,
    t_reply)``: an in-process Outlet or a network inlet that relays the
    probe over its socket.
    """
    if exchanges < MIN_EXCHANGES:
        raise TransportError(f"need at least {MIN_EXCHANGES} exchanges, got {exchanges}")
    estimates = []
    for _ in range(exchanges):
        t_send, t_remote, t_reply = peer.probe(local_clock)
        if t_reply < t_send:
            raise TransportError("local clock went backwards during probe")
        midpoint = (t_send + t_reply) / 2.0
        estimates.append(t_remote - midpoint)
    estimates.sort()
    offset = statistics.median(estimates)
    q1, q3 = _quartiles(estimates)
    return ClockOffset(
        offset=offset,
        uncertainty=(q3 - q1) / 2.0,
        n_exchanges=exchanges,
        measured_at=local_clock(),
    )


def _quartiles(sorted_values: list[float]) -> tuple[float, float]:
    quartiles = statistics.quantiles(sorted_values, n=4, method="inclusive")
    return quartiles[0], quartiles[2]
