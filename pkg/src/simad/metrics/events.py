"""Events (maximal runs of anomaly labels) and their affiliation zones."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def events_from_labels(labels) -> list[tuple[int, int]]:
    """Half-open ``[start, end)`` intervals of the 1-runs in ``labels``.

    >>> events_from_labels([0, 1, 1, 0, 1])
    [(1, 3), (4, 5)]
    """
    y = np.asarray(labels).astype(np.int8)
    if y.size == 0:
        return []
    d = np.diff(np.concatenate(([0], y, [0])))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    return [(int(s), int(e)) for s, e in zip(starts, ends)]


@dataclass(frozen=True)
class EventSet:
    """Sorted, disjoint, non-empty events on a timeline of ``n`` points."""

    events: tuple
    n: int

    def __post_init__(self):
        prev_end = -1
        for s, e in self.events:
            if not (0 <= s < e <= self.n):
                raise ValueError(f"bad event [{s}, {e}) for length {self.n}")
            if s <= prev_end:
                raise ValueError("events must be sorted and separated by at least one point")
            prev_end = e
        object.__setattr__(self, "events", tuple((int(s), int(e)) for s, e in self.events))

    @classmethod
    def from_labels(cls, labels) -> "EventSet":
        return cls(tuple(events_from_labels(labels)), len(labels))

    def to_labels(self) -> np.ndarray:
        y = np.zeros(self.n, dtype=np.int8)
        for s, e in self.events:
            y[s:e] = 1
        return y

    def __len__(self):
        return len(self.events)

    def __iter__(self):
        return iter(self.events)

    def zones(self) -> list[tuple[int, int]]:
        """Partition of ``[0, n)``: each point goes to its nearest event.

        A gap point equidistant from two events joins the earlier one.
        """
        if not self.events:
            return []
        bounds = [0]
        for (_, e_left), (s_right, _) in zip(self.events[:-1], self.events[1:]):
            bounds.append((e_left - 1 + s_right) // 2 + 1)
        bounds.append(self.n)
        return [(bounds[j], bounds[j + 1]) for j in range(len(self.events))]
