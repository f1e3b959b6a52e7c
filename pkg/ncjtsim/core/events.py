"""
Trace events

A small synchronous event bus the engine publishes debug traces on
(schedule grids, link gains, per-layer SINR). CSV sinks subscribe to the
event types requested on the command line.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List

import pandas as pd

logger = logging.getLogger("ncjtsim.events")


class TraceEventTypes:
    """Standard trace event types"""
    GRID = "trace.grid"
    LINK = "trace.link"
    SINR = "trace.sinr"


@dataclass
class TraceEvent:
    type: str
    tti: int
    rows: List[dict] = field(default_factory=list)
    source: str = "engine"


class TraceBus:
    """Synchronous publish/subscribe for trace events"""

    def __init__(self):
        self._handlers: Dict[str, List[Callable[[TraceEvent], None]]] = {}
        self._stats = {"events_published": 0, "errors": 0}

    def subscribe(self, event_type: str, handler: Callable[[TraceEvent], None]) -> None:
        self._handlers.setdefault(event_type, []).append(handler)
        logger.debug(f"Subscribed handler to event type: {event_type}")

    def has_subscribers(self, event_type: str) -> bool:
        return bool(self._handlers.get(event_type))

    def publish(self, event: TraceEvent) -> None:
        self._stats["events_published"] += 1
        for handler in self._handlers.get(event.type, []):
            try:
                handler(event)
            except Exception as e:
                self._stats["errors"] += 1
                logger.error(f"Error in trace handler for {event.type}: {e}")

    def get_stats(self) -> Dict[str, int]:
        return dict(self._stats)


class CsvTraceSink:
    """Buffers trace rows and appends them to a CSV file in chunks"""

    def __init__(self, path: Path, flush_rows: int = 200_000):
        self.path = Path(path)
        self.flush_rows = flush_rows
        self._rows: List[dict] = []
        self._header_written = False
        self.path.parent.mkdir(parents=True, exist_ok=True)
        if self.path.exists():
            self.path.unlink()

    def __call__(self, event: TraceEvent) -> None:
        self._rows.extend(event.rows)
        if len(self._rows) >= self.flush_rows:
            self.flush()

    def flush(self) -> None:
        if not self._rows:
            return
        pd.DataFrame(self._rows).to_csv(self.path, mode="a", index=False, header=not self._header_written)
        self._header_written = True
        self._rows = []


def attach_csv_sinks(bus: TraceBus, out_dir: Path, prefix: str, grids: bool = False,
                     links: bool = False, sinr: bool = False) -> List[CsvTraceSink]:
    """Subscribe CSV sinks for the requested traces; caller flushes them at the end"""
    sinks = []
    for enabled, event_type, name in ((grids, TraceEventTypes.GRID, "grids"),
                                      (links, TraceEventTypes.LINK, "links"),
                                      (sinr, TraceEventTypes.SINR, "sinr")):
        if enabled:
            sink = CsvTraceSink(Path(out_dir) / f"{prefix}_{name}.csv")
            bus.subscribe(event_type, sink)
            sinks.append(sink)
    return sinks
