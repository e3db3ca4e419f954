from collections import namedtuple
from contextvars import ContextVar

_recorder = ContextVar("recorder")

StageEvent = namedtuple("StageEvent", ["stage", "input_hash", "cache_hit", "seconds", "outputs"])


def record_stage(stage, input_hash, *, cache_hit, seconds, outputs=()):
    """Append a stage event to the active recorder, if any"""
    rec = _recorder.get(None)
    if rec is not None:
        rec.record(stage, input_hash, cache_hit=cache_hit, seconds=seconds, outputs=outputs)


class Recorder:
    """Record pipeline stage events.

    The recorder can use `.start()` and `.stop()` to enable/disable recording,
    or it can be used as a context manager.

    For example,

    >>> with Recorder() as rec:
    ...     manifest = run_pipeline(config)
    >>> rec.data[0].stage
    'solve'

    Currently, only one recorder will record at a time within a context.
    """

    __slots__ = "data", "_token", "max_rows", "__weakref__"

    def __init__(self, *, record=False, max_rows=20):
        self.data = []
        self._token = None
        self.max_rows = max_rows
        if record:
            self.start()

    def record(self, stage, input_hash, *, cache_hit, seconds, outputs=()):
        event = StageEvent(stage, input_hash, bool(cache_hit), float(seconds), list(outputs))
        self.data.append(event)

    def start(self):
        if self._token is None:
            self._token = _recorder.set(self)

    def stop(self):
        if self._token is not None:
            _recorder.reset(self._token)
            self._token = None

    def __enter__(self):
        self.start()
        return self

    def __exit__(self, type_, value, traceback):
        self.stop()

    def __iter__(self):
        yield from self.data

    def __len__(self):
        return len(self.data)

    @property
    def is_recording(self):
        return self._token is not None and _recorder.get(None) is self

    @property
    def recomputed(self):
        """Names of the stages that did not hit the cache"""
        return [event.stage for event in self.data if not event.cache_hit]

    def to_records(self):
        return [event._asdict() for event in self.data]

    @staticmethod
    def _format_event(event):
        status = "cached" if event.cache_hit else f"{event.seconds:.3f}s"
        return f"{event.stage:<14} {event.input_hash[:12]}  {status}"

    def to_frame(self):
        import pandas as pd

        columns = ["stage", "input_hash", "cache_hit", "seconds"]
        frame = pd.DataFrame([event[:4] for event in self.data], columns=columns)
        frame["input_hash"] = frame["input_hash"].str[:12]
        return frame

    def _repr_html_(self):
        from .formatting import format_frame_html

        state = "recording" if self.is_recording else "paused"
        return format_frame_html(self.to_frame(), f"Recorder ({state})", max_rows=self.max_rows)

    def __repr__(self):
        lines = [f'bicount.Recorder ({"" if self.is_recording else "not "}recording)']
        lines.append("-" * len(lines[0]))
        rows = [self._format_event(event) for event in self.data]
        if self.max_rows is not None and len(rows) > self.max_rows:
            lines.extend(f"  {line}" for line in rows[: self.max_rows // 2])
            lines.append("")
            lines.append(f"  ... ({len(rows) - self.max_rows} rows not shown)")
            lines.append("")
            lines.extend(f"  {line}" for line in rows[-((self.max_rows + 1) // 2) :])
        else:
            lines.extend(f"  {line}" for line in rows)
        return "\n".join(lines)
