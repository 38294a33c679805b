"""Line-delimited sensor logs and trace files.

Sensor log: one JSON object per line, two record kinds,

    {"t": <s>, "kind": "gyro", "w": [wx, wy, wz]}
    {"t": <s>, "kind": "det", "boxes": [[x,y,w,h], ...], "conf": [...],
     "desc": [[...], ...]}

Floats are serialized with 9 significant digits ("%.9g"), which is idempotent
under parse/re-serialize, so record -> replay -> record is byte-identical.
Timestamps must be non-decreasing; at equal timestamps gyro records come
before the (single) detection record, i.e. a detection closes its timestamp.

Trace files reuse the same float formatting with one flat JSON object per
line; their field sets are fixed by the writers in simulator/tracker code.
"""

from __future__ import annotations

import json
import math
from typing import Iterable, Union

import numpy as np

from .detection import Detection, DetectionSet, GyroSample
from .errors import LogParseError, StreamOrderError
from .geometry import BoundingBox

Event = Union[GyroSample, DetectionSet]


def fmt_float(x: float) -> str:
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"refusing to serialize non-finite float {x!r}")
    return format(x, ".9g")


def _fmt_list(xs) -> str:
    return "[" + ",".join(fmt_float(x) for x in xs) + "]"


def _fmt_nested(xss) -> str:
    return "[" + ",".join(_fmt_list(xs) for xs in xss) + "]"


def event_line(ev: Event) -> str:
    if isinstance(ev, GyroSample):
        return f'{{"t":{fmt_float(ev.t)},"kind":"gyro","w":{_fmt_list(ev.w)}}}'
    if isinstance(ev, DetectionSet):
        boxes = _fmt_nested(d.box.as_array() for d in ev.detections)
        conf = _fmt_list(d.confidence for d in ev.detections)
        desc = _fmt_nested(d.descriptor for d in ev.detections)
        return (f'{{"t":{fmt_float(ev.t)},"kind":"det","boxes":{boxes},'
                f'"conf":{conf},"desc":{desc}}}')
    raise TypeError(f"not a loggable event: {type(ev).__name__}")


class EventWriter:
    """Validating writer: enforces the stream-order contract on append."""

    def __init__(self, fp):
        self.fp = fp
        self._last_t: float | None = None
        self._last_kind: str | None = None

    def append(self, ev: Event) -> None:
        kind = "gyro" if isinstance(ev, GyroSample) else "det"
        if self._last_t is not None:
            if ev.t < self._last_t:
                raise StreamOrderError(
                    f"timestamp regressed: {ev.t!r} after {self._last_t!r}")
            if ev.t == self._last_t and self._last_kind == "det":
                raise StreamOrderError(
                    f"event at t={ev.t!r} after a detection at the same timestamp")
        self.fp.write(event_line(ev) + "\n")
        self._last_t = ev.t
        self._last_kind = kind


def write_events(path, events: Iterable[Event]) -> None:
    with open(path, "w") as fp:
        w = EventWriter(fp)
        for ev in events:
            w.append(ev)


def _parse_event(obj: dict, line_no: int) -> Event:
    try:
        t = float(obj["t"])
        kind = obj["kind"]
        if kind == "gyro":
            w = np.asarray(obj["w"], dtype=float)
            if w.shape != (3,):
                raise ValueError(f"gyro 'w' must have 3 components, got shape {w.shape}")
            return GyroSample(t, w)
        if kind == "det":
            boxes, conf, desc = obj["boxes"], obj["conf"], obj["desc"]
            if not (len(boxes) == len(conf) == len(desc)):
                raise ValueError("boxes/conf/desc lengths disagree")
            dets = [
                Detection(BoundingBox.from_array(b), float(c),
                          np.asarray(d, dtype=float))
                for b, c, d in zip(boxes, conf, desc)
            ]
            return DetectionSet(t, dets)
        raise ValueError(f"unknown record kind {kind!r}")
    except LogParseError:
        raise
    except (KeyError, TypeError, ValueError) as e:
        raise LogParseError(line_no, str(e)) from e


def read_events(path) -> list[Event]:
    """Parse and validate a sensor log.  Raises LogParseError (with the line
    number) on malformed lines, StreamOrderError on broken ordering."""
    events: list[Event] = []
    last_t: float | None = None
    last_kind: str | None = None
    with open(path) as fp:
        for line_no, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise LogParseError(line_no, f"invalid JSON: {e.msg}") from e
            if not isinstance(obj, dict):
                raise LogParseError(line_no, "record is not a JSON object")
            ev = _parse_event(obj, line_no)
            kind = "gyro" if isinstance(ev, GyroSample) else "det"
            if last_t is not None:
                if ev.t < last_t:
                    raise StreamOrderError(
                        f"line {line_no}: timestamp regressed ({ev.t!r} after {last_t!r})")
                if ev.t == last_t and last_kind == "det":
                    raise StreamOrderError(
                        f"line {line_no}: event follows a detection at equal t={ev.t!r}")
            last_t, last_kind = ev.t, kind
            events.append(ev)
    return events


# ---------------------------------------------------------------------------
# generic jsonl traces
# ---------------------------------------------------------------------------


def _json_compact(value) -> str:
    """JSON with %.9g floats; dict key order preserved (insertion order)."""
    if isinstance(value, dict):
        items = (f'"{k}":{_json_compact(v)}' for k, v in value.items())
        return "{" + ",".join(items) + "}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return "[" + ",".join(_json_compact(v) for v in value) + "]"
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if value is None:
        return "null"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return fmt_float(value)
    if isinstance(value, str):
        return json.dumps(value)
    raise TypeError(f"unsupported trace value type {type(value).__name__}")


def write_jsonl(path, records: Iterable[dict]) -> None:
    with open(path, "w") as fp:
        for rec in records:
            fp.write(_json_compact(rec) + "\n")


def read_jsonl(path) -> list[dict]:
    out = []
    with open(path) as fp:
        for line_no, line in enumerate(fp, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                out.append(json.loads(line))
            except json.JSONDecodeError as e:
                raise LogParseError(line_no, f"invalid JSON: {e.msg}") from e
    return out
