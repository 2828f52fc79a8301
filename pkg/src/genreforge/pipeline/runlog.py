"""Line-delimited JSON run log.

The only place timestamps are allowed; every other artifact is byte-stable
across reruns with the same inputs and seed.
"""

from __future__ import annotations

import json
import time
from pathlib import Path


class RunLog:
    def __init__(self, path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = open(self.path, "w")

    def event(self, kind: str, **payload) -> None:
        record = {"event": kind, "ts": round(time.time(), 3)}
        record.update(payload)
        self._fh.write(json.dumps(record, sort_keys=True) + "\n")
        self._fh.flush()

    def close(self) -> None:
        self._fh.close()

    def __enter__(self) -> "RunLog":
        return self

    def __exit__(self, *exc_info) -> None:
        self.close()
