"""Compute-once/query-many store of Fourier risk functions per terrain patch.

Keys quantize the patch center onto the terrain grid so planners re-querying
the same aligned patch always hit.  Under concurrent misses for one key the
compute runs at most once (single-flight); readers never block each other.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from typing import Callable, Dict, Optional, Tuple

from .errors import CacheFull, FormatError
from .fourier import (
    AngleLike,
    FourierRiskFunction,
    eval_concentrations_array,
    risk_function_from_dict,
    risk_function_to_dict,
)
from .riskdist import BinGeometry, CvarLevel, RiskDistribution, cvar, normalize


@dataclass(frozen=True)
class PatchKey:
    """Identity of a grid-aligned patch: terrain, quantized center, side."""

    terrain_id: str
    qx: int
    qy: int
    side_length: float

    @classmethod
    def make(cls, terrain_id: str, center: Tuple[float, float], side_length: float,
             resolution: float) -> "PatchKey":
        return cls(
            terrain_id=terrain_id,
            qx=int(round(center[0] / resolution)),
            qy=int(round(center[1] / resolution)),
            side_length=float(side_length),
        )


class CoefficientCache:
    """Keyed store of FourierRiskFunction with hit/miss/store counters."""

    def __init__(self, max_entries: Optional[int] = None):
        self.entries: Dict[PatchKey, FourierRiskFunction] = {}
        self.max_entries = max_entries
        self.hits = 0
        self.misses = 0
        self.stores = 0
        self._lock = threading.Lock()
        self._inflight: Dict[PatchKey, threading.Event] = {}

    def __len__(self) -> int:
        return len(self.entries)

    def get_or_compute(
        self, key: PatchKey, compute: Callable[[], FourierRiskFunction]
    ) -> Tuple[FourierRiskFunction, str]:
        """Return (function, "hit"|"miss"); compute runs at most once per key."""
        while True:
            with self._lock:
                if key in self.entries:
                    self.hits += 1
                    return self.entries[key], "hit"
                event = self._inflight.get(key)
                if event is None:
                    # we own the compute for this key
                    self.misses += 1
                    if self.max_entries is not None and len(self.entries) >= self.max_entries:
                        raise CacheFull(f"cache limited to {self.max_entries} entries")
                    event = threading.Event()
                    self._inflight[key] = event
                    break
            # someone else is computing this key; wait and re-check
            event.wait()
            with self._lock:
                if key in self.entries:
                    self.hits += 1
                    return self.entries[key], "hit"
                # compute failed elsewhere; loop around and try ourselves
        try:
            value = compute()
        except BaseException:
            with self._lock:
                del self._inflight[key]
            event.set()
            raise
        with self._lock:
            self.entries[key] = value
            self.stores += 1
            del self._inflight[key]
        event.set()
        return value, "miss"


def query_risk(
    entry: FourierRiskFunction, phi: AngleLike, alpha: float, geometry: BinGeometry
) -> float:
    """CVaR of the distribution the cached function induces at one angle.

    Pure composition (evaluate, normalize, tail-average); no model inference.
    """
    gamma = eval_concentrations_array(entry, phi)
    d = normalize(gamma, geometry)
    return cvar(d, CvarLevel(alpha=alpha))


def query_distribution(
    entry: FourierRiskFunction, phi: AngleLike, geometry: BinGeometry
) -> RiskDistribution:
    return normalize(eval_concentrations_array(entry, phi), geometry)


# ---------------------------------------------------------------------------
# persistence


def _key_to_dict(key: PatchKey) -> dict:
    return {
        "terrain_id": key.terrain_id,
        "qx": key.qx,
        "qy": key.qy,
        "side_length": key.side_length,
    }


def _key_from_dict(data: dict) -> PatchKey:
    return PatchKey(
        terrain_id=data["terrain_id"],
        qx=int(data["qx"]),
        qy=int(data["qy"]),
        side_length=float(data["side_length"]),
    )


def save_cache(cache: CoefficientCache, path) -> None:
    payload = {
        "version": 1,
        "entries": [
            {"key": _key_to_dict(k), "function": risk_function_to_dict(f)}
            for k, f in sorted(
                cache.entries.items(),
                key=lambda kv: (kv[0].terrain_id, kv[0].qx, kv[0].qy, kv[0].side_length),
            )
        ],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)


def load_cache(path, max_entries: Optional[int] = None) -> CoefficientCache:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"not a cache file: {exc}") from exc
    try:
        version = data["version"]
        if version != 1:
            raise FormatError(f"unsupported cache version {version!r}")
        cache = CoefficientCache(max_entries=max_entries)
        for rec in data["entries"]:
            cache.entries[_key_from_dict(rec["key"])] = risk_function_from_dict(rec["function"])
        cache.stores = len(cache.entries)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"malformed cache payload: {exc}") from exc
    return cache
