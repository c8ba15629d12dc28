"""Forecast archive: JSON-lines storage of direct multi-horizon densities.

One record per (origin, horizon) with the marginal density tagged by type
("normal" or "grid") and the realized value when known. Streamable and
diff-friendly; the unit of exchange for the CLI pipelines.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dists import NormalParams, QuantileGrid
from .errors import DataError

__all__ = ["ArchiveRecord", "ForecastArchive", "load_archive", "save_archive"]


@dataclass(frozen=True)
class ArchiveRecord:
    origin: str
    horizon: int
    density: object          # NormalParams | QuantileGrid
    realization: float | None = None

    def __post_init__(self):
        if self.horizon < 1:
            raise DataError(f"horizon must be >= 1, got {self.horizon}")
        if not isinstance(self.density, (NormalParams, QuantileGrid)):
            raise DataError("density must be NormalParams or QuantileGrid")


def _density_to_obj(d):
    if isinstance(d, NormalParams):
        return {"type": "normal", "mu": d.mu, "sigma": d.sigma}
    return {"type": "grid", "levels": list(d.levels), "values": list(d.values)}


def _density_from_obj(obj):
    kind = obj.get("type")
    if kind == "normal":
        return NormalParams(mu=float(obj["mu"]), sigma=float(obj["sigma"]))
    if kind == "grid":
        return QuantileGrid(levels=tuple(obj["levels"]), values=tuple(obj["values"]))
    raise DataError(f"unknown density type {kind!r}")


@dataclass
class ForecastArchive:
    """All records for a forecast exercise, indexed by (origin, horizon)."""

    records: list = field(default_factory=list)

    def __post_init__(self):
        self._index = {(r.origin, r.horizon) for r in self.records}
        if len(self._index) != len(self.records):
            raise DataError("duplicate (origin, horizon) records")

    @property
    def origins(self):
        seen = {}
        for r in self.records:
            seen.setdefault(r.origin, None)
        return list(seen)

    @property
    def horizons(self):
        return sorted({r.horizon for r in self.records})

    def record(self, origin, horizon) -> ArchiveRecord:
        for r in self.records:
            if r.origin == origin and r.horizon == horizon:
                return r
        raise DataError(f"no record for origin {origin!r}, horizon {horizon}")

    def marginals(self, origin, horizons=None):
        hs = horizons if horizons is not None else self.horizons
        return [self.record(origin, h).density for h in hs]

    def pit_matrix(self, origins=None, horizons=None):
        """Realized PITs, one row per origin; missing realization is an error."""
        from .dists import cdf as dist_cdf

        origins = origins if origins is not None else self.origins
        hs = horizons if horizons is not None else self.horizons
        out = np.empty((len(origins), len(hs)))
        for i, o in enumerate(origins):
            for j, h in enumerate(hs):
                r = self.record(o, h)
                if r.realization is None:
                    raise DataError(
                        f"missing realization at origin {o!r}, horizon {h}")
                out[i, j] = dist_cdf(r.density, r.realization)
        return out


def save_archive(archive: ForecastArchive, path):
    with open(path, "w") as fh:
        for r in archive.records:
            obj = {"origin": r.origin, "horizon": r.horizon,
                   "density": _density_to_obj(r.density)}
            if r.realization is not None:
                obj["realization"] = r.realization
            fh.write(json.dumps(obj) + "\n")


def load_archive(path) -> ForecastArchive:
    records = []
    with open(path) as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataError(f"line {ln}: invalid JSON ({exc})") from exc
            real = obj.get("realization")
            records.append(ArchiveRecord(
                origin=str(obj["origin"]), horizon=int(obj["horizon"]),
                density=_density_from_obj(obj["density"]),
                realization=None if real is None else float(real),
            ))
    return ForecastArchive(records)
