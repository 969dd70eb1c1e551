"""Embedded catalog of subfield-specific empirical priors.

46 medical subfields plus a pooled entry, each pairing a zero-location
Student-t prior on the effect size with an inverse-gamma prior on the
heterogeneity.  The data ship as a versioned JSON asset; lookups are
case-insensitive, and unknown topics fall back to the pooled entry with
the match flag cleared.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .priors import PriorSpec

__all__ = ["SubfieldEntry", "CatalogMatch", "entries", "pooled_entry", "lookup", "topics", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class SubfieldEntry:
    topic: str
    comparisons: int
    studies: int
    delta_prior: PriorSpec
    tau_prior: PriorSpec

    def to_dict(self) -> dict:
        d, t = self.delta_prior.params, self.tau_prior.params
        return {
            "topic": self.topic,
            "comparisons": self.comparisons,
            "studies": self.studies,
            "delta": {"family": "t", "location": d[0], "scale": d[1], "df": d[2]},
            "tau": {"family": "invgamma", "shape": t[0], "scale": t[1]},
        }


@dataclass(frozen=True)
class CatalogMatch:
    entry: SubfieldEntry
    matched: bool


def _entry_from_dict(data: dict) -> SubfieldEntry:
    d, t = data["delta"], data["tau"]
    return SubfieldEntry(
        topic=data["topic"],
        comparisons=int(data["comparisons"]),
        studies=int(data["studies"]),
        delta_prior=PriorSpec.t(d["location"], d["scale"], d["df"]),
        tau_prior=PriorSpec.invgamma(t["shape"], t["scale"]),
    )


@lru_cache(maxsize=1)
def _load() -> tuple:
    raw = json.loads(resources.files(__package__).joinpath("subfield_priors.json").read_text())
    if raw["schema_version"] != SCHEMA_VERSION:
        raise RuntimeError(
            f"subfield prior data has schema {raw['schema_version']}, expected {SCHEMA_VERSION}"
        )
    return (
        tuple(_entry_from_dict(e) for e in raw["entries"]),
        _entry_from_dict(raw["pooled"]),
    )


def entries() -> tuple:
    """All subfield entries, in catalog order (pooled entry excluded)."""
    return _load()[0]


def pooled_entry() -> SubfieldEntry:
    """The across-subfield pooled prior entry."""
    return _load()[1]


def topics() -> tuple:
    return tuple(e.topic for e in entries())


def lookup(topic: str) -> CatalogMatch:
    """Find a subfield by name (case-insensitive exact match).

    Unknown topics return the pooled entry with ``matched=False``.
    """
    wanted = topic.strip().casefold()
    for entry in entries():
        if entry.topic.casefold() == wanted:
            return CatalogMatch(entry, True)
    return CatalogMatch(pooled_entry(), False)
