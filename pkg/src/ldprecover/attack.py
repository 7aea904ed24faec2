"""Poisoning attacks on LDP frequency oracles.

Every attack here is an instance of the adaptive attack: each malicious user
draws an item from an attacker-designed distribution and submits its encoding
straight to the server, skipping the local randomiser. Manip and MGA differ
only in the distribution; MGA on OUE additionally sets all target bits in one
report. MGA-IPA is the weaker variant whose crafted inputs go through the
genuine randomiser.

Crafting never looks at genuine users' data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Dataset, stream_key
from .ldp import OUE, OueReports, Protocol, Reports

__all__ = [
    "ATTACK_KINDS",
    "AttackSpec",
    "PoisonedReportSet",
    "malicious_count",
    "choose_targets",
    "random_distribution",
    "split_malicious",
    "craft_manip",
    "craft_mga",
    "craft_adaptive",
    "craft_mga_ipa",
    "craft",
    "compose_attacks",
    "poison",
]

ATTACK_KINDS = ("none", "manip", "mga", "adaptive", "mga_ipa")


@dataclass(frozen=True)
class AttackSpec:
    """One attacker.

    ``targets`` is required for ``mga``/``mga_ipa``, ``dist`` for
    ``adaptive``. ``h_fraction`` sizes the Manip sub-domain.
    """

    kind: str
    m: int
    targets: tuple[int, ...] | None = None
    dist: np.ndarray | None = field(default=None, compare=False)
    h_fraction: float = 0.1

    def __post_init__(self):
        if self.kind not in ATTACK_KINDS:
            raise ValueError(f"unknown attack kind {self.kind!r}")
        if int(self.m) != self.m or self.m < 0:
            raise ValueError("m must be a nonnegative integer")
        if self.kind in ("mga", "mga_ipa"):
            if not self.targets:
                raise ValueError(f"{self.kind} needs a nonempty target set")
            object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))
        if self.kind == "adaptive":
            if self.dist is None:
                raise ValueError("adaptive attack needs a distribution")
            dist = _check_dist(self.dist)
            object.__setattr__(self, "dist", dist)
        if self.kind == "manip" and not 0 < self.h_fraction <= 1:
            raise ValueError("h_fraction must lie in (0, 1]")

    def validate(self, d: int) -> None:
        if self.targets is not None and not all(0 <= t < d for t in self.targets):
            raise ValueError("target out of domain")
        if self.dist is not None and self.dist.size != d:
            raise ValueError(f"distribution has {self.dist.size} entries, domain has {d}")


@dataclass(frozen=True, eq=False)
class PoisonedReportSet:
    genuine: Reports
    malicious: Reports
    targets: tuple[int, ...] | None = None

    @property
    def n(self) -> int:
        return len(self.genuine)

    @property
    def m(self) -> int:
        return len(self.malicious)

    @property
    def beta(self) -> float:
        return self.m / (self.n + self.m)

    @property
    def eta(self) -> float:
        return self.m / self.n

    def combined(self) -> Reports:
        return Reports.concat([self.genuine, self.malicious])


def malicious_count(beta: float, n: int) -> int:
    """``m`` such that ``m / (n + m)`` reaches ``beta``, rounded up."""
    if not 0 <= beta < 1:
        raise ValueError("beta must lie in [0, 1)")
    # slack absorbs float error when beta*n/(1-beta) is an exact integer
    return max(0, math.ceil(beta * n / (1 - beta) - 1e-9))


def _check_dist(dist) -> np.ndarray:
    dist = np.asarray(dist, dtype=np.float64)
    if dist.ndim != 1 or np.any(dist < 0) or not np.all(np.isfinite(dist)):
        raise ValueError("invalid distribution")
    if abs(dist.sum() - 1) > 1e-9:
        raise ValueError(f"distribution sums to {dist.sum()!r}, not 1")
    return dist


def choose_targets(d: int, r: int, rng: np.random.Generator) -> tuple[int, ...]:
    """``r`` distinct items chosen uniformly at random."""
    if not 1 <= r <= d:
        raise ValueError("need 1 <= r <= d")
    return tuple(sorted(int(t) for t in rng.choice(d, size=r, replace=False)))


def random_distribution(d: int, rng: np.random.Generator, concentration: float = 0.1) -> np.ndarray:
    """Random attacker distribution, Dirichlet with a symmetric ``concentration``.

    Small concentrations put most of the mass on a handful of items.
    """
    if concentration <= 0:
        raise ValueError("concentration must be positive")
    dist = rng.dirichlet(np.full(d, concentration))
    return dist / dist.sum()


def split_malicious(m: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """Assign ``m`` malicious users uniformly at random to ``k`` attackers."""
    return np.bincount(rng.integers(0, k, size=m), minlength=k)


def craft_adaptive(protocol: Protocol, m: int, dist, rng: np.random.Generator) -> Reports:
    """``m`` crafted reports, each encoding an i.i.d. draw from ``dist``."""
    dist = _check_dist(dist)
    if dist.size != protocol.d:
        raise ValueError("distribution length does not match the domain")
    items = rng.choice(protocol.d, size=m, p=dist)
    return protocol.encode(items, rng)


def craft_manip(
    protocol: Protocol, m: int, h_fraction: float, rng: np.random.Generator
) -> Reports:
    """Uniform draws from a random sub-domain covering ``h_fraction`` of the items."""
    if not 0 < h_fraction <= 1:
        raise ValueError("h_fraction must lie in (0, 1]")
    size = max(1, math.ceil(h_fraction * protocol.d - 1e-9))
    sub = rng.choice(protocol.d, size=size, replace=False)
    return protocol.encode(rng.choice(sub, size=m), rng)


def craft_mga(protocol: Protocol, m: int, targets, rng: np.random.Generator) -> Reports:
    """Maximal gain attack: every crafted report supports the targets.

    OUE reports set every target bit at once; GRR and OLH reports encode a
    target drawn uniformly from the set.
    """
    targets = _check_targets(targets, protocol.d)
    if isinstance(protocol, OUE):
        bits = np.zeros((m, protocol.d), dtype=bool)
        bits[:, targets] = True
        return OueReports(bits)
    return protocol.encode(rng.choice(targets, size=m), rng)


def craft_mga_ipa(protocol: Protocol, m: int, targets, rng: np.random.Generator) -> Reports:
    """MGA inputs passed through the genuine randomiser."""
    targets = _check_targets(targets, protocol.d)
    items = rng.choice(targets, size=m)
    key = int(rng.integers(0, 1 << 64, dtype=np.uint64))
    return protocol.perturb(items, key)


def _check_targets(targets, d: int) -> np.ndarray:
    targets = np.unique(np.asarray(targets, dtype=np.int64))
    if targets.size == 0:
        raise ValueError("target set is empty")
    if targets.min() < 0 or targets.max() >= d:
        raise ValueError("target out of domain")
    return targets


def craft(spec: AttackSpec, protocol: Protocol, rng: np.random.Generator) -> Reports:
    spec.validate(protocol.d)
    if spec.kind == "none" or spec.m == 0:
        return protocol.encode(np.zeros(0, dtype=np.int64), rng)
    if spec.kind == "manip":
        return craft_manip(protocol, spec.m, spec.h_fraction, rng)
    if spec.kind == "mga":
        return craft_mga(protocol, spec.m, spec.targets, rng)
    if spec.kind == "mga_ipa":
        return craft_mga_ipa(protocol, spec.m, spec.targets, rng)
    return craft_adaptive(protocol, spec.m, spec.dist, rng)


def compose_attacks(specs, protocol: Protocol, rng: np.random.Generator) -> Reports:
    """Reports of several independent attackers, concatenated in order."""
    specs = list(specs)
    if not specs:
        return protocol.encode(np.zeros(0, dtype=np.int64), rng)
    return Reports.concat([craft(s, protocol, rng) for s in specs])


def poison(
    data: Dataset,
    protocol: Protocol,
    attack: AttackSpec | list[AttackSpec],
    seed: int,
) -> PoisonedReportSet:
    """Genuine users perturb their items; attackers add crafted reports.

    Genuine and malicious randomness come from separate streams of ``seed``.
    """
    if data.d != protocol.d:
        raise ValueError("dataset and protocol disagree on the domain size")
    specs = attack if isinstance(attack, list) else [attack]
    genuine = protocol.perturb(data.values, stream_key(seed, "genuine"))
    rng = np.random.default_rng(stream_key(seed, "attack"))
    malicious = compose_attacks(specs, protocol, rng)
    targets = sorted({t for s in specs if s.targets for t in s.targets}) or None
    return PoisonedReportSet(genuine, malicious, tuple(targets) if targets else None)

