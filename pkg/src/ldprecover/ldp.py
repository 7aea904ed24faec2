"""Pure LDP frequency oracles: GRR, OUE and OLH.

Every protocol is described by its perturbation probabilities ``p`` and ``q``
and the support relation between a report and an item. The server-side
estimate is the same for all of them::

    count(v) = (C(v) - N q) / (p - q)

where ``C(v)`` is the number of the ``N`` reports that support ``v``.

Reports are held in batches (one numpy array per field) rather than as one
object per user; :func:`report_to_json` and :func:`reports_from_json` convert
single reports for fixtures and debugging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import check_frequencies, mix64, user_uniforms, user_words

__all__ = [
    "Protocol",
    "GRR",
    "OUE",
    "OLH",
    "make_protocol",
    "Reports",
    "GrrReports",
    "OueReports",
    "OlhReports",
    "AggregateEstimate",
    "olh_hash",
    "report_to_json",
    "reports_from_json",
    "PROTOCOLS",
]

_CHUNK = 1 << 15
_OLH_SALT = np.uint64(0xD6E8FEB86659FD93)


def olh_hash(seed, item, g: int) -> np.ndarray:
    """Keyed hash of ``item`` into ``{0, ..., g-1}``; ``seed`` selects the hash function.

    Broadcasts over ``seed`` and ``item``.
    """
    if g < 2:
        raise ValueError("hash range g must be >= 2")
    seed = np.asarray(seed, dtype=np.uint64)
    item = np.asarray(item, dtype=np.uint64)
    return _hash_keyed(mix64(seed), _item_keys(item), g)


def _item_keys(items) -> np.ndarray:
    return mix64(np.asarray(items, dtype=np.uint64) ^ _OLH_SALT)


def _hash_keyed(seed_keys, item_keys, g: int) -> np.ndarray:
    return (mix64(seed_keys ^ item_keys) % np.uint64(g)).astype(np.int64)


# ---------------------------------------------------------------------------
# reports


class Reports:
    """A batch of reports from one protocol."""

    protocol: str

    def __len__(self) -> int:
        raise NotImplementedError

    def select(self, index) -> "Reports":
        raise NotImplementedError

    @classmethod
    def concat(cls, batches) -> "Reports":
        batches = list(batches)
        kinds = {type(b) for b in batches}
        if len(kinds) != 1:
            raise TypeError("cannot concatenate reports from different protocols")
        return kinds.pop()._concat(batches)


@dataclass(frozen=True, eq=False)
class GrrReports(Reports):
    items: np.ndarray
    protocol = "grr"

    def __len__(self):
        return int(self.items.shape[0])

    def select(self, index):
        return GrrReports(self.items[index])

    @classmethod
    def _concat(cls, batches):
        return cls(np.concatenate([b.items for b in batches]))


@dataclass(frozen=True, eq=False)
class OueReports(Reports):
    bits: np.ndarray
    protocol = "oue"

    def __len__(self):
        return int(self.bits.shape[0])

    def select(self, index):
        return OueReports(self.bits[index])

    @classmethod
    def _concat(cls, batches):
        return cls(np.concatenate([b.bits for b in batches], axis=0))


@dataclass(frozen=True, eq=False)
class OlhReports(Reports):
    seeds: np.ndarray
    values: np.ndarray
    protocol = "olh"

    def __len__(self):
        return int(self.seeds.shape[0])

    def select(self, index):
        return OlhReports(self.seeds[index], self.values[index])

    @classmethod
    def _concat(cls, batches):
        return cls(
            np.concatenate([b.seeds for b in batches]),
            np.concatenate([b.values for b in batches]),
        )


@dataclass(frozen=True)
class AggregateEstimate:
    """Unbiased count estimates plus the raw support counts they came from."""

    counts: np.ndarray
    support_counts: np.ndarray
    n_reports: int

    @property
    def frequencies(self) -> np.ndarray:
        return self.counts / self.n_reports


# ---------------------------------------------------------------------------
# protocols


@dataclass(frozen=True)
class Protocol:
    """Common interface; concrete classes fix ``p``, ``q`` and the encoding."""

    epsilon: float
    d: int

    name = "base"

    def __post_init__(self):
        if not self.epsilon > 0 or not math.isfinite(self.epsilon):
            raise ValueError("epsilon must be positive and finite")
        if int(self.d) != self.d or self.d < 2:
            raise ValueError("domain size d must be an integer >= 2")
        p, q = self.p, self.q
        if not 0 < q < p < 1:
            raise ValueError(f"invalid perturbation probabilities p={p}, q={q}")

    @property
    def p(self) -> float:
        raise NotImplementedError

    @property
    def q(self) -> float:
        raise NotImplementedError

    def _check_items(self, items) -> np.ndarray:
        items = np.asarray(items, dtype=np.int64)
        if items.size and (items.min() < 0 or items.max() >= self.d):
            raise ValueError("item out of domain")
        return items

    def perturb(self, items, key: int, user_ids=None) -> Reports:
        """Run the local randomiser on each user's item.

        ``key`` names a random stream (see :func:`ldprecover.core.stream_key`);
        user ``i`` draws only from the substream ``(key, user_ids[i])``.
        """
        items = self._check_items(np.atleast_1d(items))
        if user_ids is None:
            user_ids = np.arange(items.size, dtype=np.uint64)
        user_ids = np.asarray(user_ids, dtype=np.uint64)
        if user_ids.shape != items.shape:
            raise ValueError("user_ids must match items in shape")
        parts = [
            self._perturb_chunk(items[s : s + _CHUNK], key, user_ids[s : s + _CHUNK])
            for s in range(0, max(items.size, 1), _CHUNK)
        ]
        return Reports.concat(parts)

    def encode(self, items, rng: np.random.Generator) -> Reports:
        """Encode items into reports without perturbation (what a malicious user sends)."""
        raise NotImplementedError

    def support_counts(self, reports: Reports) -> np.ndarray:
        """``C(v)`` for every item ``v``."""
        raise NotImplementedError

    def supports(self, reports: Reports, item: int) -> np.ndarray:
        """Boolean mask: which reports support ``item``."""
        raise NotImplementedError

    def supports_any(self, reports: Reports, items) -> np.ndarray:
        items = self._check_items(np.atleast_1d(items))
        mask = np.zeros(len(reports), dtype=bool)
        for v in items:
            mask |= self.supports(reports, int(v))
        return mask

    def estimate_counts(self, support_counts, n_reports: int) -> np.ndarray:
        c = np.asarray(support_counts, dtype=np.float64)
        return (c - n_reports * self.q) / (self.p - self.q)

    def aggregate(self, reports: Reports) -> AggregateEstimate:
        if len(reports) == 0:
            raise ValueError("no reports to aggregate")
        self._check_reports(reports)
        c = self.support_counts(reports)
        n = len(reports)
        return AggregateEstimate(self.estimate_counts(c, n), c, n)

    def count_variance(self, f, n: int) -> np.ndarray:
        """Closed-form variance of the estimated count for true frequency ``f``."""
        raise NotImplementedError

    def frequency_variance(self, f, n: int) -> np.ndarray:
        """Asymptotic variance of the estimated frequency of genuine data.

        ``q(1-q) / (n (p-q)^2) + f (1-p-q) / (n (p-q))``.
        """
        f = np.asarray(f, dtype=np.float64)
        p, q = self.p, self.q
        return q * (1 - q) / (n * (p - q) ** 2) + f * (1 - p - q) / (n * (p - q))

    def _check_reports(self, reports):
        if reports.protocol != self.name:
            raise TypeError(f"{self.name} cannot aggregate {reports.protocol} reports")


@dataclass(frozen=True)
class GRR(Protocol):
    """Generalized randomized response."""

    name = "grr"

    @property
    def p(self):
        e = math.exp(self.epsilon)
        return e / (self.d - 1 + e)

    @property
    def q(self):
        return 1.0 / (self.d - 1 + math.exp(self.epsilon))

    def _perturb_chunk(self, items, key, user_ids):
        u = user_uniforms(key, user_ids, 2)
        keep = u[:, 0] < self.p
        other = np.minimum((u[:, 1] * (self.d - 1)).astype(np.int64), self.d - 2)
        other = other + (other >= items)
        return GrrReports(np.where(keep, items, other))

    def encode(self, items, rng=None):
        return GrrReports(self._check_items(np.atleast_1d(items)).copy())

    def support_counts(self, reports):
        return np.bincount(reports.items, minlength=self.d).astype(np.int64)

    def supports(self, reports, item):
        return reports.items == item

    def count_variance(self, f, n):
        e = math.exp(self.epsilon)
        f = np.asarray(f, dtype=np.float64)
        return n * (self.d - 2 + e) / (e - 1) ** 2 + n * f * (self.d - 2) / (e - 1)


@dataclass(frozen=True)
class OUE(Protocol):
    """Optimized unary encoding."""

    name = "oue"

    @property
    def p(self):
        return 0.5

    @property
    def q(self):
        return 1.0 / (math.exp(self.epsilon) + 1)

    def _perturb_chunk(self, items, key, user_ids):
        u = user_uniforms(key, user_ids, self.d)
        threshold = np.full(u.shape, self.q)
        threshold[np.arange(items.size), items] = self.p
        return OueReports(u < threshold)

    def encode(self, items, rng=None):
        items = self._check_items(np.atleast_1d(items))
        bits = np.zeros((items.size, self.d), dtype=bool)
        bits[np.arange(items.size), items] = True
        return OueReports(bits)

    def support_counts(self, reports):
        return reports.bits.sum(axis=0, dtype=np.int64)

    def supports(self, reports, item):
        return reports.bits[:, item].copy()

    def count_variance(self, f, n):
        e = math.exp(self.epsilon)
        return np.full(np.shape(f), n * 4 * e / (e - 1) ** 2)


@dataclass(frozen=True)
class OLH(Protocol):
    """Optimized local hashing; ``g`` defaults to ``ceil(e^epsilon + 1)``."""

    g: int | None = None

    name = "olh"

    def __post_init__(self):
        if self.g is None:
            object.__setattr__(self, "g", math.ceil(math.exp(self.epsilon) + 1))
        if int(self.g) != self.g or self.g < 2:
            raise ValueError("hash range g must be an integer >= 2")
        super().__post_init__()

    @property
    def p(self):
        e = math.exp(self.epsilon)
        return e / (e + self.g - 1)

    @property
    def q(self):
        return 1.0 / self.g

    def _perturb_chunk(self, items, key, user_ids):
        words = user_words(key, user_ids, 3)
        seeds = words[:, 0]
        u = (words[:, 1:] >> np.uint64(11)) * (1.0 / (1 << 53))
        hashed = olh_hash(seeds, items, self.g)
        keep = u[:, 0] < self.p
        shift = 1 + np.minimum((u[:, 1] * (self.g - 1)).astype(np.int64), self.g - 2)
        return OlhReports(seeds, np.where(keep, hashed, (hashed + shift) % self.g))

    def encode(self, items, rng):
        items = self._check_items(np.atleast_1d(items))
        seeds = rng.integers(0, 1 << 64, size=items.size, dtype=np.uint64, endpoint=False)
        return OlhReports(seeds, olh_hash(seeds, items, self.g))

    def support_counts(self, reports):
        item_keys = _item_keys(np.arange(self.d))[None, :]
        counts = np.zeros(self.d, dtype=np.int64)
        for s in range(0, len(reports), _CHUNK):
            seed_keys = mix64(reports.seeds[s : s + _CHUNK])[:, None]
            hashed = _hash_keyed(seed_keys, item_keys, self.g)
            counts += (hashed == reports.values[s : s + _CHUNK, None]).sum(axis=0)
        return counts

    def supports(self, reports, item):
        return olh_hash(reports.seeds, item, self.g) == reports.values

    def count_variance(self, f, n):
        e = math.exp(self.epsilon)
        return np.full(np.shape(f), n * 4 * e / (e - 1) ** 2)


PROTOCOLS = {"grr": GRR, "oue": OUE, "olh": OLH}


def make_protocol(name: str, epsilon: float, d: int, g: int | None = None) -> Protocol:
    try:
        cls = PROTOCOLS[name.lower()]
    except KeyError:
        raise ValueError(f"unknown protocol {name!r}; expected one of {sorted(PROTOCOLS)}") from None
    if cls is OLH:
        return OLH(epsilon, d, g)
    if g is not None:
        raise ValueError("g only applies to OLH")
    return cls(epsilon, d)


# ---------------------------------------------------------------------------
# serialisation


def report_to_json(reports: Reports, i: int) -> dict:
    if isinstance(reports, GrrReports):
        return {"grr": int(reports.items[i])}
    if isinstance(reports, OueReports):
        return {"oue": "".join("1" if b else "0" for b in reports.bits[i])}
    if isinstance(reports, OlhReports):
        return {"olh": {"seed": int(reports.seeds[i]), "val": int(reports.values[i])}}
    raise TypeError(f"unsupported report batch {type(reports).__name__}")


def reports_from_json(objs, protocol: Protocol) -> Reports:
    objs = list(objs)
    try:
        if protocol.name == "grr":
            items = np.array([o["grr"] for o in objs], dtype=np.int64)
            return GrrReports(protocol._check_items(items))
        if protocol.name == "oue":
            rows = [o["oue"] for o in objs]
            if any(len(r) != protocol.d or set(r) - {"0", "1"} for r in rows):
                raise ValueError(f"OUE reports must be {protocol.d}-character bit strings")
            bits = np.array([[c == "1" for c in r] for r in rows], dtype=bool).reshape(-1, protocol.d)
            return OueReports(bits)
        if protocol.name == "olh":
            seeds = np.array([o["olh"]["seed"] for o in objs], dtype=np.uint64)
            values = np.array([o["olh"]["val"] for o in objs], dtype=np.int64)
            if values.size and (values.min() < 0 or values.max() >= protocol.g):
                raise ValueError(f"OLH value out of range 0..{protocol.g - 1}")
            return OlhReports(seeds, values)
    except KeyError as exc:
        raise ValueError(f"report is missing key {exc}") from None
    raise ValueError(f"unknown protocol {protocol.name!r}")
