"""Domain types, datasets and the deterministic randomness used across the package.

Frequency vectors are plain 1-D ``float64`` numpy arrays of length ``d``.

Randomness is counter based: every random draw is a pure function of
``(seed, stream tag, user index, column)``, so a user's perturbation does not
depend on how many other users were processed before it or in what order.
"""

from __future__ import annotations

import csv
import hashlib
import io
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "ItemDomain",
    "Dataset",
    "true_frequencies",
    "synthesize_zipf",
    "zipf_pmf",
    "load_dataset",
    "save_dataset",
    "mix64",
    "stream_key",
    "user_uniforms",
    "user_words",
    "make_rng",
    "check_frequencies",
]

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30, _S27, _S31, _S11 = (np.uint64(s) for s in (30, 27, 31, 11))
_MASK64 = (1 << 64) - 1
_DOMAIN_COMMENT = re.compile(r"\A\s*#\s*d=(\d+)")


@dataclass(frozen=True)
class ItemDomain:
    """Finite item domain ``{0, ..., size-1}``."""

    size: int

    def __post_init__(self):
        if int(self.size) != self.size or self.size < 2:
            raise ValueError(f"domain size must be an integer >= 2, got {self.size!r}")
        object.__setattr__(self, "size", int(self.size))

    def __len__(self):
        return self.size

    def contains(self, items) -> bool:
        items = np.asarray(items)
        return bool(np.all((items >= 0) & (items < self.size)))


@dataclass(frozen=True)
class Dataset:
    """Genuine users' items; ``values[i]`` is the item held by user ``i``.

    ``labels`` maps indices back to the original tokens when the source file
    used string labels (index ``k`` is the ``k``-th distinct label seen).
    """

    domain: ItemDomain
    values: np.ndarray
    labels: tuple[str, ...] | None = field(default=None, compare=False)

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.ndim != 1:
            raise ValueError("dataset values must be one-dimensional")
        if values.size == 0:
            raise ValueError("empty dataset")
        if not np.issubdtype(values.dtype, np.integer):
            raise TypeError("dataset values must be integer item indices")
        if not self.domain.contains(values):
            raise ValueError("item out of domain")
        values = values.astype(np.int64, copy=True)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def n(self) -> int:
        return int(self.values.size)

    @property
    def d(self) -> int:
        return self.domain.size

    def __len__(self):
        return self.n

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.domain == other.domain and np.array_equal(self.values, other.values)

    __hash__ = None


def true_frequencies(data: Dataset) -> np.ndarray:
    """Fraction of genuine users holding each item."""
    if data.n == 0:
        raise ValueError("empty dataset")
    counts = np.bincount(data.values, minlength=data.d)
    return counts / data.n


def check_frequencies(f, d: int | None = None) -> np.ndarray:
    f = np.asarray(f, dtype=np.float64)
    if f.ndim != 1:
        raise ValueError("frequency vector must be one-dimensional")
    if d is not None and f.size != d:
        raise ValueError(f"domain mismatch: expected length {d}, got {f.size}")
    if not np.all(np.isfinite(f)):
        raise ValueError("frequency vector contains non-finite entries")
    return f


# ---------------------------------------------------------------------------
# randomness


def make_rng(seed: int, *tags: str) -> np.random.Generator:
    """A numpy Generator for bulk (non per-user) sampling, keyed by seed and tags."""
    words = [int(seed) & _MASK64] + [_tag_word(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(words))


def _tag_word(tag: str) -> int:
    return int.from_bytes(hashlib.blake2b(tag.encode(), digest_size=8).digest(), "little")


def mix64(x) -> np.ndarray:
    """SplitMix64 finaliser, elementwise over a uint64 array (wrapping arithmetic)."""
    with np.errstate(over="ignore"):
        z = np.asarray(x, dtype=np.uint64) + _GOLDEN
        z = (z ^ (z >> _S30)) * _M1
        z = (z ^ (z >> _S27)) * _M2
        return z ^ (z >> _S31)


def stream_key(seed: int, tag: str) -> int:
    """64-bit key of the independent stream named ``tag`` under ``seed``."""
    base = mix64(np.array([int(seed) & _MASK64], dtype=np.uint64))
    return int(mix64(base ^ np.uint64(_tag_word(tag)))[0])


def user_words(key: int, user_ids, ncols: int) -> np.ndarray:
    """Raw 64-bit words, shape ``(len(user_ids), ncols)``; row ``i`` depends only on ``user_ids[i]``."""
    uid = np.asarray(user_ids, dtype=np.uint64)
    state = mix64(np.uint64(key) ^ mix64(uid))
    cols = (np.arange(1, ncols + 1, dtype=np.uint64) * _GOLDEN)[None, :]
    return mix64(state[:, None] + cols)


def user_uniforms(key: int, user_ids, ncols: int) -> np.ndarray:
    """Uniform draws on ``[0, 1)`` with the same keying as :func:`user_words`."""
    return (user_words(key, user_ids, ncols) >> _S11) * (1.0 / (1 << 53))


# ---------------------------------------------------------------------------
# datasets


def zipf_pmf(d: int, s: float) -> np.ndarray:
    """Zipf(s) probabilities truncated to ``d`` items; item 0 is the most likely."""
    if s <= 0:
        raise ValueError("Zipf exponent must be positive")
    logw = -s * np.log(np.arange(1, d + 1, dtype=np.float64))
    w = np.exp(logw - logw.max())
    return w / w.sum()


def synthesize_zipf(domain: ItemDomain | int, n: int, s: float = 1.1, seed: int = 0) -> Dataset:
    """Draw ``n`` i.i.d. items from a truncated Zipf(s) law."""
    if not isinstance(domain, ItemDomain):
        domain = ItemDomain(domain)
    if n < 1:
        raise ValueError("n must be >= 1")
    pmf = zipf_pmf(domain.size, s)
    rng = make_rng(seed, "zipf")
    values = rng.choice(domain.size, size=int(n), p=pmf)
    return Dataset(domain, values)


def load_dataset(path, domain_size: int | None = None) -> Dataset:
    """Read a dataset file.

    Two layouts are accepted: one item per line, or a CSV whose header is
    ``item,count``. Lines starting with ``#`` and blank lines are ignored.
    Items that are not integers are treated as labels and numbered by first
    appearance.
    """
    text = Path(path).read_text(encoding="utf-8")
    header = _DOMAIN_COMMENT.search(text)
    declared_d = int(header.group(1)) if header else None
    rows = [
        (lineno, line.strip())
        for lineno, line in enumerate(text.splitlines(), start=1)
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not rows:
        raise ValueError(f"{path}: empty dataset")

    counted = rows[0][1].replace(" ", "").lower() == "item,count"
    if counted:
        rows = rows[1:]
        if not rows:
            raise ValueError(f"{path}: empty dataset")

    tokens, counts = [], []
    for lineno, line in rows:
        if counted:
            parts = next(csv.reader(io.StringIO(line)))
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'item,count', got {line!r}")
            token, raw_count = parts[0].strip(), parts[1].strip()
            try:
                count = int(raw_count)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: count is not an integer: {raw_count!r}") from None
            if count < 0:
                raise ValueError(f"{path}:{lineno}: negative count")
        else:
            if "," in line:
                raise ValueError(f"{path}:{lineno}: malformed row {line!r}")
            token, count = line, 1
        tokens.append((lineno, token))
        counts.append(count)

    labels = None
    if all(_is_int(tok) for _, tok in tokens):
        indices = []
        for lineno, tok in tokens:
            idx = int(tok)
            if idx < 0:
                raise ValueError(f"{path}:{lineno}: negative item index")
            if domain_size is not None and idx >= domain_size:
                raise ValueError(f"{path}:{lineno}: item out of domain ({idx} >= {domain_size})")
            indices.append(idx)
    else:
        mapping: dict[str, int] = {}
        indices = [mapping.setdefault(tok, len(mapping)) for _, tok in tokens]
        labels = tuple(mapping)
        if domain_size is not None and len(mapping) > domain_size:
            raise ValueError(f"{path}: item out of domain ({len(mapping)} labels > {domain_size})")

    values = np.repeat(np.asarray(indices, dtype=np.int64), np.asarray(counts, dtype=np.int64))
    if values.size == 0:
        raise ValueError(f"{path}: empty dataset")
    d = int(values.max()) + 1
    for hint in (domain_size, declared_d):
        if hint is not None:
            d = max(d, hint)
    return Dataset(ItemDomain(max(d, 2)), values, labels)


def save_dataset(data: Dataset, path, counted: bool = False) -> None:
    """Write ``data`` so that :func:`load_dataset` reproduces it.

    The domain size goes into a leading ``# d=...`` comment, which
    :func:`load_dataset` honours, so trailing unseen items survive a round trip.
    """
    path = Path(path)
    lines = [f"# d={data.d} n={data.n}"]
    if counted:
        counts = np.bincount(data.values, minlength=data.d)
        lines.append("item,count")
        lines.extend(f"{v},{c}" for v, c in enumerate(counts) if c)
    else:
        lines.extend(map(str, data.values.tolist()))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def _is_int(token: str) -> bool:
    try:
        int(token)
    except ValueError:
        return False
    return True
