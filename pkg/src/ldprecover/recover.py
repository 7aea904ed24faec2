"""Recovering genuine frequencies from poisoned LDP aggregates.

The poisoned frequency of every item is a mix of the genuine and malicious
frequencies, ``f_z = (f_x + eta f_y) / (1 + eta)``. The server never sees
``f_y``, but for any attack that samples crafted items from some distribution
the expected total ``sum_v f_y(v)`` equals ``(1 - q d) / (p - q)``. Spreading
that total over the suspicious items gives an estimate of ``f_y``, inverting
the mixture gives an estimate of ``f_x``, and projecting onto the probability
simplex gives the final answer.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attack import PoisonedReportSet
from .core import check_frequencies
from .ldp import GRR, Protocol, Reports

__all__ = [
    "RecoveryConfig",
    "RecoveryResult",
    "genuine_estimator",
    "learned_malicious_sum",
    "estimate_malicious_none",
    "estimate_malicious_partial",
    "refine",
    "ldprecover",
    "detection_baseline",
]


@dataclass(frozen=True)
class RecoveryConfig:
    """Server-side settings.

    Attributes:
        eta: assumed ratio of malicious to genuine users. Overestimating it is
            safer than underestimating it.
        targets: attacker-selected items if known (partial knowledge), else None.
        paper_faithful_partial: with known targets, charge the non-target items
            ``-q d / (p - q)`` in total (True) or ``-q |non-targets| / (p - q)``.
        tolerance: refinement drops items whose value falls below ``-tolerance``;
            None means ``1e-12 * d``.
    """

    eta: float = 0.2
    targets: tuple[int, ...] | None = None
    paper_faithful_partial: bool = True
    tolerance: float | None = None

    def __post_init__(self):
        if not self.eta >= 0:
            raise ValueError("eta must be nonnegative")
        if self.tolerance is not None and not self.tolerance >= 0:
            raise ValueError("tolerance must be nonnegative")
        if self.targets is not None:
            if len(self.targets) == 0:
                raise ValueError("target set must be nonempty when given")
            object.__setattr__(self, "targets", tuple(int(t) for t in self.targets))


@dataclass(frozen=True)
class RecoveryResult:
    estimated_genuine: np.ndarray
    recovered: np.ndarray
    malicious_estimate: np.ndarray
    zeroed: tuple[int, ...] = field(default=())
    iterations: int = 0

    def to_json(self) -> dict:
        return {
            "recovered": self.recovered.tolist(),
            "estimated_genuine": self.estimated_genuine.tolist(),
            "malicious_estimate": self.malicious_estimate.tolist(),
            "zeroed": list(self.zeroed),
            "iterations": self.iterations,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "RecoveryResult":
        return cls(
            estimated_genuine=np.asarray(obj["estimated_genuine"], dtype=np.float64),
            recovered=np.asarray(obj["recovered"], dtype=np.float64),
            malicious_estimate=np.asarray(obj["malicious_estimate"], dtype=np.float64),
            zeroed=tuple(int(v) for v in obj["zeroed"]),
            iterations=int(obj["iterations"]),
        )


def genuine_estimator(f_z, f_y, eta: float) -> np.ndarray:
    """Invert the mixture: ``(1 + eta) f_z - eta f_y``."""
    if eta < 0:
        raise ValueError("eta must be nonnegative")
    f_z = check_frequencies(f_z)
    f_y = check_frequencies(f_y, f_z.size)
    return (1 + eta) * f_z - eta * f_y


def learned_malicious_sum(protocol: Protocol) -> float:
    """Expected total malicious frequency ``(1 - q d) / (p - q)``.

    For GRR this is exactly 1.
    """
    if isinstance(protocol, GRR):
        # p + (d - 1) q = 1, so 1 - q d = p - q; skip the rounding noise
        return 1.0
    p, q = protocol.p, protocol.q
    return (1 - q * protocol.d) / (p - q)


def estimate_malicious_none(f_z, sum_fy: float) -> np.ndarray:
    """Spread ``sum_fy`` evenly over the items with positive poisoned frequency."""
    f_z = check_frequencies(f_z)
    positive = f_z > 0
    k = int(positive.sum())
    if k == 0:
        raise ValueError("all poisoned frequencies nonpositive")
    return np.where(positive, sum_fy / k, 0.0)


def estimate_malicious_partial(
    f_z, sum_fy: float, targets, protocol: Protocol, paper_faithful: bool = True
) -> np.ndarray:
    """Malicious frequencies when the attacker's targets are known.

    Non-targets never appear in the attacker's distribution, so their share of
    the total is what the ``-q`` bias alone contributes; the targets split
    the rest evenly.
    """
    f_z = check_frequencies(f_z, protocol.d)
    d = f_z.size
    is_target = np.zeros(d, dtype=bool)
    targets = np.asarray(list(targets), dtype=np.int64)
    if targets.size == 0:
        raise ValueError("target set is empty")
    if targets.min() < 0 or targets.max() >= d:
        raise ValueError("target out of domain")
    is_target[targets] = True
    n_other = d - int(is_target.sum())
    if n_other == 0:
        return np.full(d, sum_fy / d)

    p, q = protocol.p, protocol.q
    charged = d if paper_faithful else n_other
    other_sum = -q * charged / (p - q)
    target_sum = sum_fy - other_sum
    return np.where(is_target, target_sum / (d - n_other), other_sum / n_other)


def refine(f_tilde, tolerance: float | None = None) -> tuple[np.ndarray, tuple[int, ...], int]:
    """Euclidean projection onto the probability simplex by active-set iteration.

    Starting with every item active, shift the active entries by a common
    amount so they sum to one, then deactivate (zero) every entry that went
    negative; repeat until nothing is negative.

    Returns ``(projected, zeroed_items, iterations)`` where ``iterations``
    counts the rounds that deactivated at least one item.
    """
    f = check_frequencies(f_tilde)
    if tolerance is None:
        tolerance = 1e-12 * f.size
    active = np.ones(f.size, dtype=bool)
    iterations = 0
    while True:
        k = int(active.sum())
        # cannot happen: the active entries always sum to 1 after the shift
        assert k > 0, "refinement degenerate"
        shift = (f[active].sum() - 1.0) / k
        out = np.where(active, f - shift, 0.0)
        negative = active & (out < -tolerance)
        if not negative.any():
            break
        active &= ~negative
        iterations += 1
    zeroed = tuple(int(v) for v in np.flatnonzero(~active))
    return np.maximum(out, 0.0), zeroed, iterations


def ldprecover(f_z, protocol: Protocol, config: RecoveryConfig | None = None) -> RecoveryResult:
    """Recover genuine frequencies from poisoned frequencies ``f_z``.

    ``f_z`` is the aggregate over all received reports, normalised by their
    number. With ``config.targets`` set this is the partial-knowledge variant.
    """
    config = config or RecoveryConfig()
    f_z = check_frequencies(f_z, protocol.d)
    sum_fy = learned_malicious_sum(protocol)
    if config.targets is None:
        f_y = estimate_malicious_none(f_z, sum_fy)
    else:
        f_y = estimate_malicious_partial(
            f_z, sum_fy, config.targets, protocol, config.paper_faithful_partial
        )
    estimated = genuine_estimator(f_z, f_y, config.eta)
    recovered, zeroed, iterations = refine(estimated, config.tolerance)
    return RecoveryResult(estimated, recovered, f_y, zeroed, iterations)


def detection_baseline(reports: PoisonedReportSet | Reports, targets, protocol: Protocol) -> np.ndarray:
    """Drop every report that supports any target, aggregate what is left.

    Genuine users whose report happens to support a target are dropped too.
    """
    if isinstance(reports, PoisonedReportSet):
        reports = reports.combined()
    targets = list(targets)
    if not targets:
        raise ValueError("target set is empty")
    keep = ~protocol.supports_any(reports, targets)
    if not keep.any():
        raise ValueError("detection removed every report")
    return protocol.aggregate(reports.select(keep)).frequencies
