"""Frequency recovery for LDP frequency oracles under poisoning attacks."""

from .attack import (
    AttackSpec,
    PoisonedReportSet,
    compose_attacks,
    craft_adaptive,
    craft_manip,
    craft_mga,
    craft_mga_ipa,
    malicious_count,
    poison,
)
from .core import (
    Dataset,
    ItemDomain,
    load_dataset,
    save_dataset,
    stream_key,
    synthesize_zipf,
    true_frequencies,
)
from .evaluation import DatasetSpec, ExperimentConfig, frequency_gain, mse, run_experiment, run_sweep
from .ldp import GRR, OLH, OUE, make_protocol, olh_hash
from .recover import (
    RecoveryConfig,
    RecoveryResult,
    detection_baseline,
    estimate_malicious_none,
    estimate_malicious_partial,
    genuine_estimator,
    learned_malicious_sum,
    ldprecover,
    refine,
)

__version__ = "0.1.0"
