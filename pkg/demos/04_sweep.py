"""
Sweeping the assumed attacker ratio
===================================

The server does not know eta. Overestimating it costs little; the
genuine ratio here is about 0.053.
"""

from ldprecover import DatasetSpec, ExperimentConfig, run_sweep

config = ExperimentConfig(
    dataset=DatasetSpec(d=102, n=100_000),
    attack="adaptive",
    methods=("poisoned", "ldprecover"),
    trials=3,
    sweep_param="eta",
    sweep_values=(0.01, 0.05, 0.1, 0.2, 0.4),
)
for eta, result in run_sweep(config).items():
    print(f"eta={eta:<5} poisoned {result.row('poisoned').mse:.2e}  recovered {result.row('ldprecover').mse:.2e}")
