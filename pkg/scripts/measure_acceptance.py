"""Dry-run of the acceptance experiments with timing, for threshold pinning."""
import os
import time

import numpy as np

os.environ.setdefault("DCIES_THREADS", "2")
for var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(var, "1")

from dcies.core import FactorSpec
from dcies.harness import DownstreamConfig, ExperimentConfig, RepresentationSource, run_experiment
from dcies.importance import SageConfig
from dcies.probes import TrainingConfig
from dcies.synthetic import MixingSpec, desk_specs, realize_mixing

TRAINING = TrainingConfig(epochs=80, learning_rate=2e-2, rf_n_trees=50, rf_max_features=1.0)
SAGE = SageConfig(n_permutations=32, marginal_sample_size=1, eval_batch=1024)
LADDERS = {
    "mlp": {"mlp_width_factors": [2, 8]},
    "rff": {"rff_log2_features": [4, 6, 8]},
    "rf": {"rf_depths": [1, 2, 4, 8, 16, 32]},
}
COMMON = dict(
    seeds=(0, 1, 2),
    n_samples=20000,
    factor_specs=desk_specs(),
    ladder_overrides=LADDERS,
    training=TRAINING,
    sage=SAGE,
    emit_plots=False,
    output_dir="/tmp/acc-measure",
)

def show(result, keys):
    for key in keys:
        agg = result.aggregates[key]
        m, s = agg["mean"], agg["std"]
        print(f"  {key}: D={m['D']:.4f}±{s['D']:.3f} C={m['C']:.4f}±{s['C']:.3f} "
              f"I={m['I']:.4f}±{s['I']:.3f} E={m['E']:.4f}±{s['E']:.3f} S={m['S']}")

t0 = time.time()
mlp_family = ExperimentConfig(
    representations=(
        RepresentationSource("identity", mixing=MixingSpec("identity")),
        RepresentationSource("noisy", mixing=MixingSpec("noisy", noise_std=0.1)),
        RepresentationSource("linear_uniform", mixing=MixingSpec("linear_uniform")),
        RepresentationSource("monotone", mixing=MixingSpec("elementwise_monotone")),
        RepresentationSource("random_mlp_d1", mixing=MixingSpec("random_mlp", depth=1)),
        RepresentationSource("random_mlp_d2", mixing=MixingSpec("random_mlp", depth=2)),
    ),
    probe_classes=("mlp",),
    downstream=DownstreamConfig(enabled=True, probe_kinds=("mlp",)),
    **COMMON,
)
res_mlp = run_experiment(mlp_family)
t1 = time.time()
print(f"MLP_FAMILY: {t1-t0:.0f}s")
show(res_mlp, [f"{r}/mlp" for r in ("identity", "noisy", "linear_uniform", "monotone", "random_mlp_d1", "random_mlp_d2")])
for c in res_mlp.correlations:
    print(f"  corr probe={c.probe_class} kind={c.downstream_kind} n={c.n_points}: "
          f"E rho={c.per_score['E']['pearson']:.3f} D rho={c.per_score['D']['pearson']:.3f} "
          f"I rho={c.per_score['I']['pearson']:.3f} C rho={c.per_score['C']['pearson']:.3f}")
for (rep, seed, kind), entry in sorted(res_mlp.downstream.items()):
    print(f"  downstream {rep}/s{seed}/{kind}: mean={entry['mean']:.3f}")

rfx = ExperimentConfig(
    representations=(RepresentationSource("identity", mixing=MixingSpec("identity")),),
    probe_classes=("rff", "rf"),
    **COMMON,
)
res_rfx = run_experiment(rfx)
t2 = time.time()
print(f"RFX: {t2-t1:.0f}s")
show(res_rfx, ["identity/rff", "identity/rf"])

rf_family = ExperimentConfig(
    representations=(
        RepresentationSource("linear_uniform", mixing=MixingSpec("linear_uniform")),
        RepresentationSource("monotone", mixing=MixingSpec("elementwise_monotone")),
    ),
    probe_classes=("rf",),
    **COMMON,
)
res_rf = run_experiment(rf_family)
t3 = time.time()
print(f"RF_FAMILY: {t3-t2:.0f}s")
show(res_rf, ["linear_uniform/rf", "monotone/rf"])

# criterion 9 permutation recovery
for run in res_rf.runs:
    if run.representation != "monotone":
        continue
    mix = rf_family.representations[1].mixing
    from dataclasses import replace
    real = realize_mixing(replace(mix, seed=mix.seed + 7919 * run.seed), 7)
    recovered = [int(np.argmax(run.importance.values[:, j])) for j in range(7)]
    expected = [int(np.argwhere(real.pi == j)[0][0]) for j in range(7)]
    print(f"  monotone seed {run.seed}: recovered={recovered} expected={expected} match={recovered == expected}")

print(f"TOTAL: {t3-t0:.0f}s")
