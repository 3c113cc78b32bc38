"""How the softmax temperature shapes the likelihood estimator.

The feedback itself follows the hard argmax rule, so the temperature only
enters through the estimator's objective.  This sweep reports the
beam-precision improvement of the subspace likelihood solver over the
spectral method per temperature, plus the same comparison across
initialization schemes.
"""

from pmichannel import experiments

print("temperature sweep (structured designs, single stream)")
rows = experiments.run_ablation(
    "tau", grid=(0.1, 0.5, 1.0, 5.0, 10.0, 100.0),
    rounds=(5, 10), n_samples=30, seed=0, workers=4,
)
for rec in experiments.summarize_ablation(rows):
    print(f"  {rec['method']:>28} T={rec['T']:>2}  improvement {rec['improvement']:+.4f}")

print("\ninitialization sweep")
rows = experiments.run_ablation(
    "init", grid=("identity", "random", "spectral"),
    rounds=(5, 10), n_samples=30, seed=0, workers=4,
)
for rec in experiments.summarize_ablation(rows):
    print(f"  {rec['method']:>28} T={rec['T']:>2}  improvement {rec['improvement']:+.4f}")
