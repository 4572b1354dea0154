"""Trajectory archetypes on a simulated cohort.

Extracts progression-shape features at a mid-program observation point,
clusters them into the five named archetypes, and summarizes each cluster's
de-standardized centroid.
"""

from collections import Counter

from trajlab.archetypes import (
    FEATURE_ORDER,
    ArchetypeConfig,
    classify,
    extract_features,
    fit_archetypes,
)
from trajlab.cli import load_scenario
from trajlab.fixtures import fixture_path
from trajlab.sim import simulate
from trajlab.temporal import n3

_, config = load_scenario(fixture_path("reference_scenario"))
result = simulate(config)
arch_config = ArchetypeConfig(nominal_terms=5)

as_of = n3(12)
features = [extract_features(rec, config.curriculum, as_of, arch_config)
            for rec in result.records]
model = fit_archetypes(features, k=5, seed=3, config=arch_config)

labels = Counter(classify(model, f) for f in features)
print(f"cohort of {result.n} at observation point {as_of}:")
for label, count in labels.most_common():
    print(f"   {label:20s} {count:4d}")

print("\nde-standardized centroids:")
header = " ".join(f"{name[:9]:>9s}" for name in FEATURE_ORDER)
print(f"   {'label':20s} {header}")
raw = model.destandardized_centroids()
for idx in sorted(model.label_map):
    row = " ".join(f"{raw[idx][j]:9.2f}" for j in range(len(FEATURE_ORDER)))
    print(f"   {model.label_map[idx]:20s} {row}")
