"""The factorial policy laboratory on the shipped reference design.

Crosses the three intervention axes (structural reroute, seminar pedagogy,
stricter regularity requirement), decomposes main effects and interactions,
and reports which pairs amplify each other and which cells are adverse
(slower degrees without dropout relief). Uses fewer replications than the
shipped design so it runs in seconds; pass --full for the real thing.
"""

import dataclasses
import sys

from trajlab.cli import load_design
from trajlab.fixtures import fixture_path
from trajlab.policy import (
    decompose_effects,
    detect_amplifiers,
    flag_adverse_outcomes,
    run_experiment,
)

_, design, thresholds = load_design(fixture_path("reference_design"))
if "--full" not in sys.argv:
    design = dataclasses.replace(design, replications=3)
print(f"running 2^3 x {design.replications} replications "
      f"(n={design.base.population.n}, horizon {design.base.horizon}) ...")
cells = run_experiment(design)

print(f"{'cell':8s} {'dropout':>8s} {'graduation':>11s} {'mean ttd':>9s}")
for cell in cells:
    print(f"{cell.cell_id:8s} {cell.means['dropout_rate']:8.3f} "
          f"{cell.means['graduation_rate']:11.3f} "
          f"{cell.means['mean_time_to_degree']:9.3f}")

for outcome in ("dropout_rate", "mean_time_to_degree"):
    report = decompose_effects(cells, outcome)
    print(f"\ncontrasts for {outcome}:")
    for axis, contrast in report.main.items():
        print(f"   main {axis:12s} {contrast.estimate:+8.4f} "
              f"(se {contrast.std_error:.4f})")
    for pair, contrast in report.interactions.items():
        print(f"   {'*'.join(a[:4] for a in pair):14s} {contrast.estimate:+8.4f} "
              f"(se {contrast.std_error:.4f})")

report = decompose_effects(cells, "dropout_rate")
amplifiers = detect_amplifiers(report, thresholds["amplifier_threshold"])
adverse = flag_adverse_outcomes(cells, cells[0].cell_id,
                                thresholds["adverse_eps_dropout"],
                                thresholds["adverse_delta_ttd"])
print("\nstructural-amplifier pairs:",
      ", ".join("*".join(p) for p, v in amplifiers if v["structural"]) or "(none)")
print("adverse cells (slower without dropout relief):",
      ", ".join(adverse) or "(none)")
