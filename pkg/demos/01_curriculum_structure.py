"""Structural anatomy of a prerequisite curriculum.

Loads the shipped reference curriculum and the fourteen-course chain and
walks through the structural metrics: longest forced sequence, backbone
courses, bottleneck concentration, minimum completion time per load cap,
and how far a single early failure pushes graduation.
"""

from trajlab.curriculum import (
    backbone_courses,
    bottleneck_scores,
    delay_propagation,
    longest_chain,
    min_completion_terms,
)
from trajlab.fixtures import load_fixture_curriculum

for name in ("reference_curriculum", "chain14"):
    curriculum = load_fixture_curriculum(name)
    print(f"=== {name} ({len(curriculum.courses)} courses, "
          f"{len(curriculum.edges)} prerequisite edges)")

    length, path = longest_chain(curriculum)
    print(f"longest chain: {length} courses")
    print("   " + " -> ".join(path))

    backbone = sorted(backbone_courses(curriculum))
    print(f"backbone (on every path to graduation): {backbone or '(none)'}")

    scores = bottleneck_scores(curriculum)
    top = sorted(scores.items(), key=lambda kv: (-kv[1], kv[0]))[:5]
    print("bottleneck centrality, top 5:")
    for course, score in top:
        print(f"   {course:4s} {score:7.2f}")

    print("minimum terms to graduate by load cap:")
    for cap in range(2, 7):
        print(f"   cap {cap}: {min_completion_terms(curriculum, cap)} terms")
    print()

# a failure on the chain's first course shifts everything downstream
chain = load_fixture_curriculum("chain14")
added = delay_propagation(chain, "C01", fail_term=1, load_cap=2)
print(f"failing C01 at term 1 on the fourteen-course chain adds {added} term(s)")

# the same failure is absorbable when slack exists
ref = load_fixture_curriculum("reference_curriculum")
added = delay_propagation(ref, "C1", fail_term=1, load_cap=4)
print(f"failing C1 at term 1 in the reference curriculum adds {added} term(s): "
      "parallel breadth absorbs it")
