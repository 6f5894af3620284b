"""Two-stage certification without invariance of the intermediate set.

Nested-quadratic exemplar: the outer pair (W1, W1_tilde) certifies
attraction to the ball of radius 0.3 inside the ball of radius 0.9; the
inner pair (W2, W2_tilde) certifies attraction to the origin inside the
small ball. Crucially the inner decay W2_tilde is POSITIVE at r = 0.6, far
outside its own territory, so the naive "chain the two certificates"
argument has no footing there. The summed-decay condition
W1_tilde + W2_tilde <= 0 on the whole outer ball rescues it, and the
composite pair 2*W1 + W2 certifies the origin directly.
"""

import numpy as np

from basincert import certify_transitive, check_transitivity_conditions, compose_transitive
from basincert.instances import make_transitivity_instance

inst = make_transitivity_instance("nested_quadratic")

conds = check_transitivity_conditions(inst)
print("conditions:", {k: v.status for k, v in conds.items()})

x = np.array([0.6, 0.0])
print(f"\nat r = 0.6 (outside the intermediate ball):")
print(f"  inner decay W2_tilde = {inst.W2_tilde(x):+.3f}   <- positive!")
print(f"  outer decay W1_tilde = {inst.W1_tilde(x):+.3f}")
print(f"  sum                  = {inst.W1_tilde(x) + inst.W2_tilde(x):+.3f}  <- condition c")

W, W_tilde = compose_transitive(inst)
print(f"\ncomposite at that point: W = {W(x):.4f}, W_tilde = {W_tilde(x):+.4f}")

cert = certify_transitive(inst)
print("\ncomposite zero-set scan:",
      cert.transitivity["composite_zero_sets"]["status"])
print(f"constructed basin piece inside the outer ball: d_bar={cert.construction.d_bar:.3f}, "
      f"level={cert.construction.level:.4f}")
print("overall:", cert.overall, "->", cert.claim)
