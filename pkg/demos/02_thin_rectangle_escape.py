"""The gap this toolkit exists for: monotone decrease does not give invariance.

The spiral sink xdot = (-0.1 x1 - x2, x1 - 0.1 x2) decreases W = |x|^2 at
rate -0.2|x|^2 everywhere, in particular on the thin open rectangle
(-1,1) x (-0.1,0.1). Every pointwise Lyapunov hypothesis checks out on that
rectangle. But the rectangle is not forward invariant: trajectories spiral
through its long sides long before the radius has shrunk, and the decrease
guarantee says nothing once they have left.

The fix is constructive: inside the rectangle, the sublevel set
{W < w_bar/2} (a disk of radius ~0.035) is forward invariant, and that disk
is a certified piece of the basin of attraction.
"""

import numpy as np

from basincert import (
    check_decrease_bound,
    check_sign_conditions,
    check_zero_sets,
    construct_invariant_neighborhood,
    verify_forward_invariance,
)
from basincert.instances import make_instance

inst = make_instance("rotation_contraction")

print("pointwise hypotheses on the thin rectangle:")
print("  signs      :", check_sign_conditions(inst.W, inst.W_tilde, inst.xprime).status)
print("  zero sets  :", check_zero_sets(inst.W, inst.W_tilde, inst.xprime,
                                        inst.target).status)
print("  decrease   :", check_decrease_bound(inst.W, inst.W_tilde, inst.inclusion,
                                             inst.xprime).status)

leak = verify_forward_invariance(inst.inclusion, inst.xprime, n_starts=200,
                                 T=10.0, dt=1e-3, seed=0, target=inst.target)
print(f"\nrectangle invariance: {leak.verdict} "
      f"({len(leak.witnesses)} escapes over {leak.n_starts} starts)")
w = leak.witnesses[0]
print(f"  first witness: start {np.round(w.start, 3).tolist()} leaves at "
      f"t={w.t:.3f} through {np.round(w.state, 3).tolist()}")

cons = construct_invariant_neighborhood(inst.W, inst.xprime, inst.target, h=0.01)
print(f"\nconstruction: d_bar={cons.d_bar:.3f}, w_bar={cons.w_bar:.4f}, "
      f"invariant disk radius={np.sqrt(cons.level):.4f}")
held = verify_forward_invariance(inst.inclusion, cons, n_starts=500, T=50.0,
                                 dt=1e-3, seed=0)
print(f"constructed neighborhood: {held.verdict} "
      f"({held.n_starts} starts x {len(held.policies)} policies)")
