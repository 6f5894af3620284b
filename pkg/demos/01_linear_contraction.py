"""Construct a forward-invariant neighborhood for the planar linear pull.

The state space is the box [-1,1]^2, the target is the origin, the candidate
neighborhood is the open unit ball, and W = |x|^2 decays at rate -2|x|^2
under xdot = -x. Every quantity below has a closed form, so this is the
toolkit's sanity anchor:

    escape distance d_bar = 1         (complement of the ball to the origin)
    annulus minimum w_bar = 0.25      (min of |x|^2 over 0.5 <= |x| <= 1)
    level = w_bar / 2 = 0.125         (sublevel threshold)
    invariant neighborhood radius = sqrt(0.125) ~ 0.3536
"""

import numpy as np

from basincert import certify, construct_invariant_neighborhood
from basincert.instances import make_instance

inst = make_instance("linear2d", n_starts_inv=60, T_inv=10.0)

cons = construct_invariant_neighborhood(inst.W, inst.xprime, inst.target, h=0.01)
print("escape distance d_bar :", cons.d_bar)
print("annulus minimum w_bar :", cons.w_bar)
print("sublevel threshold    :", cons.level)
print("neighborhood radius   :", np.sqrt(cons.level))

cert = certify(inst)
print("\nhypotheses:", {k: v.status for k, v in cert.hypotheses.items()})
print("invariance:", cert.invariance.verdict)
print("monotone decrease:", cert.decrease.status)
print("convergence:", cert.convergence.status,
      "(worst terminal distance "
      f"{cert.convergence.details['worst_final_distance']:.2e})")
print("\noverall:", cert.overall, "->", cert.claim)
