"""Population games as certification instances.

A game with payoff F(x) = c - x (a shifted negative-identity matrix game)
is strictly self-defeating: any tangent deviation z lowers its own payoff,
z.DF(x)z = -|z|^2. Its unique equilibrium sits at c, located here by an
independent brute-force regret scan, never by trusting a dynamic. The
aggregate-gains candidate for the Smith (pairwise comparison) dynamic then
passes the full certificate, including an explicitly forward-invariant
sublevel neighborhood on the simplex.

Rock-paper-scissors is the neutral boundary case: the tangent form vanishes
identically, and the best-response velocity set at the uniform point has
all three vertices as extremes.
"""

import numpy as np

from basincert import (
    DynamicSpec,
    WholeDomain,
    builtin_game,
    certify,
    check_self_defeating,
    find_nash_brute,
    gains_lyapunov_candidates,
    make_inclusion,
)
from basincert.instances import make_instance

game = builtin_game("neg_identity")
sd = check_self_defeating(game, WholeDomain(game.domain), h=0.02)
print("self-defeating externality:", sd.status,
      f"(worst tangent form value {sd.details['worst_value']:+.3f})")

eq, residual = find_nash_brute(game, h=0.01)
print("oracle equilibrium:", np.round(eq, 4).tolist(), f"(regret {residual:.1e})")

W, W_tilde = gains_lyapunov_candidates(game, DynamicSpec("smith"))
print("gains candidate at equilibrium: W =", W(eq), " decay =", W_tilde(eq))

inst = make_instance("smith_negdef", n_starts_inv=60, T_inv=10.0, n_starts_traj=6)
cert = certify(inst)
print("\nsmith certificate:", cert.overall)
print("  constructed d_bar:", round(cert.construction.d_bar, 4),
      " w_bar:", round(cert.construction.w_bar, 6))
print("  convergence to the oracle equilibrium:",
      f"{cert.convergence.details['worst_final_distance']:.2e} by T="
      f"{cert.convergence.details['T']}")

rps = builtin_game("rps")
sd_rps = check_self_defeating(rps, WholeDomain(rps.domain), h=0.02, n_random_dirs=200)
print("\nrps tangent form: worst value", f"{sd_rps.details['worst_value']:.1e}",
      "(zero-sum: exactly neutral)")
br = make_inclusion(rps, DynamicSpec("br"))
vels = br.velocities_at(np.ones(3) / 3)
print("best-response extremes at the uniform tie:", len(vels))
