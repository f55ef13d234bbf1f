# Kubo oscillator: plain Euler drifts off the circle, EulerP stays on it.
#
# The Kubo oscillator rotates a point in the plane by a random angle, so
# |x| never changes.  This script integrates one path with both methods and
# prints how far each strays from the initial energy I = |x|^2 / 2.

# %%
import numpy as np

from projsde import build_model, run_drift

model = build_model("kubo", a=1.0, sigma=1.0)
plain = run_drift(model, "euler", h=0.02, T=200.0, seed=7)
proj = run_drift(model, "eulerP", h=0.02, T=200.0, seed=7)

# %% energy error every 2000 steps
for n in range(0, len(plain.times), 2000):
    print(f"t={plain.times[n]:6.1f}   Euler {plain.combined[n]:.3e}   EulerP {proj.combined[n]:.3e}")

# %% radius of the final states
print("final radius, Euler :", np.linalg.norm(plain.states[-1]))
print("final radius, EulerP:", np.linalg.norm(proj.states[-1]))

# %% the midpoint rule already keeps quadratic invariants without projection
mid = run_drift(model, "mid", h=0.02, T=200.0, seed=7)
print("midpoint, max energy error:", mid.max_error)
