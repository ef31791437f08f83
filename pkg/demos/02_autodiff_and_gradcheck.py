"""Tour of the numeric kernel: building expressions, backpropagating, and
verifying every gradient against central differences."""

import numpy as np

from semgraph import autodiff as ad
from semgraph.gradsuite import run_full_suite

# Forward/backward on a tiny expression: loss = mean((relu(x W) - y)^2)
rng = np.random.default_rng(1)
x = ad.constant(rng.normal(size=(4, 3)))
w = ad.param(rng.normal(size=(3, 2)))
y = ad.constant(rng.normal(size=(4, 2)))
loss = ad.mean_squared_error(ad.relu(ad.matmul(x, w)), y)
ad.backward(loss)
print("loss:", loss.item())
print("dloss/dW:\n", w.grad)

# grad_check sweeps every coordinate with central differences and reports the
# worst relative error; coordinates at relu-style kinks are excluded, not failed.
w2 = ad.param(np.array([0.0, 1.0, -1.0]))
result = ad.grad_check(
    lambda p: ad.matmul(ad.relu(p), ad.constant(np.ones(3))), [w2]
)
print("\nmax relative error:", result.max_rel_error)
print("kink coordinates excluded:", result.excluded)

# The full suite: every primitive plus the complete pair-task model.
print("\nfull gradient suite:")
for name, err, checked, excluded, ok in run_full_suite(tol=1e-5):
    print(f"  {name:<20s} {err:.2e}  ({checked} coords, {excluded} excluded)  "
          f"{'ok' if ok else 'FAIL'}")
