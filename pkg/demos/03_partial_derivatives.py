"""
Optimizing with some derivatives known
======================================

The same Rosenbrock problem is solved with no derivatives, with the x1
derivatives only, and with everything.  Cost is counted in distinct oracle
requests divided by n + 1.
"""
import numpy as np

from bdfo.oracle import Mask, get_problem
from bdfo.solver import SolverParams, hermite_solve, solve

p = get_problem("rosenbrock2")
params = SolverParams(budget=500)

for known in ([], [0], [0, 1]):
    mask = Mask.from_known(p.n, known)
    for name, fn in (("birkhoff", solve), ("hermite", hermite_solve)):
        hit = []

        def watch(r):
            if not hit and np.linalg.norm(p.grad(np.array(r.x))) <= 1e-4:
                hit.append(r.distinct / (p.n + 1))

        res = fn(p, mask, params=params, callback=watch)
        first = f"{hit[0]:6.1f}" if hit else "   n/a"
        print(f"K={str(known):7} {name:9} units to |grad|<=1e-4: {first}  "
              f"final f={res.f_final:.2e}  ({res.termination})")

# each accepted step lowers f and the radius never passes its cap
res = solve(p, Mask.from_known(p.n, [0]), params=params)
fs = [r.f for r in res.trace]
print("monotone:", all(b <= a for a, b in zip(fs, fs[1:])), " max radius:", max(r.delta for r in res.trace))
