"""
Error rates of fully quadratic models
=====================================

Shrinking a poised template around a point should shrink the value, gradient
and Hessian errors like Delta^3, Delta^2 and Delta.  The theoretical
constants give bounds that hold at every radius.
"""
import sys

import numpy as np

from bdfo.bench import default_template, scan_function
from bdfo.bounds import constants, error_scan, write_scan_csv

template = default_template(2)
print(template)

f, grad, hess, lip = scan_function("exp1", 2)
deltas = [0.1 / 2**k for k in range(6)]
rows = error_scan(f, grad, hess, template, deltas, center=np.array([0.3, -0.2]), lipschitz=lip, samples=3000)
write_scan_csv(rows, sys.stdout, label="function=exp1")

for a, b in zip(rows, rows[1:]):
    print("ratios  %.2f  %.2f  %.2f" % (a.err_f / b.err_f, a.err_g / b.err_g, a.err_h / b.err_h))

k = constants(template, 1.0)
print(f"kappa_ef={k.kappa_ef:.2f} kappa_eg={k.kappa_eg:.2f} kappa_eh={k.kappa_eh:.2f} per unit L")
