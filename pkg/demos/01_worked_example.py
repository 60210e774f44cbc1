"""
A three-condition model in one dimension
========================================

Values at 0 and 1 plus a slope at 1 determine a quadratic.  We build the
normalized system, read off the Birkhoff polynomials, and measure how well
poised the data are.
"""
import numpy as np

from bdfo import AvailableSet, DataSet, Datum, birkhoff_polynomials, poisedness_report, solve_model
from bdfo.interp import build_normalized

D = DataSet([Datum([0.0], [0]), Datum([1.0], [0]), Datum([1.0], [1])])

# rows are basis derivatives at the normalized points
print(build_normalized(D).Mhat)

# f(x) = x^2 gives rhs [f(0), f(1), f'(1)] and is reproduced exactly
m = solve_model(D, [0.0, 1.0, 2.0])
print("model of x^2:", m.c, m.g, m.H)

# f(x) = x^3 is not; the model is the unique quadratic with the same data
m = solve_model(D, [0.0, 1.0, 3.0])
print("model of x^3:", m.c, m.g, m.H)

# each column is one polynomial in the basis [1, x, x^2/2]
polys = birkhoff_polynomials(D)
for x in (-1.0, 0.0, 0.5, 1.0):
    print(x, polys.evaluate([x]).round(4))

# values and first derivatives are available on B(0, 1)
A = AvailableSet([(0,), (1,)], 1)
r = poisedness_report(D, A, 1.0)
print(f"Lambda = {r.lambda_:.4f}  ||Mhat^-1|| = {r.inv_norm:.4f}  |det| = {r.det_abs:.4f}")
print("Lambda * 4 (q+1) bounds the inverse norm:", r.inv_norm <= r.converse_constant * r.lambda_)
