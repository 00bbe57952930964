"""
Interval arithmetic and verified zeros
======================================

"""

# every operation rounds outward, so the exact result is always enclosed
from fractions import Fraction

import numpy as np

from homoclinic.interval import Interval, interval, mat_inverse, mat_mul
from homoclinic.linalg import verify_zero

third = interval(1) / interval(3)
print("1/3 in", third)
print("exact value enclosed:", Fraction(float(third.lo)) <= Fraction(1, 3) <= Fraction(float(third.hi)))

# dependency: x*x over [-1,1] is not the same as x**2
x = interval(-1, 1)
print("x*x  =", x * x)

# an enclosure of an inverse matrix, checked by multiplying back
A = np.array([[4.0, 1.0], [2.0, 3.0]])
Ainv = mat_inverse(Interval(A))
print("A * inv(A) contains I:", mat_mul(Interval(A), Ainv).contains(np.eye(2)))

# interval Newton: sqrt(2) is the unique zero of x^2 - 2 in the returned box
res = verify_zero(lambda X: X * X - Interval(2.0), lambda X: (X * Interval(2.0)).reshape(1, 1), np.array([1.4]))
print("verified:", res.verified, " enclosure:", res.enclosure)
