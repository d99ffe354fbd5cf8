#!/usr/bin/env python3
"""Closed-form constants for the two scalar reference systems.

System 1 (mean dynamics): Xdot = -3 Y, Ydot = -3 X, X(0) = 1, Y(T) = 3 X(T).
General solution X = A e^{3t} + B e^{-3t}, Y = -(A e^{3t} - B e^{-3t}).
Boundary system: A + B = 1 and B = -2 A e^{6T}.

System 2 (mean dynamics): Xdot = Y, Ydot = -X, X(0) = 1, Y(T) = -X(T).
Solution X = cos t + c sin t, Y = -sin t + c cos t.  At T = 3*pi/4 the
terminal condition reads Y(T) + X(T) = sqrt(2)/2 * ((c - 1) + (1 - c)... ) --
expanded below; the c-terms cancel, leaving a constant gap: no solution.
"""
import numpy as np

T = 0.25
A = 1.0 / (1.0 - 2.0 * np.exp(6.0 * T))
B = -2.0 * A * np.exp(6.0 * T)


def X(t):
    return A * np.exp(3.0 * t) + B * np.exp(-3.0 * t)


def Y(t):
    return -(A * np.exp(3.0 * t) - B * np.exp(-3.0 * t))


print("system 1, T = 0.25")
print(f"  A        = {A:.17g}")
print(f"  B        = {B:.17g}")
print(f"  X(0)     = {X(0.0):.17g}   (must be 1)")
print(f"  Y(0)     = {Y(0.0):.17g}")
print(f"  X(T)     = {X(T):.17g}")
print(f"  Y(T)     = {Y(T):.17g}   (must equal 3 X(T) = {3*X(T):.17g})")
grid = np.linspace(0.0, T, 401)
print(f"  sup|X|   = {np.max(np.abs(X(grid))):.17g}")
print(f"  sup|Y|   = {np.max(np.abs(Y(grid))):.17g}")

# RK4 cross-check of the boundary-value constants via shooting.
def rk4_path(y0, n=4000):
    s = np.array([1.0, y0])
    dt = T / n
    def f(_, s):
        return np.array([-3.0 * s[1], -3.0 * s[0]])
    for i in range(n):
        t = i * dt
        k1 = f(t, s); k2 = f(t + dt/2, s + dt/2*k1)
        k3 = f(t + dt/2, s + dt/2*k2); k4 = f(t + dt, s + dt*k3)
        s = s + dt/6*(k1 + 2*k2 + 2*k3 + k4)
    return s

# gap(c) = Y(T; c) - 3 X(T; c) is affine in c; solve gap = 0.
g0 = rk4_path(0.0); g1 = rk4_path(1.0)
gap0 = g0[1] - 3.0 * g0[0]
gap1 = g1[1] - 3.0 * g1[0]
c_star = -gap0 / (gap1 - gap0)
print(f"  shooting Y(0) = {c_star:.17g}   (closed form {Y(0.0):.17g})")

print()
print("system 2, T = 3*pi/4")
T2 = 3.0 * np.pi / 4.0
# X = cos t + c sin t, Y = -sin t + c cos t
# Y(T) + X(T) = (cos T - sin T) + c (sin T + cos T); at T = 3pi/4:
# cos T = -sqrt(2)/2, sin T = sqrt(2)/2 -> c-coefficient vanishes and
# Y(T) + X(T) = -sqrt(2) independent of c.
for c in (0.0, 1.0, -3.0):
    XT = np.cos(T2) + c * np.sin(T2)
    YT = -np.sin(T2) + c * np.cos(T2)
    print(f"  c = {c:+.1f}: Y(T) + X(T) = {YT + XT:.17g}")
print(f"  irreducible gap |Y(T)+X(T)| = {np.sqrt(2.0):.17g}")
