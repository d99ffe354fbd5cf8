#!/usr/bin/env python3
"""High-accuracy reference values for the two Riccati systems at the
registry instances, via scipy's adaptive integrator and the corrected
closed forms.  The printed numbers are frozen into the C++ unit tests.
"""
import numpy as np
from scipy.integrate import solve_ivp

# ---------------------------------------------------------------- portfolio
# rho=0.05, mu=0.30, sigma=0.40, eta=0.2e, one mark at 1.0 weight 1,
# a=1, beta=0.10, beta~=0.05, alpha=alpha~=0, T=1.
rho, mu, sg = 0.05, 0.30, 0.40
eta, lam = 0.20, 1.0
a_, beta_sum = 1.0, 0.15
al = 0.0
T = 1.0
Lam = sg * sg + eta * eta * lam
chi = (mu - rho) ** 2 / Lam


def p(t):
    return np.exp(-beta_sum * t)


def rhs(t, s):
    return [-(2 * rho - chi) * s[0],
            -(rho - chi) * s[1] + al * rho * rho - chi * p(t)]


psiT = -a_ - al * p(T)
sol = solve_ivp(rhs, [T, 0.0], [1.0, psiT], rtol=1e-12, atol=1e-14,
                dense_output=True)
phi0, psi0 = sol.sol(0.0)
phi_half, psi_half = sol.sol(0.5)
print("portfolio registry instance")
print(f"  Lambda    = {Lam:.17g}")
print(f"  chi       = {chi:.17g}")
print(f"  phi(0)    = {phi0:.17g}")
print(f"  phi(0.5)  = {phi_half:.17g}")
print(f"  psi(0)    = {psi0:.17g}")
print(f"  psi(0.5)  = {psi_half:.17g}")
# closed forms: phi(t) = exp((2 rho - chi)(T - t));
# psi(t) = psiT e^{A(T-t)} + int_t^T (chi p - al rho^2) e^{A(s-t)} ds, A=rho-chi
print(f"  phi(0) cf = {np.exp((2*rho-chi)*T):.17g}")
A = rho - chi
from scipy.integrate import quad
for t in (0.0, 0.5):
    intg, _ = quad(lambda s: (chi * p(s) - al * rho * rho) * np.exp(A * (s - t)),
                   t, T, epsabs=1e-15, epsrel=1e-13)
    print(f"  psi({t}) cf = {psiT*np.exp(A*(T-t)) + intg:.17g}")
# candidate feedback at (t=0, x=1):
u0 = (mu - rho) * (-phi0 * 1.0 - psi0 + p(0.0)) / (phi0 * Lam)
print(f"  u(0, x=1) = {u0:.17g}")

# ---------------------------------------------------------------------- lq
# a=-0.5, a~=0, b=0.2, B=1, c=c~=0, l=l~=0, D=0.5, L(e)=0.3e,
# R=N=Q=1, x0=1, one mark at 1.0 weight 1, T=1.
a, at, b, B = -0.5, 0.0, 0.2, 1.0
c, ct, l, lt, D = 0.0, 0.0, 0.0, 0.0, 0.5
L_, R, N, Q, x0 = 0.3, 1.0, 1.0, 1.0, 1.0
Lam2 = B * B + L_ * L_ * lam
kappa = 2 * a + b * b - b * b * B * B / Lam2
print("\nlq registry instance")
print(f"  Lambda    = {Lam2:.17g}")
print(f"  kappa     = {kappa:.17g}")
print(f"  phi(0) cf = {(N + R/kappa)*np.exp(kappa*T) - R/kappa:.17g}")


def lq_paths(y0):
    def p2(t):
        return -Q * y0 * np.exp((l + lt) * t)

    def rhs2(t, s):
        src = c + ct - b * B * D / Lam2
        return [-kappa * s[0] - R,
                -2 * (a + at) * s[1] - 2 * at * s[0],
                -(a + at) * s[2] + src * p2(t)]

    s = solve_ivp(rhs2, [T, 0.0], [N, 0.0, -p2(T)], rtol=1e-12, atol=1e-14,
                  dense_output=True)
    return s.sol, p2


# deterministic mean fixed point: Xm' = (a+at) Xm; ubar = (p D - B b phi Xm)
# / (Lam phi); Ym' = -[(c+ct) Xm + (l+lt) Ym + D ubar], Ym(T) = Xm(T).
def mean_y0(y0, n=20000):
    solfn, p2 = lq_paths(y0)
    dtau = T / n
    # forward mean
    Xm = np.empty(n + 1)
    Xm[0] = x0
    for i in range(n):
        # RK4 for xdot = (a+at) x
        def fx(x):
            return (a + at) * x
        x = Xm[i]
        k1 = fx(x); k2 = fx(x + dtau/2*k1); k3 = fx(x + dtau/2*k2)
        k4 = fx(x + dtau*k3)
        Xm[i+1] = x + dtau/6*(k1+2*k2+2*k3+k4)
    # backward mean with RK4
    def fy(t, y):
        phi = solfn(t)[0]
        Xm_t = x0 * np.exp((a + at) * t)
        ub = (p2(t) * D - B * b * phi * Xm_t) / (Lam2 * phi)
        return -((c + ct) * Xm_t + (l + lt) * y + D * ub)
    y = Xm[n]
    for i in range(n, 0, -1):
        t = i * dtau
        k1 = fy(t, y); k2 = fy(t - dtau/2, y - dtau/2*k1)
        k3 = fy(t - dtau/2, y - dtau/2*k2); k4 = fy(t - dtau, y - dtau*k3)
        y = y - dtau/6*(k1+2*k2+2*k3+k4)
    return y


r0 = mean_y0(0.0)
r1 = mean_y0(1.0)
slope = r1 - r0
y0_star = r0 / (1.0 - slope)
print(f"  update(0) = {r0:.17g}")
print(f"  slope     = {slope:.17g}")
print(f"  y0*       = {y0_star:.17g}")
print(f"  fp check  = {mean_y0(y0_star):.17g}")

solfn, p2 = lq_paths(y0_star)
for t in (0.0, 0.5):
    phi, psi, th = solfn(t)
    print(f"  at t={t}: phi = {phi:.17g}, psi = {psi:.17g}, theta = {th:.17g}")
print(f"  p(0)      = {p2(0.0):.17g}")
print(f"  u(0, x=1) = {(p2(0.0)*D - B*b*solfn(0.0)[0]*1.0)/(Lam2*solfn(0.0)[0]):.17g}")
