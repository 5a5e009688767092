"""CODATA 2018 constants in SI units."""

import math

HBAR = 1.054571817e-34
E_CHARGE = 1.602176634e-19
EPS0 = 8.8541878128e-12
AMU = 1.66053906660e-27
COULOMB_K = E_CHARGE**2 / (4 * math.pi * EPS0)  # e^2/(4 pi eps0), J m

BA138_MASS_U = 138.0
TWO_PI = 2 * math.pi
MHZ = TWO_PI * 1e6  # cyclic MHz -> angular s^-1

# 138Ba+ transition wavelengths (vacuum), m
WAVELENGTHS = {"493": 493.545e-9, "650": 649.869e-9, "1762": 1762.17e-9}

# P1/2 decay: total rate and branching into S1/2 (493 nm); remainder goes to D3/2
P_DECAY_RATE_MHZ = 20.1
P_BRANCHING_S = 0.756
