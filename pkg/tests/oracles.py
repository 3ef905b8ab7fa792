"""Independent scalar oracles for single-Fourier-mode problems.

The 2D solvers act diagonally on Fourier modes of the grid when the
diffusivity is constant, so one scalar recursion per mode predicts the full
field.  These helpers re-derive that recursion from scratch (discrete
integrating factor, geometric sums); they share no code with the solver.
"""

import numpy as np


def mode_symbols(n: int) -> tuple[float, float]:
    """(s_h, d_h) for the lowest mode: s_h is the eigenvalue of the negated
    five-point Laplacian on cos(2 pi x1), d_h the factor by which the face
    divergence maps a sin(2 pi x1) face profile to cos(2 pi x1) at nodes."""
    h = 1.0 / n
    s_h = 2.0 * (1.0 - np.cos(2.0 * np.pi * h)) / h ** 2
    d_h = 2.0 * np.sin(np.pi * h) / h
    return s_h, d_h


def periodic_mode_solution(n_theta: int, s_h: float, source_at_end) -> np.ndarray:
    """Periodic solution of the backward-Euler mode recursion.

    Recursion: (1 + dtheta*s_h) p[k+1] = p[k] + dtheta*f[k+1], 1-periodic.
    ``source_at_end[k]`` is f evaluated at phase (k+1)/n_theta.  Returns the
    samples p[0..n_theta-1] at phases k/n_theta, obtained by the discrete
    integrating factor r**(-k) with r = 1/(1 + dtheta*s_h).
    """
    N = n_theta
    dtheta = 1.0 / N
    r = 1.0 / (1.0 + dtheta * s_h)
    f = np.asarray(source_at_end, dtype=float)
    acc = 0.0
    for j in range(1, N + 1):
        acc += r ** (N + 1 - j) * f[j - 1]
    p0 = dtheta * acc / (1.0 - r ** N)
    p = np.empty(N)
    p[0] = p0
    for k in range(N - 1):
        p[k + 1] = r * (p[k] + dtheta * f[k])
    return p


def transient_mode_solution(p_init: float, nsteps: int, n_theta: int,
                            s_h: float, source_at_end) -> np.ndarray:
    """Initial-value counterpart of the mode recursion over ``nsteps`` steps;
    the source repeats with period n_theta.  Returns p[0..nsteps]."""
    dtheta = 1.0 / n_theta
    r = 1.0 / (1.0 + dtheta * s_h)
    f = np.asarray(source_at_end, dtype=float)
    p = np.empty(nsteps + 1)
    p[0] = p_init
    for k in range(nsteps):
        p[k + 1] = r * (p[k] + dtheta * f[k % n_theta])
    return p


def continuous_periodic_mode(s_h: float, d_h: float, thetas) -> np.ndarray:
    """Exact-in-phase periodic solution of p' + s_h p = d_h cos(2 pi theta),
    for cross-checking the O(dtheta) bias of the discrete recursion."""
    th = np.asarray(thetas, dtype=float)
    denom = s_h ** 2 + 4.0 * np.pi ** 2
    return d_h * (s_h * np.cos(2 * np.pi * th) + 2 * np.pi * np.sin(2 * np.pi * th)) / denom
