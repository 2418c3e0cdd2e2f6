"""Shared test helpers: finite-difference oracles and random admissible states."""

import numpy as np

from lagflow.assembly import LagrangianState, mm_objective, residual


def fd_gradient(f, positions, step=1e-6):
    """Central finite differences of a scalar function of node positions."""
    g = np.zeros_like(positions)
    for l in range(positions.shape[0]):
        for c in range(2):
            p = positions.copy()
            p[l, c] += step
            fp = f(p)
            p[l, c] -= 2 * step
            fm = f(p)
            g[l, c] = (fp - fm) / (2 * step)
    return g


def fd_objective_gradient(state, prev, tau, mesh, ref, model, quadrature, step=1e-6):
    def f(pos):
        return mm_objective(LagrangianState(pos), prev, tau, mesh, ref, model, quadrature)

    return fd_gradient(f, state.positions, step)


def fd_residual_jacobian(state, prev, tau, mesh, ref, model, quadrature, step=1e-6):
    """Dense (2L, 2L) central-difference Jacobian of the projected residual."""
    L = mesh.n_nodes
    J = np.zeros((2 * L, 2 * L))
    for l in range(L):
        for c in range(2):
            p = state.positions.copy()
            p[l, c] += step
            Zp = residual(LagrangianState(p), prev, tau, mesh, ref, model, quadrature)
            p[l, c] -= 2 * step
            Zm = residual(LagrangianState(p), prev, tau, mesh, ref, model, quadrature)
            J[:, 2 * l + c] = ((Zp - Zm) / (2 * step)).ravel()
    return J


def random_admissible_state(mesh, rng, scale=0.05, time=0.0):
    """Identity plus a small random perturbation that keeps all dets positive."""
    for _ in range(50):
        pos = mesh.nodes + scale * rng.normal(size=mesh.nodes.shape)
        if np.all(mesh.signed_dets(pos) > 0.0):
            return LagrangianState(pos, time)
        scale *= 0.6
    raise RuntimeError("could not sample an admissible state")
