"""Fundamental DC power-flow matrices and the base-case power flow.

Notation follows the usual DC load-flow conventions:

    phi  (B x N)  signed branch-node incidence, +1 at the from end, -1 at the to end
    psi  (B x B)  diagonal of branch susceptances
    H    (N x N)  nodal susceptance phi.T @ psi @ phi
    X    (N x N)  inverse of H with the reference row and column eliminated
    ptdf (B x N)  psi @ phi @ X
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DisconnectedNetworkError, NetworkError
from .network import Network

PIVOT_RTOL = 1e-10


def build_connectivity(network: Network) -> np.ndarray:
    n, m = network.n_nodes, network.n_branches
    phi = np.zeros((m, n))
    for k, br in enumerate(network.branches):
        try:
            i = network.node_index[br.from_node]
            j = network.node_index[br.to_node]
        except KeyError as exc:
            raise NetworkError(f"branch {br.id} references unknown node {exc.args[0]}") from None
        phi[k, i] = 1.0
        phi[k, j] = -1.0
    return phi


def build_branch_susceptance(network: Network) -> np.ndarray:
    b = np.array([br.b for br in network.branches], dtype=float)
    if np.any(~(b > 0)):
        bad = [br.id for br in network.branches if not br.b > 0]
        raise NetworkError(f"nonpositive susceptance on branches {bad}")
    return np.diag(b)


def build_nodal_susceptance(phi: np.ndarray, psi: np.ndarray) -> np.ndarray:
    phi = np.asarray(phi, dtype=float)
    psi = np.asarray(psi, dtype=float)
    if psi.shape != (phi.shape[0], phi.shape[0]):
        raise ValueError(f"psi has shape {psi.shape}, expected {(phi.shape[0],) * 2}")
    return phi.T @ psi @ phi


def reduced_inverse(H: np.ndarray, ref: int) -> np.ndarray:
    """Inverse susceptance matrix with the reference node eliminated.

    The reference row and column are zeroed, a unit pivot is placed on the
    diagonal, the result is inverted and the reference diagonal entry reset to
    zero. The factorization is LU with partial pivoting; a pivot smaller than
    ``PIVOT_RTOL`` times the largest one means the grid is not connected.

    Raises
    ------
    DisconnectedNetworkError
        If the reduced matrix is singular.
    """
    Hr = np.array(H, dtype=float, copy=True)
    n = Hr.shape[0]
    if Hr.shape != (n, n):
        raise ValueError("H must be square")
    Hr[:, ref] = 0.0
    Hr[ref, :] = 0.0
    Hr[ref, ref] = 1.0
    # the unit pivot at ref is scaled so it never masks a genuinely tiny pivot
    scale = max(float(np.max(np.abs(np.diag(Hr)))), 1.0)
    Hr[ref, ref] = scale
    with warnings.catch_warnings():
        # an exactly singular pivot is reported below as a disconnected grid
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(Hr, check_finite=False)
    pivots = np.abs(np.diag(lu))
    if pivots.min() < PIVOT_RTOL * pivots.max():
        raise DisconnectedNetworkError("reduced susceptance matrix is singular: network is disconnected")
    X = sla.lu_solve((lu, piv), np.eye(n), check_finite=False)
    X[ref, :] = 0.0
    X[:, ref] = 0.0
    return 0.5 * (X + X.T)


def solve_angles(X: np.ndarray, P: np.ndarray) -> np.ndarray:
    return np.asarray(X) @ np.asarray(P, dtype=float)


def branch_flows(psi: np.ndarray, phi: np.ndarray, theta: np.ndarray) -> np.ndarray:
    return psi @ (phi @ np.asarray(theta, dtype=float))


def ptdf(psi: np.ndarray, phi: np.ndarray, X: np.ndarray) -> np.ndarray:
    return psi @ (phi @ X)


@dataclass(frozen=True)
class GridMatrices:
    """The matrix set of one network, built once and shared read-only."""

    phi: np.ndarray
    psi: np.ndarray
    H: np.ndarray
    X: np.ndarray
    ref: int

    @classmethod
    def from_network(cls, network: Network) -> "GridMatrices":
        phi = build_connectivity(network)
        psi = build_branch_susceptance(network)
        H = build_nodal_susceptance(phi, psi)
        X = reduced_inverse(H, network.ref_index)
        for arr in (phi, psi, H, X):
            arr.setflags(write=False)
        return cls(phi=phi, psi=psi, H=H, X=X, ref=network.ref_index)

    @property
    def b(self) -> np.ndarray:
        return np.diag(self.psi)

    def angles(self, P) -> np.ndarray:
        return solve_angles(self.X, P)

    def flows(self, theta) -> np.ndarray:
        return branch_flows(self.psi, self.phi, theta)

    def ptdf(self) -> np.ndarray:
        return ptdf(self.psi, self.phi, self.X)


def dc_power_flow(network: Network, P) -> tuple:
    """Base-case angles and branch flows for nodal injections ``P``."""
    mats = GridMatrices.from_network(network)
    theta = mats.angles(P)
    return theta, mats.flows(theta)
