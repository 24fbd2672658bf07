"""Stealthiness analysis: matrix pencils, zero-dynamics directions, kernels.

An injected input is stealthy when some initial-condition/input pair zeroes
every cooperative measurement; mode by mode that happens exactly on the rank
deficiencies of the pencil P(lambda) = [[lambda I - A, -B], [C, 0]].  Under
switching, stealth requires a direction in the kernel of *every* active
mode's pencil, so stacking the pencils and checking the joint nullspace at
sampled lambda decides whether a generic stealthy input can exist.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .dynamics import Gains, closed_loop_matrix
from .graphs import RANK_RTOL, Graph, khop_neighbors

PENCIL_RESIDUAL_TOL = 1e-8


def _member_set(g: Graph, owner: int, one_hop_only: bool) -> tuple:
    one = sorted(khop_neighbors(g, owner, 1))
    if one_hop_only:
        return (owner, *one)
    extra = sorted(khop_neighbors(g, owner, 2) - {owner} - set(one))
    return (owner, *one, *extra)


def collective_measurement_matrix(
    g: Graph, malicious, one_hop_only: bool = False
) -> np.ndarray:
    """Stacked measurement rows of all cooperative agents, in global
    coordinates col(p~, v): each cooperative agent contributes the positions
    of its 2-hop members plus its own velocity."""
    n = g.node_count
    malicious = set(malicious)
    rows = []
    for i in sorted(set(range(n)) - malicious):
        for j in _member_set(g, i, one_hop_only):
            row = np.zeros(2 * n)
            row[j] = 1.0
            rows.append(row)
        row = np.zeros(2 * n)
        row[n + i] = 1.0
        rows.append(row)
    return np.array(rows)


def attack_input_matrix(n: int, malicious) -> np.ndarray:
    b = np.zeros((2 * n, len(tuple(malicious))))
    for k, a in enumerate(sorted(malicious)):
        b[n + a, k] = 1.0
    return b


def pencil_matrix(
    g: Graph, suspected, gains: Gains, lam: complex, one_hop_only: bool = False
) -> np.ndarray:
    """Single-mode pencil [[lambda I - A, -B], [C, 0]]."""
    n = g.node_count
    a = closed_loop_matrix(g, gains)
    b = attack_input_matrix(n, suspected)
    c = collective_measurement_matrix(g, suspected, one_hop_only)
    top = np.hstack([lam * np.eye(2 * n) - a, -b])
    bottom = np.hstack([c, np.zeros((c.shape[0], b.shape[1]))])
    return np.vstack([top.astype(complex), bottom.astype(complex)])


def kernel_basis(mat: np.ndarray, rtol: float = RANK_RTOL) -> np.ndarray:
    """Orthonormal nullspace basis from the SVD (columns; empty when trivial)."""
    u, sv, vh = np.linalg.svd(mat, full_matrices=True)
    if sv.size == 0:
        return np.eye(mat.shape[1])
    tol = max(mat.shape) * sv[0] * rtol
    rank = int(np.sum(sv > tol))
    return vh[rank:].conj().T


@dataclass(frozen=True, eq=False)
class PencilKernelReport:
    lambdas: tuple
    kernel_dims: tuple
    bases: tuple  # one (2N+|A|, dim) array per lambda

    @property
    def all_empty(self) -> bool:
        return all(d == 0 for d in self.kernel_dims)

    def to_dict(self) -> dict:
        """Flat document: lambda samples, kernel dimensions, basis norms."""
        return {
            "lambda_real": [float(l.real) for l in self.lambdas],
            "lambda_imag": [float(l.imag) for l in self.lambdas],
            "kernel_dims": [int(d) for d in self.kernel_dims],
            "basis_norms": [
                float(np.linalg.norm(b)) if b.size else 0.0 for b in self.bases
            ],
            "all_empty": self.all_empty,
        }


def sample_lambdas(modes, gains: Gains, n_samples: int = 20, seed: int = 0) -> tuple:
    """Seeded complex probes with real parts in [-5, 5], plus every mode's
    closed-loop eigenvalues (the candidate invariant zeros)."""
    rng = np.random.default_rng(seed)
    pts = [
        complex(re, im)
        for re, im in zip(
            rng.uniform(-5.0, 5.0, n_samples), rng.uniform(-5.0, 5.0, n_samples)
        )
    ]
    for g in modes:
        pts.extend(complex(z) for z in np.linalg.eigvals(closed_loop_matrix(g, gains)))
    return tuple(pts)


def stealth_pencil_kernel(
    modes,
    suspected,
    gains: Gains,
    lambdas=None,
    n_samples: int = 20,
    seed: int = 0,
    one_hop_only: bool = False,
) -> PencilKernelReport:
    """Joint kernel of the stacked mode pencils at each sampled lambda.

    An empty kernel at (almost) all lambda rules out generic stealthy inputs
    from the suspected set across the supplied modes.
    """
    suspected = tuple(sorted(set(suspected)))
    if not suspected:
        raise ValueError("suspected set must be nonempty")
    modes = tuple(modes)
    if lambdas is None:
        lambdas = sample_lambdas(modes, gains, n_samples, seed)
    dims, bases = [], []
    for lam in lambdas:
        stacked = np.vstack(
            [pencil_matrix(g, suspected, gains, lam, one_hop_only) for g in modes]
        )
        basis = kernel_basis(stacked)
        dims.append(basis.shape[1])
        bases.append(basis)
    return PencilKernelReport(
        lambdas=tuple(lambdas), kernel_dims=tuple(dims), bases=tuple(bases)
    )


@dataclass(frozen=True, eq=False)
class ZeroDynamics:
    """Output-zeroing direction: P(lam) @ col(x0, u0) = 0 to within residual."""

    lam: complex
    x0: np.ndarray
    u0: np.ndarray
    residual: float


def _verify_zero(g, suspected, gains, lam, one_hop_only) -> ZeroDynamics | None:
    p = pencil_matrix(g, suspected, gains, lam, one_hop_only)
    basis = kernel_basis(p)
    if basis.shape[1] == 0:
        return None
    vec = basis[:, 0]
    vec = vec / np.linalg.norm(vec)
    residual = float(np.linalg.norm(p @ vec))
    if residual > PENCIL_RESIDUAL_TOL:
        return None
    n2 = p.shape[1] - len(tuple(suspected))
    return ZeroDynamics(lam=lam, x0=vec[:n2], u0=vec[n2:], residual=residual)


def zero_dynamics_search(
    g: Graph,
    suspected,
    gains: Gains,
    seed: int = 0,
    n_probes: int = 20,
    one_hop_only: bool = False,
) -> ZeroDynamics | None:
    """Scan a single static mode for an invariant zero of its pencil.

    Random probes catch degenerate (normal-rank-deficient) pencils; isolated
    zeros come from a randomly projected generalized eigenvalue problem whose
    candidates are verified against the full pencil.
    """
    suspected = tuple(sorted(set(suspected)))
    if not suspected:
        raise ValueError("suspected set must be nonempty")
    rng = np.random.default_rng(seed)
    for _ in range(n_probes):
        lam = complex(rng.uniform(-5, 5), rng.uniform(-5, 5))
        found = _verify_zero(g, suspected, gains, lam, one_hop_only)
        if found is not None:
            return found
    n = g.node_count
    a = closed_loop_matrix(g, gains)
    candidates = [complex(z) for z in np.linalg.eigvals(a)]
    # random square projection of the rectangular pencil lam*E - G; spurious
    # eigenvalues are weeded out by verifying against the full pencil
    b = attack_input_matrix(n, suspected)
    c = collective_measurement_matrix(g, suspected, one_hop_only)
    rows = 2 * n + c.shape[0]
    cols = 2 * n + b.shape[1]
    e_mat = np.zeros((rows, cols))
    e_mat[: 2 * n, : 2 * n] = np.eye(2 * n)
    g_mat = np.zeros((rows, cols))
    g_mat[: 2 * n, : 2 * n] = a
    g_mat[: 2 * n, 2 * n :] = b
    g_mat[2 * n :, : 2 * n] = -c
    for _ in range(3):
        w = rng.standard_normal((cols, rows))
        try:
            vals = scipy.linalg.eig(w @ g_mat, w @ e_mat, right=False)
        except (np.linalg.LinAlgError, ValueError):
            continue
        candidates.extend(complex(z) for z in vals if np.isfinite(z))
    for lam in candidates:
        found = _verify_zero(g, suspected, gains, lam, one_hop_only)
        if found is not None:
            return found
    return None


def measurement_kernel(modes, malicious, one_hop_only: bool = False) -> np.ndarray:
    """Joint nullspace of the cooperative measurement maps across modes."""
    stacked = np.vstack(
        [collective_measurement_matrix(g, malicious, one_hop_only) for g in modes]
    )
    return kernel_basis(stacked)


def malicious_velocity_span(n: int, malicious) -> np.ndarray:
    """span{ col(0_N, e_i) : i malicious } -- the states no cooperative agent
    ever measures."""
    basis = np.zeros((2 * n, len(tuple(malicious))))
    for k, a in enumerate(sorted(malicious)):
        basis[n + a, k] = 1.0
    return basis


def subspace_distance(b1: np.ndarray, b2: np.ndarray) -> float:
    """Spectral distance between the projectors onto the column spans."""

    def projector(b):
        if b.size == 0:
            return np.zeros((b.shape[0], b.shape[0]))
        q, _ = np.linalg.qr(b)
        return q @ q.conj().T

    return float(np.linalg.norm(projector(b1) - projector(b2), 2))


def coupling_bound(
    t: float,
    t0: float,
    alpha: float,
    kappa_x: float,
    lambda_x: float,
    kappa_u: float,
    x0_norm: float,
    u_sup: float = 0.0,
) -> float:
    """Upper bound on the unknown coupling into a 2-hop subsystem:
    alpha kappa_x e^{-lambda_x (t-t0)} |x0| + alpha kappa_u sup|u_A|."""
    return alpha * kappa_x * np.exp(-lambda_x * (t - t0)) * x0_norm + alpha * kappa_u * u_sup
