"""Seeded random states / channels / POVMs for tests and demos."""

from __future__ import annotations

import numpy as np

from .channels import Channel, Isometry
from .registers import RegisterSpace, State, ket_state


def rng_from(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _ginibre(rng, rows, cols):
    return rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))


def random_pure(space: RegisterSpace, seed=None) -> State:
    rng = rng_from(seed)
    v = _ginibre(rng, space.dim, 1).ravel()
    return ket_state(v / np.linalg.norm(v), space)


def random_density(space: RegisterSpace, seed=None, rank: int | None = None) -> State:
    """Normalized Wishart state ``G G* / tr`` with optional rank restriction."""
    rng = rng_from(seed)
    d = space.dim
    r = d if rank is None else int(rank)
    G = _ginibre(rng, d, r)
    M = G @ G.conj().T
    return State(M / np.real(np.trace(M)), space, check=False)


def random_isometry(in_dim: int, out_dim: int, seed=None) -> np.ndarray:
    """Haar-random isometry (out_dim x in_dim), out_dim >= in_dim."""
    rng = rng_from(seed)
    if out_dim < in_dim:
        raise ValueError("out_dim must be >= in_dim")
    G = _ginibre(rng, out_dim, in_dim)
    Q, R = np.linalg.qr(G)
    # fix phases so the factorization is unique
    ph = np.diag(R).copy()
    ph[np.abs(ph) < 1e-300] = 1.0
    return Q * (ph / np.abs(ph))


def random_channel(in_space: RegisterSpace, out_space: RegisterSpace,
                   seed=None, kraus_rank: int | None = None) -> Channel:
    """Haar channel from a random Stinespring isometry."""
    rng = rng_from(seed)
    din, dout = in_space.dim, out_space.dim
    k = kraus_rank if kraus_rank is not None else din * dout
    k = max(k, int(np.ceil(din / dout)))
    V = random_isometry(din, dout * k, rng)
    # V rows are blocked as (out basis, env basis); one Kraus slice per env index
    ks = [V.reshape(dout, k, din)[:, j, :] for j in range(k)]
    return Channel(ks, in_space, out_space)


def random_povm(dim: int, outcomes: int, seed=None) -> list[np.ndarray]:
    """Random POVM: Wishart blocks normalized by their sum."""
    rng = rng_from(seed)
    blocks = []
    for _ in range(outcomes):
        G = _ginibre(rng, dim, dim)
        blocks.append(G @ G.conj().T)
    S = sum(blocks)
    vals, vecs = np.linalg.eigh(S)
    inv_root = (vecs * (1.0 / np.sqrt(vals))) @ vecs.conj().T
    return [inv_root @ B @ inv_root for B in blocks]


def random_cq_state(c_space: RegisterSpace, q_space: RegisterSpace,
                    seed=None, rank: int | None = None) -> State:
    """Classical on ``c_space`` (random distribution), quantum on ``q_space``."""
    rng = rng_from(seed)
    nc = c_space.dim
    p = rng.dirichlet(np.ones(nc))
    dq = q_space.dim
    M = np.zeros((nc * dq, nc * dq), dtype=complex)
    for c in range(nc):
        rho = random_density(q_space, rng, rank=rank).matrix
        M[c * dq:(c + 1) * dq, c * dq:(c + 1) * dq] = p[c] * rho
    return State(M, c_space.tensor(q_space), check=False)
