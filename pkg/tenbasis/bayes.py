#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/bayes.py
"""
Conjugate Bayesian regression in basis space: G = Z . gamma* + E*,
gamma* | Sigma ~ MN(g0, L0^-1, Sigma), Sigma ~ IW(V0, nu0).

The joint posterior factorizes as IW(Vn, nun) x MN(gn, Ln^-1, Sigma), so each
sweep of the sampler is an exact, independent joint draw.
"""
from typing import List, Optional, Sequence

import dask
import numpy as np
from scipy import linalg, stats

from .exceptions import InvalidArgumentError, InvalidDataError, SingularDesignError
from .params import ChainConfig
from .tb_logger import logger
from .utils import derive_seed, random_state

SYMMETRY_TOL = 1e-12
MAX_CONDITION = 1e12


def _symmetric(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + a.T)


def _check_symmetric(a: np.ndarray, name: str):
    scale = max(1.0, float(np.max(np.abs(a))))
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise InvalidArgumentError(f'{name} is not symmetric')


def _cholesky(a: np.ndarray, name: str) -> np.ndarray:
    try:
        return linalg.cholesky(a, lower=True)
    except linalg.LinAlgError as e:
        raise InvalidArgumentError(f'{name} is not symmetric positive-definite') from e


class PriorSpec:
    def __init__(self, g0, L0, V0, nu0: float):
        """
        :param g0: p x R prior mean of gamma*
        :param L0: p x p prior row precision (PSD)
        :param V0: R x R inverse-Wishart scale (SPD)
        :param nu0: degrees of freedom, > R - 1
        """
        self.g0 = np.atleast_2d(np.asarray(g0, dtype=np.float64))
        self.L0 = np.atleast_2d(np.asarray(L0, dtype=np.float64))
        self.V0 = np.atleast_2d(np.asarray(V0, dtype=np.float64))
        self.nu0 = float(nu0)
        p, rank = self.g0.shape
        if self.L0.shape != (p, p) or self.V0.shape != (rank, rank):
            raise InvalidArgumentError(f'prior shapes disagree: g0 {self.g0.shape}, L0 {self.L0.shape}, '
                                       f'V0 {self.V0.shape}')
        _check_symmetric(self.L0, 'L0')
        _check_symmetric(self.V0, 'V0')
        if not self.nu0 > rank - 1:
            raise InvalidArgumentError(f'nu0 must exceed R - 1 = {rank - 1}, got {self.nu0}')

    @property
    def p(self) -> int:
        return self.g0.shape[0]

    @property
    def rank(self) -> int:
        return self.g0.shape[1]

    @classmethod
    def default(cls, p: int, rank: int, precision: float = 1e-6, scale: float = 1.0, df_offset: float = 2.0):
        """weakly informative proper prior: g0 = 0, L0 = precision I, V0 = scale I, nu0 = R + df_offset"""
        return cls(np.zeros((p, rank)), precision * np.eye(p), scale * np.eye(rank), rank + df_offset)


class PosteriorParams:
    def __init__(self, gn, Ln, Vn, nun: float):
        self.gn = gn
        self.Ln = Ln
        self.Vn = Vn
        self.nun = float(nun)

    def as_prior(self) -> PriorSpec:
        """the posterior, reused as the prior of a later batch"""
        return PriorSpec(self.gn, self.Ln, self.Vn, self.nun)


class McmcChain:
    def __init__(self, gamma_star: np.ndarray, sigma: np.ndarray, n_total: int, burn_in: int, thin: int,
                 seed: int, covariate_names: Optional[Sequence[str]] = None):
        """
        :param gamma_star: M' x p x R retained draws of gamma*
        :param sigma: M' x R x R retained draws of Sigma
        """
        self.gamma_star = np.asarray(gamma_star, dtype=np.float64)
        self.sigma = np.asarray(sigma, dtype=np.float64)
        self.n_total = int(n_total)
        self.burn_in = int(burn_in)
        self.thin = int(thin)
        self.seed = int(seed)
        self.covariate_names = list(covariate_names) if covariate_names is not None else \
            [f'x{j}' for j in range(self.gamma_star.shape[1])]

    @property
    def n_samples(self) -> int:
        return self.gamma_star.shape[0]

    @property
    def p(self) -> int:
        return self.gamma_star.shape[1]

    @property
    def rank(self) -> int:
        return self.gamma_star.shape[2]

    def posterior_mean(self) -> np.ndarray:
        return self.gamma_star.mean(axis=0)

    def posterior_std(self) -> np.ndarray:
        return self.gamma_star.std(axis=0, ddof=1)

    @staticmethod
    def concatenate(chains: List['McmcChain']) -> 'McmcChain':
        first = chains[0]
        return McmcChain(np.concatenate([c.gamma_star for c in chains]),
                         np.concatenate([c.sigma for c in chains]),
                         sum(c.n_total for c in chains), sum(c.burn_in for c in chains), first.thin, first.seed,
                         first.covariate_names)


# ------------------------------------------------------#
#                   posterior update                    #
# ------------------------------------------------------#
def compute_posterior_params(G: np.ndarray, Z: np.ndarray, prior: PriorSpec,
                             covariate_names: Optional[Sequence[str]] = None) -> PosteriorParams:
    """
    Ln = Z'Z + L0
    gn = Ln^-1 (Z'G + L0 g0)
    nun = nu0 + N
    Vn = V0 + (G - Z gn)'(G - Z gn) + (gn - g0)' L0 (gn - g0)
    :param G: N x R basis-space response
    :param Z: N x p design
    :param prior: PriorSpec
    :param covariate_names: design column names, used in error messages
    :return: PosteriorParams
    """
    G = np.atleast_2d(np.asarray(G, dtype=np.float64))
    Z = np.asarray(Z, dtype=np.float64)
    if Z.ndim == 1:
        Z = Z[:, None]
    n = G.shape[0]
    if n < 1 or Z.shape[0] != n:
        raise InvalidArgumentError(f'G has {G.shape[0]} rows but Z has {Z.shape[0]}')
    if Z.shape[1] != prior.p or G.shape[1] != prior.rank:
        raise InvalidArgumentError(f'prior is {prior.p} x {prior.rank}, data imply {Z.shape[1]} x {G.shape[1]}')
    if not (np.all(np.isfinite(G)) and np.all(np.isfinite(Z))):
        raise InvalidDataError('G or Z contains non-finite values')
    names = list(covariate_names) if covariate_names is not None else [f'x{j}' for j in range(Z.shape[1])]

    Ln = _symmetric(Z.T @ Z + prior.L0)
    eigvals, eigvecs = np.linalg.eigh(Ln)
    if eigvals[0] <= 0 or eigvals[-1] / eigvals[0] > MAX_CONDITION:
        null = eigvecs[:, 0]
        offending = [names[j] for j in np.flatnonzero(np.abs(null) > 1e-3 * np.max(np.abs(null)))]
        raise SingularDesignError(f'Z\'Z + L0 is numerically singular; collinear covariates: {", ".join(offending)}',
                                  offending)
    cho = linalg.cho_factor(Ln, lower=True)
    gn = linalg.cho_solve(cho, Z.T @ G + prior.L0 @ prior.g0)
    resid = G - Z @ gn
    shift = gn - prior.g0
    Vn = _symmetric(prior.V0 + resid.T @ resid + shift.T @ prior.L0 @ shift)
    return PosteriorParams(gn, Ln, Vn, prior.nu0 + n)


# ------------------------------------------------------#
#                        samplers                       #
# ------------------------------------------------------#
def sample_inverse_wishart(V: np.ndarray, nu: float, rng: np.random.Generator, size: Optional[int] = None):
    """
    Inverse-Wishart draws (mean V / (nu - R - 1)), via the Bartlett decomposition of
    Wishart(V^-1, nu) followed by inversion.
    :param V: R x R SPD scale
    :param nu: degrees of freedom > R - 1
    :param rng: numpy Generator
    :param size: number of draws, a single R x R matrix if None
    :return: (R, R) or (size, R, R) array
    """
    V = np.atleast_2d(np.asarray(V, dtype=np.float64))
    rank = V.shape[0]
    _check_symmetric(V, 'V')
    _cholesky(V, 'V')
    if not nu > rank - 1:
        raise InvalidArgumentError(f'nu must exceed R - 1 = {rank - 1}, got {nu}')
    n = 1 if size is None else int(size)
    draws = stats.invwishart(df=nu, scale=V).rvs(size=n, random_state=rng)
    draws = np.reshape(draws, (n, rank, rank))
    draws = 0.5 * (draws + np.swapaxes(draws, 1, 2))
    return draws[0] if size is None else draws


def _matrix_normal(M: np.ndarray, row_chol: np.ndarray, col_chol: np.ndarray, rng: np.random.Generator):
    return M + row_chol @ rng.standard_normal(M.shape) @ col_chol.T


def sample_matrix_normal(M: np.ndarray, row_cov: np.ndarray, col_cov: np.ndarray, rng: np.random.Generator):
    """
    M + chol(row_cov) . Xi . chol(col_cov)^T, Xi standard normal; vec covariance is col_cov (x) row_cov
    """
    M = np.atleast_2d(np.asarray(M, dtype=np.float64))
    row_chol = _cholesky(np.atleast_2d(row_cov), 'row covariance')
    col_chol = _cholesky(np.atleast_2d(col_cov), 'column covariance')
    if row_chol.shape[0] != M.shape[0] or col_chol.shape[0] != M.shape[1]:
        raise InvalidArgumentError(f'covariances {row_chol.shape}, {col_chol.shape} do not match mean {M.shape}')
    return _matrix_normal(M, row_chol, col_chol, rng)


def run_sampler(G: np.ndarray, Z: np.ndarray, prior: PriorSpec, n_total: int = 2000, burn_in: int = 500,
                thin: int = 1, seed: int = 0, covariate_names: Optional[Sequence[str]] = None) -> McmcChain:
    """
    Draw (Sigma, gamma*) from the exact joint posterior for each retained iteration.

    M' = (n_total - burn_in) // thin draws are kept. Draws are independent, so the
    discarded burn-in/thinning iterations are not materialized.
    :return: McmcChain
    """
    chain_cfg = ChainConfig(n_total, burn_in, thin)
    post = compute_posterior_params(G, Z, prior, covariate_names)
    rng = random_state(seed)
    n_keep = chain_cfg.n_retained

    row_cov = _symmetric(linalg.cho_solve(linalg.cho_factor(post.Ln, lower=True), np.eye(prior.p)))
    row_chol = _cholesky(row_cov, 'Ln^-1')
    sigma = sample_inverse_wishart(post.Vn, post.nun, rng, size=n_keep)
    gamma_star = np.empty((n_keep, prior.p, prior.rank))
    for m in range(n_keep):
        gamma_star[m] = _matrix_normal(post.gn, row_chol, _cholesky(sigma[m], 'Sigma draw'), rng)
    logger.debug(f'sampler kept {n_keep} of {n_total} iterations (burn-in {burn_in}, thin {thin}), '
                 f'p={prior.p}, R={prior.rank}')
    return McmcChain(gamma_star, sigma, n_total, burn_in, thin, seed, covariate_names)


def run_chains(G: np.ndarray, Z: np.ndarray, prior: PriorSpec, chain: ChainConfig, seed: int = 0,
               n_chains: int = 1, num_workers: int = 1,
               covariate_names: Optional[Sequence[str]] = None) -> List[McmcChain]:
    """
    Independent chains with derived seeds, run through dask.
    """
    tasks = [dask.delayed(run_sampler)(G, Z, prior, chain.n_total, chain.burn_in, chain.thin,
                                       derive_seed(seed, i + 1), covariate_names) for i in range(n_chains)]
    scheduler = 'synchronous' if num_workers <= 1 else 'threads'
    return list(dask.compute(*tasks, scheduler=scheduler, num_workers=num_workers))
