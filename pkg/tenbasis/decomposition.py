#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/decomposition.py
"""
Canonical polyadic (CP) decomposition fitted by alternating least squares.
"""
from typing import List, Optional

import numpy as np
from scipy import linalg

from .exceptions import InvalidArgumentError, InvalidDataError
from .params import AlsConfig
from .tb_logger import logger
from .tensor import frobenius_norm, khatri_rao, matricize, reconstruct_cp
from .utils import random_state

PINV_RTOL = 1e-12


class CpModel:
    """
    weights (lambda) and K factor matrices with unit-norm columns, sorted by weight
    """

    def __init__(self, weights, factors: List[np.ndarray], fit: float = np.nan, iterations: int = 0,
                 converged: bool = False, fit_trace: Optional[List[float]] = None):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.factors = [np.asarray(f, dtype=np.float64) for f in factors]
        self.fit = float(fit)
        self.iterations = int(iterations)
        self.converged = bool(converged)
        self.fit_trace = list(fit_trace) if fit_trace is not None else []

    @property
    def rank(self) -> int:
        return self.weights.size

    @property
    def order(self) -> int:
        return len(self.factors)

    @property
    def dims(self) -> tuple:
        return tuple(f.shape[0] for f in self.factors)

    def to_tensor(self) -> np.ndarray:
        return reconstruct_cp(self.weights, self.factors)

    def __repr__(self):
        return (f'CpModel(rank={self.rank}, dims={self.dims}, fit={self.fit:.3e}, '
                f'iterations={self.iterations}, converged={self.converged})')


def cp_fit(model: CpModel, t: np.ndarray) -> float:
    """
    Relative reconstruction error ||t - model||_F / ||t||_F
    :param model: fitted CP model
    :param t: data tensor of the same dims
    :return: 0 for a zero residual
    """
    t = np.asarray(t, dtype=np.float64)
    if tuple(t.shape) != model.dims:
        raise InvalidArgumentError(f'model dims {model.dims} do not match tensor dims {t.shape}')
    residual = frobenius_norm(t - model.to_tensor())
    if residual == 0.0:
        return 0.0
    return residual / frobenius_norm(t)


def _normalize(factor: np.ndarray):
    norms = np.linalg.norm(factor, axis=0)
    dead = norms == 0.0
    factor = factor / np.where(dead, 1.0, norms)
    if dead.any():
        factor[:, dead] = 1.0 / np.sqrt(factor.shape[0])
    return factor, norms


def _initialize(t: np.ndarray, rank: int, cfg: AlsConfig, rng: np.random.Generator) -> List[np.ndarray]:
    factors = []
    for n, dim in enumerate(t.shape):
        if cfg.init == 'hosvd' and rank <= dim:
            u, _, _ = linalg.svd(matricize(t, n), full_matrices=False)
            factors.append(u[:, :rank].copy())
        else:
            factors.append(rng.uniform(size=(dim, rank)))
    return factors


def canonicalize(weights, factors: List[np.ndarray]):
    """
    Sort components by weight (descending) and fix signs: in every mode but the last,
    the largest-magnitude entry of each column is positive, flips are compensated in the last mode.
    """
    order = np.argsort(-np.asarray(weights), kind='stable')
    weights = np.asarray(weights, dtype=np.float64)[order]
    factors = [f[:, order].copy() for f in factors]
    for f in factors[:-1]:
        peak = f[np.argmax(np.abs(f), axis=0), np.arange(f.shape[1])]
        signs = np.where(peak < 0, -1.0, 1.0)
        f *= signs
        factors[-1] *= signs
    return weights, factors


def cp_als(t: np.ndarray, rank: int, cfg: Optional[AlsConfig] = None) -> CpModel:
    """
    Rank-R CP decomposition by alternating least squares.

    Each mode update solves factors[n] = X_(n) . khatri_rao(reversed others) . pinv(hadamard of Grams)
    and renormalizes the updated columns into the weights. Stops once the relative fit
    changes by less than cfg.tol or after cfg.max_iters sweeps.
    :param t: data tensor
    :param rank: number of components R
    :param cfg: ALS settings
    :return: CpModel
    """
    cfg = cfg or AlsConfig()
    t = np.asarray(t, dtype=np.float64)
    if int(rank) != rank or rank < 1:
        raise InvalidArgumentError(f'rank must be a positive integer, got {rank}')
    rank = int(rank)
    if not np.all(np.isfinite(t)):
        raise InvalidDataError('tensor contains non-finite values')
    order = t.ndim
    if order > 1:
        bound = int(np.prod(sorted(t.shape)[:-1]))
        if rank > bound:
            logger.warning(f'rank {rank} exceeds {bound}, normal equations are rank deficient')

    norm_t = frobenius_norm(t)
    rng = random_state(cfg.seed)
    factors = _initialize(t, rank, cfg, rng)
    weights = np.ones(rank)
    unfoldings = [matricize(t, n) for n in range(order)]

    fit_trace = []
    converged = False
    iteration = 0
    for iteration in range(1, cfg.max_iters + 1):
        for n in range(order):
            others = [m for m in range(order) if m != n]
            gram = np.ones((rank, rank))
            for m in others:
                gram *= factors[m].T @ factors[m]
            if others:
                mttkrp = unfoldings[n] @ khatri_rao([factors[m] for m in reversed(others)])
            else:
                mttkrp = unfoldings[n] @ np.ones((1, rank))
            updated = mttkrp @ linalg.pinv(gram, atol=0.0, rtol=PINV_RTOL)
            factors[n], weights = _normalize(updated)

        residual = frobenius_norm(t - reconstruct_cp(weights, factors))
        fit = residual / norm_t if norm_t > 0 else 0.0
        fit_trace.append(fit)
        logger.debug(f'ALS sweep {iteration}: relative error {fit:.6e}')
        if len(fit_trace) > 1 and abs(fit_trace[-2] - fit) < cfg.tol:
            converged = True
            break
        if fit == 0.0:
            converged = True
            break

    weights, factors = canonicalize(weights, factors)
    model = CpModel(weights, factors, fit=fit_trace[-1], iterations=iteration, converged=converged,
                    fit_trace=fit_trace)
    if converged:
        logger.info(f'CP-ALS rank {rank} converged after {iteration} sweeps, relative error {model.fit:.4e}')
    else:
        logger.warning(f'CP-ALS rank {rank} stopped at max_iters={cfg.max_iters}, relative error {model.fit:.4e}')
    return model
