#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/rank_selection.py
"""
Choose the CP rank by k-fold cross-validation over subjects.

For every (fold, rank): CP of the training subjects, posterior of gamma* from the
training G, G_test = Z_test . posterior mean, Y_test reconstructed from the training
spatial factors, relative Frobenius error on the test subjects.
"""
from typing import List, Tuple

import dask
import numpy as np
import pandas as pd
from dask.diagnostics import ProgressBar
from sklearn.model_selection import KFold

from .basis import basis_coefficients, build_basis
from .bayes import run_sampler
from .decomposition import cp_als
from .exceptions import CrossValidationError, InvalidArgumentError, TenbasisError
from .params import CvConfig
from .tb_logger import logger
from .tensor import frobenius_norm, matricize
from .utils import derive_seed, random_state


class CvResult:
    def __init__(self, ranks: List[int], fold_errors: np.ndarray):
        """
        :param ranks: candidate ranks, ascending
        :param fold_errors: folds x ranks matrix of relative test errors
        """
        self.ranks = list(ranks)
        self.fold_errors = np.asarray(fold_errors, dtype=np.float64)
        self.per_rank_error = pd.Series(self.fold_errors.mean(axis=0), index=pd.Index(self.ranks, name='rank'),
                                        name='mean_error')
        # argmin keeps the first (smallest) rank on ties
        self.selected_rank = int(self.ranks[int(np.argmin(self.per_rank_error.values))])

    @property
    def folds(self) -> int:
        return self.fold_errors.shape[0]

    def to_frame(self) -> pd.DataFrame:
        """rank, mean_error, fold_1 ... fold_k"""
        df = pd.DataFrame(self.fold_errors.T, columns=[f'fold_{i + 1}' for i in range(self.folds)])
        df.insert(0, 'mean_error', self.per_rank_error.values)
        df.insert(0, 'rank', self.ranks)
        return df


def kfold_split(n_subjects: int, folds: int, seed: int) -> List[Tuple[np.ndarray, np.ndarray]]:
    """
    Partition 0..N-1 into folds near-equal test sets after a seeded shuffle.
    :return: list of (train_indices, test_indices), both sorted
    """
    if folds < 2:
        raise InvalidArgumentError(f'folds must be >= 2, got {folds}')
    if folds > n_subjects:
        raise InvalidArgumentError(f'folds ({folds}) cannot exceed the number of subjects ({n_subjects})')
    order = random_state(seed).permutation(n_subjects)
    return [(np.sort(order[train]), np.sort(order[test]))
            for train, test in KFold(n_splits=folds).split(order)]


def _fold_error(Y4: np.ndarray, Z: np.ndarray, train: np.ndarray, test: np.ndarray, rank: int,
                cfg: CvConfig, task_seed: int, fold_id: int) -> float:
    try:
        model = cp_als(Y4[..., train], rank, cfg.als.with_seed(derive_seed(task_seed, 1)))
        basis = build_basis(model)
        chain = run_sampler(basis_coefficients(model), Z[train], cfg.prior.spec(Z.shape[1], rank),
                            cfg.chain.n_total, cfg.chain.burn_in, cfg.chain.thin, derive_seed(task_seed, 2))
        G_test = Z[test] @ chain.posterior_mean()
        Y_test = matricize(Y4[..., test], 3)
        error = frobenius_norm(Y_test - G_test @ basis.loading) / frobenius_norm(Y_test)
    except (TenbasisError, np.linalg.LinAlgError) as e:
        raise CrossValidationError(str(e), fold_id, rank) from e
    if not np.isfinite(error):
        raise CrossValidationError('non-finite test error', fold_id, rank)
    logger.debug(f'fold {fold_id}, rank {rank}: relative test error {error:.6f}')
    return error


def cv_rank_search(Y4: np.ndarray, Z: np.ndarray, cfg: CvConfig) -> CvResult:
    """
    :param Y4: (p1, p2, p3, N) response tensor
    :param Z: N x p design
    :param cfg: CvConfig
    :return: CvResult with per-rank mean errors and the selected rank
    """
    Y4 = np.asarray(Y4, dtype=np.float64)
    Z = np.asarray(Z, dtype=np.float64)
    if Y4.ndim != 4:
        raise InvalidArgumentError(f'cross-validation needs a 4-way tensor, got order {Y4.ndim}')
    if Z.ndim != 2 or Z.shape[0] != Y4.shape[3]:
        raise InvalidArgumentError(f'Z must have one row per subject ({Y4.shape[3]}), got {Z.shape}')
    splits = kfold_split(Y4.shape[3], cfg.folds, cfg.seed)

    tasks = []
    for f, (train, test) in enumerate(splits):
        for r, rank in enumerate(cfg.ranks):
            task_seed = derive_seed(cfg.seed, f * len(cfg.ranks) + r + 1)
            tasks.append(dask.delayed(_fold_error)(Y4, Z, train, test, rank, cfg, task_seed, f + 1))
    scheduler = 'synchronous' if cfg.num_workers <= 1 else 'threads'
    logger.info(f'cross-validating ranks {cfg.ranks} over {cfg.folds} folds ({len(tasks)} tasks)')
    with ProgressBar():
        errors = dask.compute(*tasks, scheduler=scheduler, num_workers=cfg.num_workers)

    result = CvResult(cfg.ranks, np.reshape(errors, (cfg.folds, len(cfg.ranks))))
    logger.info(f'selected rank {result.selected_rank} '
                f'(mean test error {result.per_rank_error[result.selected_rank]:.6f})')
    return result
