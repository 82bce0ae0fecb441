#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/tensor.py
"""
Dense tensor primitives.

A tensor is a float64 numpy array whose linearization is first-index-fastest
(Fortran order). Modes are 0-based. The mode-n unfolding follows the Kolda
convention: mode n indexes the rows, the remaining modes enumerate the columns
with the lowest remaining mode varying fastest.
"""
from functools import reduce
from typing import Sequence

import numpy as np
from scipy import linalg

from .exceptions import InvalidArgumentError


def as_tensor(values, dims: Sequence[int] = None) -> np.ndarray:
    """
    Build a tensor from a flat first-index-fastest value vector, or validate an array.
    :param values: flat values (with dims) or an n-d array
    :param dims: dimension vector, required for flat input
    :return: float64 ndarray
    """
    values = np.asarray(values, dtype=np.float64)
    if dims is None:
        t = values
    else:
        dims = tuple(int(d) for d in dims)
        if values.size != int(np.prod(dims)):
            raise InvalidArgumentError(f'{values.size} values do not fill dims {dims}')
        t = np.reshape(values.ravel(order='F'), dims, order='F')
    if t.ndim < 1 or any(d < 1 for d in t.shape):
        raise InvalidArgumentError(f'tensor dims must be positive, got {t.shape}')
    return t


def _check_mode(mode: int, order: int):
    if not 0 <= mode < order:
        raise InvalidArgumentError(f'mode {mode} out of range for an order-{order} tensor')


def matricize(t: np.ndarray, mode: int) -> np.ndarray:
    """
    Mode-n unfolding X_(n), shape (I_n, prod of the other dims)
    :param t: tensor
    :param mode: 0-based mode
    :return: matrix
    """
    t = np.asarray(t, dtype=np.float64)
    _check_mode(mode, t.ndim)
    return np.reshape(np.moveaxis(t, mode, 0), (t.shape[mode], -1), order='F')


def fold(m: np.ndarray, mode: int, dims: Sequence[int]) -> np.ndarray:
    """
    Inverse of matricize.
    :param m: mode-n unfolding
    :param mode: 0-based mode
    :param dims: dims of the folded tensor
    :return: tensor of shape dims
    """
    m = np.asarray(m, dtype=np.float64)
    dims = [int(d) for d in dims]
    _check_mode(mode, len(dims))
    if m.ndim != 2:
        raise InvalidArgumentError(f'expected a matrix, got an array of order {m.ndim}')
    rest = dims[:mode] + dims[mode + 1:]
    if m.shape != (dims[mode], int(np.prod(rest))):
        raise InvalidArgumentError(f'matrix of shape {m.shape} cannot fold to dims {tuple(dims)} along mode {mode}')
    return np.moveaxis(np.reshape(m, [dims[mode]] + rest, order='F'), 0, mode)


def khatri_rao(matrices: Sequence[np.ndarray]) -> np.ndarray:
    """
    Column-wise Kronecker product; the index of the last matrix varies fastest.
    khatri_rao([A3, A2, A1]) lines up with matricize(t, 3) of a 4-way tensor.
    :param matrices: matrices sharing their column count
    :return: (prod rows) x R matrix
    """
    matrices = [np.atleast_2d(np.asarray(a, dtype=np.float64)) for a in matrices]
    if not matrices:
        raise InvalidArgumentError('khatri_rao needs at least one matrix')
    ranks = {a.shape[1] for a in matrices}
    if len(ranks) != 1:
        raise InvalidArgumentError(f'khatri_rao inputs have mismatched column counts {sorted(ranks)}')
    return reduce(linalg.khatri_rao, matrices)


def _check_factors(weights, factors):
    if not factors:
        raise InvalidArgumentError('at least one factor matrix is needed')
    factors = [np.atleast_2d(np.asarray(f, dtype=np.float64)) for f in factors]
    weights = np.asarray(weights, dtype=np.float64).ravel()
    ranks = {f.shape[1] for f in factors} | {weights.size}
    if len(ranks) != 1:
        raise InvalidArgumentError(f'rank mismatch across weights and factors: {sorted(ranks)}')
    return weights, factors


def reconstruct_cp(weights, factors: Sequence[np.ndarray]) -> np.ndarray:
    """
    Full tensor of a CP model: sum_r weights[r] * outer(factors[0][:, r], ..., factors[K-1][:, r])
    :param weights: R-vector (lambda)
    :param factors: K factor matrices of shape (I_k, R)
    :return: tensor of dims (I_1, ..., I_K)
    """
    weights, factors = _check_factors(weights, factors)
    dims = [f.shape[0] for f in factors]
    if len(factors) == 1:
        return factors[0] @ weights
    unfolded = (factors[-1] * weights) @ khatri_rao(factors[-2::-1]).T
    return fold(unfolded, len(factors) - 1, dims)


def frobenius_norm(t: np.ndarray) -> float:
    return float(np.linalg.norm(np.asarray(t, dtype=np.float64).ravel()))
