#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/basis.py
"""
Spatial basis from a 4-way CP model (3 spatial modes + subjects).

L = diag(lambda) . khatri_rao([A3, A2, A1])^T is stored R x Nv and P = pinv(L) is Nv x R,
so that Y_(4) ~ G . L and G ~ Y_(4) . P.
"""
from typing import Sequence

import numpy as np
from scipy import linalg

from .decomposition import CpModel
from .exceptions import InvalidArgumentError
from .tensor import khatri_rao

PINV_RTOL = 1e-12


class BasisMaps:
    def __init__(self, loading: np.ndarray, spatial_dims: Sequence[int], projector: np.ndarray = None):
        """
        :param loading: R x Nv loading matrix L
        :param spatial_dims: (p1, p2, p3)
        :param projector: Nv x R projector P, computed from L if omitted
        """
        self.loading = np.atleast_2d(np.asarray(loading, dtype=np.float64))
        self.spatial_dims = tuple(int(d) for d in spatial_dims)
        if self.loading.shape[1] != int(np.prod(self.spatial_dims)):
            raise InvalidArgumentError(f'loading has {self.loading.shape[1]} columns, '
                                       f'spatial dims {self.spatial_dims} need {int(np.prod(self.spatial_dims))}')
        if projector is None:
            projector = linalg.pinv(self.loading, atol=0.0, rtol=PINV_RTOL)
        self.projector = np.asarray(projector, dtype=np.float64)

    @property
    def rank(self) -> int:
        return self.loading.shape[0]

    @property
    def n_voxels(self) -> int:
        return self.loading.shape[1]

    def to_volume(self, row) -> np.ndarray:
        """reshape an Nv-vector into a (p1, p2, p3) volume"""
        return np.reshape(np.asarray(row, dtype=np.float64), self.spatial_dims, order='F')


def loading_matrix(weights, spatial_factors: Sequence[np.ndarray]) -> np.ndarray:
    """diag(weights) . khatri_rao(reversed spatial factors)^T"""
    weights = np.asarray(weights, dtype=np.float64)
    return weights[:, None] * khatri_rao(list(spatial_factors)[::-1]).T


def build_basis(model: CpModel) -> BasisMaps:
    """
    :param model: CP model of a (p1, p2, p3, N) tensor
    :return: BasisMaps with L (R x Nv) and its pseudoinverse P (Nv x R)
    """
    if model.order != 4:
        raise InvalidArgumentError(f'build_basis needs a 4-way model (3 spatial modes + subjects), got order {model.order}')
    spatial = model.factors[:3]
    return BasisMaps(loading_matrix(model.weights, spatial), [f.shape[0] for f in spatial])


def basis_coefficients(model: CpModel) -> np.ndarray:
    """G of the training subjects: the subject-mode factor, the weights live in L"""
    return model.factors[3]


def project(Y: np.ndarray, basis: BasisMaps) -> np.ndarray:
    """
    :param Y: N x Nv voxel-space data (mode-4 unfolding)
    :return: N x R basis-space data Y . P
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if Y.shape[1] != basis.n_voxels:
        raise InvalidArgumentError(f'Y has {Y.shape[1]} columns, the basis has {basis.n_voxels} voxels')
    return Y @ basis.projector


def backproject(coeff_star: np.ndarray, basis: BasisMaps) -> np.ndarray:
    """
    :param coeff_star: p x R basis-space coefficients
    :return: p x Nv voxel-space coefficient maps coeff_star . L
    """
    coeff_star = np.atleast_2d(np.asarray(coeff_star, dtype=np.float64))
    if coeff_star.shape[1] != basis.rank:
        raise InvalidArgumentError(f'coefficients have {coeff_star.shape[1]} columns, basis rank is {basis.rank}')
    return coeff_star @ basis.loading
