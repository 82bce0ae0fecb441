#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/simulator.py
"""
SIMULATION
Synthetic 4-way datasets with known CP structure and known covariate effects:
    G = Z . gamma*_true + E*,   Y_(4) = G . diag(lambda) . khatri_rao([A3, A2, A1])^T + E
"""
from typing import Optional, Sequence

import numpy as np

from .basis import loading_matrix
from .exceptions import InvalidArgumentError
from .tensor import fold
from .utils import random_state

COLUMN_KINDS = ('intercept', 'binary', 'continuous')
PREFIX = {'binary': 'bin', 'continuous': 'cont'}


class SynthSpec:
    def __init__(self, spatial_dims: Sequence[int] = (10, 12, 8), n_subjects: int = 20, rank: int = 3,
                 design: Sequence[str] = ('intercept', 'binary'), gamma_star_true=None,
                 noise_subject_sd: float = 0.0, noise_voxel_sd: float = 0.0, seed: int = 0,
                 covariate_names: Optional[Sequence[str]] = None):
        """
        :param spatial_dims: (p1, p2, p3)
        :param n_subjects: N
        :param rank: R_true
        :param design: column recipe, each of 'intercept', 'binary' (balanced 0/1), 'continuous' (standard normal)
        :param gamma_star_true: p x R_true effects, drawn standard normal if None
        :param noise_subject_sd: sd of the basis-space noise added to G
        :param noise_voxel_sd: sd of the voxelwise noise added to Y
        :param seed: 64-bit seed
        :param covariate_names: names of the design columns
        """
        self.spatial_dims = tuple(int(d) for d in spatial_dims)
        self.n_subjects = int(n_subjects)
        self.rank = int(rank)
        self.design = tuple(design)
        self.noise_subject_sd = float(noise_subject_sd)
        self.noise_voxel_sd = float(noise_voxel_sd)
        self.seed = int(seed)
        if len(self.spatial_dims) != 3 or min(self.spatial_dims) < 1 or self.n_subjects < 1 or self.rank < 1:
            raise InvalidArgumentError('spatial dims, subject count and rank must be positive')
        if not self.design or any(kind not in COLUMN_KINDS for kind in self.design):
            raise InvalidArgumentError(f'design columns must be among {COLUMN_KINDS}, got {self.design}')
        if self.noise_subject_sd < 0 or self.noise_voxel_sd < 0:
            raise InvalidArgumentError('noise standard deviations must be >= 0')
        if covariate_names is None:
            counts = {}
            covariate_names = []
            for kind in self.design:
                if kind == 'intercept':
                    covariate_names.append('intercept')
                else:
                    counts[kind] = counts.get(kind, 0) + 1
                    covariate_names.append(f'{PREFIX[kind]}{counts[kind]}')
        if len(covariate_names) != len(self.design):
            raise InvalidArgumentError('one covariate name per design column is needed')
        self.covariate_names = list(covariate_names)
        if gamma_star_true is not None:
            gamma_star_true = np.atleast_2d(np.asarray(gamma_star_true, dtype=np.float64))
            if gamma_star_true.shape != (self.p, self.rank):
                raise InvalidArgumentError(f'gamma_star_true must be {self.p} x {self.rank}, '
                                           f'got {gamma_star_true.shape}')
        self.gamma_star_true = gamma_star_true

    @property
    def p(self) -> int:
        return len(self.design)


class SynthTruth:
    def __init__(self, factors, weights, gamma_star, G):
        self.factors = factors  # spatial factors A1, A2, A3 with unit-norm columns
        self.weights = weights
        self.gamma_star = gamma_star
        self.G = G

    @property
    def loading(self) -> np.ndarray:
        return loading_matrix(self.weights, self.factors)

    def coefficient_maps(self) -> np.ndarray:
        """p x Nv voxel-space coefficients gamma*_true . L_true"""
        return self.gamma_star @ self.loading


class SynthData:
    def __init__(self, tensor, design, covariate_names, subject_ids, truth: SynthTruth):
        self.tensor = tensor
        self.design = design
        self.covariate_names = covariate_names
        self.subject_ids = subject_ids
        self.truth = truth


def _design(spec: SynthSpec, rng: np.random.Generator) -> np.ndarray:
    columns = []
    for kind in spec.design:
        if kind == 'intercept':
            columns.append(np.ones(spec.n_subjects))
        elif kind == 'binary':
            col = np.zeros(spec.n_subjects)
            col[rng.permutation(spec.n_subjects)[:spec.n_subjects // 2]] = 1.0
            columns.append(col)
        else:
            columns.append(rng.standard_normal(spec.n_subjects))
    return np.column_stack(columns)


def generate(spec: SynthSpec) -> SynthData:
    """
    :param spec: SynthSpec
    :return: SynthData holding Y4 (p1, p2, p3, N), Z (N x p) and the ground truth
    """
    rng = random_state(spec.seed)
    factors = []
    for dim in spec.spatial_dims:
        a = rng.standard_normal((dim, spec.rank))
        factors.append(a / np.linalg.norm(a, axis=0))
    weights = 10.0 ** rng.uniform(0.0, 1.0, spec.rank)
    Z = _design(spec, rng)
    gamma_star = spec.gamma_star_true
    if gamma_star is None:
        gamma_star = rng.standard_normal((spec.p, spec.rank))
    G = Z @ gamma_star
    if spec.noise_subject_sd > 0:
        G = G + spec.noise_subject_sd * rng.standard_normal(G.shape)
    truth = SynthTruth(factors, weights, gamma_star, G)
    Y = G @ truth.loading
    if spec.noise_voxel_sd > 0:
        Y = Y + spec.noise_voxel_sd * rng.standard_normal(Y.shape)
    tensor = fold(Y, 3, spec.spatial_dims + (spec.n_subjects,))
    subject_ids = [f'sub-{i + 1:04d}' for i in range(spec.n_subjects)]
    return SynthData(tensor, Z, list(spec.covariate_names), subject_ids, truth)
