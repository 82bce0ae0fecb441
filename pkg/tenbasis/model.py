#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/model.py
# @Description: A group-level tensor regression object. It holds the 4-way response (three spatial modes
# and subjects), the subject-level design, and everything fitted from them: the CP model, the spatial basis,
# the posterior chain and per-contrast inference results.

import json
import os

import numpy as np

from .basis import build_basis
from .exceptions import DataError, InvalidArgumentError
from .fileio import load_response, read_chain, read_covariates, read_cp_model
from .tb_logger import logger

FIT_META = 'fit.json'


class TensorRegression:
    def __init__(self):
        """
        Constructor of the tensor regression object.
        """
        # input
        self._tensor = None  # np.ndarray (p1, p2, p3, N)
        self._design = None  # np.ndarray N x p
        self._covariate_names = None  # list of strings
        self._subject_ids = None  # list of strings
        self._voxel_sizes = None  # tuple of 3 floats, None unless read from NIfTI

        # fitted attributes
        self._cp_model = None  # decomposition.CpModel
        self._basis = None  # basis.BasisMaps
        self._chain = None  # bayes.McmcChain
        self._cv_result = None  # rank_selection.CvResult

        # inference
        self._results = {}  # contrast name -> simbas.SimBasResult
        self._clusters = {}  # contrast name -> list of simbas.Cluster

    @property
    def tensor(self):
        return self._tensor

    @tensor.setter
    def tensor(self, value):
        if value is not None:
            value = np.asarray(value, dtype=np.float64)
            if value.ndim != 4:
                raise InvalidArgumentError(f'response must be a (p1, p2, p3, N) tensor, got order {value.ndim}')
        self._tensor = value

    @property
    def design(self):
        return self._design

    @design.setter
    def design(self, value):
        self._design = None if value is None else np.atleast_2d(np.asarray(value, dtype=np.float64))

    @property
    def covariate_names(self):
        return self._covariate_names

    @covariate_names.setter
    def covariate_names(self, value):
        self._covariate_names = None if value is None else list(value)

    @property
    def subject_ids(self):
        return self._subject_ids

    @subject_ids.setter
    def subject_ids(self, value):
        self._subject_ids = None if value is None else list(value)

    @property
    def voxel_sizes(self):
        return self._voxel_sizes

    @voxel_sizes.setter
    def voxel_sizes(self, value):
        self._voxel_sizes = None if value is None else tuple(float(v) for v in value)

    @property
    def cp_model(self):
        return self._cp_model

    @cp_model.setter
    def cp_model(self, value):
        self._cp_model = value

    @property
    def basis(self):
        return self._basis

    @basis.setter
    def basis(self, value):
        self._basis = value

    @property
    def chain(self):
        return self._chain

    @chain.setter
    def chain(self, value):
        self._chain = value

    @property
    def cv_result(self):
        return self._cv_result

    @cv_result.setter
    def cv_result(self, value):
        self._cv_result = value

    @property
    def results(self):
        return self._results

    @property
    def clusters(self):
        return self._clusters

    @property
    def spatial_dims(self):
        if self._tensor is not None:
            return tuple(self._tensor.shape[:3])
        if self._basis is not None:
            return self._basis.spatial_dims
        return None

    @property
    def n_subjects(self):
        return None if self._tensor is None else self._tensor.shape[3]

    # ------------------------------------------------------#
    #                Data loading methods                   #
    # ------------------------------------------------------#
    def load_data(self, tensor_fn: str, covariates_fn: str, intercept: bool = True):
        """
        Load the response and the design. Covariate rows follow the tensor's subject order;
        with a NIfTI list or a .tnsr file the subject order is the file row order.
        :param tensor_fn: .tnsr file or text list of .nii volumes
        :param covariates_fn: covariate csv
        :param intercept: prepend a column of ones
        """
        self.tensor, self.voxel_sizes = load_response(tensor_fn)
        self.design, self.covariate_names, self.subject_ids = read_covariates(
            covariates_fn, intercept=intercept, n_subjects=self.n_subjects)
        logger.info(f'loaded response {self.tensor.shape} and design {self.design.shape} '
                    f'({", ".join(self.covariate_names)})')

    def load_results(self, fit_dir: str):
        """
        (for derived data)
        Load a fit directory written by BayesTensorRegression.fit: CP model, posterior chain and metadata.
        :param fit_dir: directory holding cp_*.tnsr, chain_*.tnsr and fit.json
        """
        meta_fn = os.path.join(fit_dir, FIT_META)
        if not os.path.isfile(meta_fn):
            raise DataError(f'no fit found: {meta_fn} does not exist')
        with open(meta_fn) as f:
            meta = json.load(f)
        self.cp_model = read_cp_model(fit_dir)
        self.basis = build_basis(self.cp_model)
        self.chain = read_chain(fit_dir)
        self.covariate_names = meta['covariate_names']
        self.subject_ids = meta.get('subject_ids')
        self.voxel_sizes = meta.get('voxel_sizes')
        return meta

