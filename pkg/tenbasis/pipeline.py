#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
@file: pipeline.py
@description: fit group-level coefficient maps and flag voxels with simultaneous credible bands
"""

# python core modules
import json
import os
from copy import deepcopy
from typing import Optional

# third party modules
import numpy as np

# modules in self project
from .basis import build_basis, project
from .bayes import McmcChain, run_chains
from .decomposition import cp_als
from .exceptions import InvalidArgumentError
from .fileio import read_nifti1, read_tensor, write_chain, write_cp_model, write_table
from .model import FIT_META, TensorRegression
from .params import PipelineConfig
from .rank_selection import cv_rank_search
from .results import INFER_META, write_clusters, write_maps
from .simbas import ContrastSpec, apply_mask, contrast_samples, extract_clusters, simbas
from .tb_logger import logger
from .tensor import matricize
from .utils import timed


def read_mask(fn: str, spatial_dims) -> np.ndarray:
    """
    Brain mask from a .tnsr or .nii volume, nonzero voxels kept.
    :return: boolean Nv-vector in map order
    """
    volume = read_tensor(fn) if fn.endswith('.tnsr') else read_nifti1(fn)[0]
    return apply_mask(volume != 0, spatial_dims)


class BayesTensorRegression(TensorRegression):
    """
    Tensor function-on-scalar regression: CP basis, conjugate Bayesian model in basis space,
    SimBaS inference in voxel space.
    """

    def __init__(self, tensor=None, design=None, covariate_names=None, subject_ids=None, voxel_sizes=None):
        """
        :param tensor: (p1, p2, p3, N) response
        :param design: N x p design matrix
        :param covariate_names: names of the design columns
        :param subject_ids: subject ids in tensor order
        :param voxel_sizes: voxel sizes for NIfTI export
        """
        super().__init__()
        self.tensor = tensor
        self.design = design
        self.covariate_names = covariate_names
        if self.design is not None and self.covariate_names is None:
            self.covariate_names = [f'x{j + 1}' for j in range(self.design.shape[1])]
        self.subject_ids = subject_ids
        self.voxel_sizes = voxel_sizes
        self._params = PipelineConfig()

    @classmethod
    def from_files(cls, tensor_fn: str, covariates_fn: str, intercept: bool = True) -> 'BayesTensorRegression':
        reg = cls()
        reg.load_data(tensor_fn, covariates_fn, intercept=intercept)
        return reg

    @property
    def params(self):
        return self._params

    @params.setter
    def params(self, value):
        """only use this function when setting params as a whole.
        use add_params to solely update/add some of the params and keep the rest unchanged"""
        self._params = value

    def add_params(self, dic: dict):
        """
        :param dic: keys of PipelineConfig

        Example:
            reg = BayesTensorRegression(Y, Z)
            reg.add_params({'alpha': 0.05, 'n_total': 4000})
        """
        og_params = deepcopy(self._params)
        try:
            self._params.update(dic)
        except InvalidArgumentError:
            self._params = og_params
            raise

    def _check_inputs(self):
        if self.tensor is None or self.design is None:
            raise InvalidArgumentError('response tensor and design are required')
        if self.design.shape[0] != self.n_subjects:
            raise InvalidArgumentError(f'design has {self.design.shape[0]} rows, '
                                       f'the tensor has {self.n_subjects} subjects')

    # ------------------------------------------------------#
    #                 step1: RANK SELECTION                 #
    # ------------------------------------------------------#
    def select_rank(self, out_dir: Optional[str] = None):
        """
        k-fold cross-validation over the candidate ranks.
        :param out_dir: if given, write rank_cv.csv there
        :return: CvResult
        """
        self._check_inputs()
        with timed('rank cross-validation'):
            self.cv_result = cv_rank_search(self.tensor, self.design, self._params.cv_config())
        if out_dir is not None:
            os.makedirs(out_dir, exist_ok=True)
            write_table(self.cv_result.to_frame(), os.path.join(out_dir, 'rank_cv.csv'))
        return self.cv_result

    # ------------------------------------------------------#
    #             step2: CP DECOMPOSITION + BASIS           #
    # ------------------------------------------------------#
    def decompose(self, rank: int):
        self._check_inputs()
        with timed(f'CP-ALS rank {rank}'):
            self.cp_model = cp_als(self.tensor, rank, self._params.als_config())
        self.basis = build_basis(self.cp_model)
        return self.cp_model

    # ------------------------------------------------------#
    #           step3: POSTERIOR OF THE BASIS MODEL         #
    # ------------------------------------------------------#
    def sample_posterior(self):
        """
        G = Y_(4) . P, then exact draws of (Sigma, gamma*) from the conjugate posterior.
        With n_chains > 1 the independent chains are pooled in chain order.
        """
        params = self._params
        G = project(matricize(self.tensor, 3), self.basis)
        prior = params.prior_config().spec(self.design.shape[1], self.basis.rank)
        chain = params.chain_config()
        with timed('posterior sampling'):
            chains = run_chains(G, self.design, prior, chain, params.seed, params.n_chains, params.num_workers,
                                self.covariate_names)
        self.chain = chains[0] if len(chains) == 1 else McmcChain.concatenate(chains)
        return self.chain

    def fit(self, out_dir: Optional[str] = None):
        """
        Fit pipeline: rank (given or cross-validated) -> CP -> basis -> projection -> posterior draws.
        :param out_dir: if given, persist CP model, chain and fit.json there
        :return: McmcChain
        """
        params = self._params.validate(need_rank_source=True)
        self._check_inputs()
        if params.cv:
            rank = self.select_rank(out_dir).selected_rank
            rank_source = 'cv'
        else:
            rank = params.rank
            rank_source = 'rank'
        self.decompose(rank)
        self.sample_posterior()
        if out_dir is not None:
            self.save_fit(out_dir, rank_source)
        return self.chain

    def save_fit(self, out_dir: str, rank_source: str = 'rank'):
        os.makedirs(out_dir, exist_ok=True)
        write_cp_model(self.cp_model, out_dir)
        write_chain(self.chain, out_dir)
        meta = {
            'rank': self.cp_model.rank,
            'rank_source': rank_source,
            'dims': list(self.tensor.shape),
            'covariate_names': self.covariate_names,
            'subject_ids': self.subject_ids,
            'voxel_sizes': list(self.voxel_sizes) if self.voxel_sizes else None,
            'params': self._params.as_dict(),
        }
        with open(os.path.join(out_dir, FIT_META), 'w') as f:
            json.dump(meta, f, indent=4)
        logger.info(f'fit written to {out_dir}')

    # ------------------------------------------------------#
    #             step4: SIMBAS VOXEL INFERENCE             #
    # ------------------------------------------------------#
    def contrasts(self, text: Optional[str] = None):
        return ContrastSpec.parse(text or self._params.contrast, self.covariate_names)

    def run_contrast(self, contrast: ContrastSpec, mask=None):
        """
        :param contrast: ContrastSpec over the design columns
        :param mask: boolean Nv-vector or None
        :return: (SimBasResult, clusters)
        """
        params = self._params
        samples = contrast_samples(self.chain, self.basis, contrast)
        result = simbas(samples.mean_map, samples.std_map, samples, alpha=params.alpha, mask=mask,
                        name=contrast.name)
        flags = np.reshape(result.flags, self.basis.spatial_dims, order='F')
        mean = np.reshape(result.mean_map, self.basis.spatial_dims, order='F')
        clusters = extract_clusters(flags, params.min_cluster_size, params.connectivity, mean)
        logger.info(f'{contrast.name}: {len(clusters)} clusters of at least {params.min_cluster_size} voxels')
        self.results[contrast.name] = result
        self.clusters[contrast.name] = clusters
        return result, clusters

    def infer(self, contrast: Optional[str] = None, out_dir: Optional[str] = None):
        """
        Inference pipeline for one or more contrasts: contrast draws -> SimBaS -> clusters.
        :param contrast: contrast string, see ContrastSpec.parse; defaults to the configured contrast
        :param out_dir: if given, write maps, cluster tables and infer.json there
        :return: dict contrast name -> SimBasResult
        """
        params = self._params.validate()
        if self.chain is None or self.basis is None:
            raise InvalidArgumentError('no posterior chain, run fit first')
        mask = read_mask(params.mask, self.basis.spatial_dims) if params.mask else None
        entries = []
        with timed('SimBaS inference'):
            for spec in self.contrasts(contrast):
                result, clusters = self.run_contrast(spec, mask)
                entries.append({'name': spec.name, 'weights': spec.weights.tolist(), 'alpha': params.alpha,
                                'flagged': int(result.flags.sum()), 'voxels': int(result.mask.sum()),
                                'quantile': result.quantile(), 'clusters': len(clusters),
                                'min_cluster_size': params.min_cluster_size,
                                'connectivity': params.connectivity})
                if out_dir is not None:
                    os.makedirs(out_dir, exist_ok=True)
                    write_maps(result, self.basis.spatial_dims, out_dir, params.nifti, self.voxel_sizes)
                    write_clusters(clusters, out_dir, spec.name)
        if out_dir is not None:
            with open(os.path.join(out_dir, INFER_META), 'w') as f:
                json.dump({'contrasts': entries}, f, indent=4)
        return {entry['name']: self.results[entry['name']] for entry in entries}


def load_for_inference(fit_dir: str, params: PipelineConfig) -> BayesTensorRegression:
    """Rebuild a fitted regression from a fit directory, response data not needed."""
    reg = BayesTensorRegression()
    reg.params = params
    reg.load_results(fit_dir)
    return reg


def load_for_fit(params: PipelineConfig) -> BayesTensorRegression:
    if not params.tensor or not params.covariates:
        raise InvalidArgumentError('both tensor and covariates are required')
    reg = BayesTensorRegression.from_files(params.tensor, params.covariates, intercept=params.intercept)
    reg.params = params
    return reg
