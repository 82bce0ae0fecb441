#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/results.py
import json
import os
import re
from typing import List

# third party modules
import numpy as np
import pandas as pd

from .fileio import write_nifti1, write_table, write_tensor
from .model import FIT_META, TensorRegression
from .simbas import Cluster, SimBasResult

INFER_META = 'infer.json'
CLUSTER_COLUMNS = ['cluster_id', 'size', 'peak_i', 'peak_j', 'peak_k', 'peak_value']


def file_label(name: str) -> str:
    """contrast name usable as a file prefix"""
    return re.sub(r'[^A-Za-z0-9_.-]+', '_', name).strip('_') or 'contrast'


def cluster_table(clusters: List[Cluster]) -> pd.DataFrame:
    """
    Cluster report, one row per cluster in the given (size-descending) order, 1-based ids.
    Peak coordinates are 0-based voxel indices.
    """
    rows = [(i + 1, c.size, c.peak_voxel[0], c.peak_voxel[1], c.peak_voxel[2], c.peak_value)
            for i, c in enumerate(clusters)]
    return pd.DataFrame(rows, columns=CLUSTER_COLUMNS).astype(
        {'cluster_id': int, 'size': int, 'peak_i': int, 'peak_j': int, 'peak_k': int, 'peak_value': float})


def write_maps(result: SimBasResult, spatial_dims, out_dir: str, nifti: bool = False, voxel_sizes=None) -> dict:
    """
    Write the maps of one contrast as tensor files (and optionally NIfTI):
    mean, std, psimbas, flags, band_lower, band_upper.
    :return: dict map name -> file name
    """
    lower, upper = result.band()
    maps = {
        'mean': result.mean_map,
        'std': result.std_map,
        'psimbas': result.psimbas_map,
        'flags': result.flags.astype(np.float64),
        'band_lower': lower,
        'band_upper': upper,
    }
    label = file_label(result.name)
    written = {}
    for key, vector in maps.items():
        volume = np.reshape(vector, tuple(spatial_dims), order='F')
        written[key] = write_tensor(os.path.join(out_dir, f'{label}_{key}.tnsr'), volume)
        if nifti:
            write_nifti1(os.path.join(out_dir, f'{label}_{key}.nii'), volume, voxel_sizes)
    return written


class HandleResults(TensorRegression):
    # Handle a run directory generated by tenbasis
    def __init__(self, run_dir: str):
        super().__init__()
        self.run_dir = run_dir
        self.fit_meta = None
        self.infer_meta = None
        if os.path.isfile(os.path.join(run_dir, FIT_META)):
            self.fit_meta = self.load_results(run_dir)
        if os.path.isfile(os.path.join(run_dir, INFER_META)):
            with open(os.path.join(run_dir, INFER_META)) as f:
                self.infer_meta = json.load(f)

    def rank_cv_table(self):
        fn = os.path.join(self.run_dir, 'rank_cv.csv')
        return pd.read_csv(fn) if os.path.isfile(fn) else None

    def contrast_clusters(self, name: str) -> pd.DataFrame:
        return pd.read_csv(os.path.join(self.run_dir, f'{file_label(name)}_clusters.csv'))

    def summary(self) -> str:
        """
        Plain-text summary of the run: fit, chain, rank search and per-contrast inference.
        """
        lines = [f'run directory: {os.path.abspath(self.run_dir)}']
        if self.fit_meta is None and self.infer_meta is None and self.rank_cv_table() is None:
            lines.append('no tenbasis results found')
            return '\n'.join(lines) + '\n'
        if self.fit_meta is not None:
            model = self.cp_model
            lines += [
                f'rank: {model.rank} ({self.fit_meta.get("rank_source", "rank")})',
                f'response dims: {tuple(self.fit_meta["dims"])}',
                f'covariates: {", ".join(self.covariate_names)}',
                f'CP relative error: {model.fit:.6g} after {model.iterations} sweeps '
                f'({"converged" if model.converged else "not converged"})',
                f'retained draws: {self.chain.n_samples} (n_total {self.chain.n_total}, '
                f'burn-in {self.chain.burn_in}, thin {self.chain.thin}, seed {self.chain.seed})',
            ]
        cv = self.rank_cv_table()
        if cv is not None:
            best = cv.loc[cv['mean_error'].idxmin()]
            lines.append(f'rank search: {len(cv)} ranks, best rank {int(best["rank"])} '
                         f'(mean error {best["mean_error"]:.6g})')
        for entry in (self.infer_meta or {}).get('contrasts', []):
            lines.append(f'contrast {entry["name"]} {entry["weights"]}: {entry["flagged"]} of {entry["voxels"]} '
                         f'voxels flagged at alpha={entry["alpha"]}, {entry["clusters"]} clusters '
                         f'(min size {entry["min_cluster_size"]})')
            table = self.contrast_clusters(entry['name'])
            if len(table):
                lines.append(table.to_string(index=False))
        return '\n'.join(lines) + '\n'

    def to_report(self, fn: str = None) -> str:
        fn = fn or os.path.join(self.run_dir, 'report.txt')
        with open(fn, 'w') as f:
            f.write(self.summary())
        return fn


def write_clusters(clusters: List[Cluster], out_dir: str, name: str) -> str:
    return write_table(cluster_table(clusters), os.path.join(out_dir, f'{file_label(name)}_clusters.csv'))
