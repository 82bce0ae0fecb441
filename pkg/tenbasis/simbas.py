#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/simbas.py
"""
Voxel-space inference from posterior draws: contrast maps, simultaneous credible
bands, P_SimBaS and cluster extraction.
"""
from typing import Iterator, List, Optional, Sequence, Tuple

import numpy as np
from scipy import ndimage

from .basis import BasisMaps
from .bayes import McmcChain
from .exceptions import DegeneratePosteriorError, InvalidArgumentError
from .tb_logger import logger

STD_FLOOR = 1e-12
CHUNK_SIZE = 256


class ContrastSpec:
    def __init__(self, weights, name: str = 'contrast'):
        self.weights = np.asarray(weights, dtype=np.float64).ravel()
        if self.weights.size == 0 or not np.any(self.weights != 0):
            raise InvalidArgumentError(f'contrast {name!r} has all-zero weights')
        self.name = str(name)

    def __repr__(self):
        return f'ContrastSpec({self.name!r}, {self.weights.tolist()})'

    @classmethod
    def for_covariate(cls, covariate: str, covariate_names: Sequence[str]) -> 'ContrastSpec':
        lowered = [c.lower() for c in covariate_names]
        if covariate.lower() not in lowered:
            raise InvalidArgumentError(f'unknown covariate {covariate!r}, design columns are {list(covariate_names)}')
        weights = np.zeros(len(covariate_names))
        weights[lowered.index(covariate.lower())] = 1.0
        return cls(weights, covariate_names[lowered.index(covariate.lower())])

    @classmethod
    def parse(cls, text: str, covariate_names: Sequence[str]) -> List['ContrastSpec']:
        """
        Contrast strings:
            * 'all': one contrast per design column
            * a column name, e.g. 'intercept' or 'sex'
            * comma-separated weights, e.g. '0,1' or '1,-1'
            * 'label=weights', e.g. 'diff=1,-1'
        """
        text = text.strip()
        if text.lower() == 'all':
            return [cls.for_covariate(name, covariate_names) for name in covariate_names]
        name, _, body = text.rpartition('=')
        body = body.strip()
        try:
            weights = [float(w) for w in body.split(',')]
        except ValueError:
            return [cls.for_covariate(text, covariate_names)]
        if len(weights) != len(covariate_names):
            raise InvalidArgumentError(f'contrast {text!r} has {len(weights)} weights, design has '
                                       f'{len(covariate_names)} columns')
        return [cls(weights, name.strip() or 'c_' + '_'.join(f'{w:g}' for w in weights))]


class ContrastSamples:
    """
    Posterior draws C^(m) = c' gamma*^(m) L of a contrast map, streamed in chunks of draws.

    Only the M' x R basis-space coefficients are stored; the voxel maps are formed chunk
    by chunk. mean_map and std_map (ddof 1) are accumulated in one pass (Welford/Chan merge).
    """

    def __init__(self, coefficients: np.ndarray, basis: BasisMaps, name: str = 'contrast',
                 chunk_size: int = CHUNK_SIZE):
        self.coefficients = np.atleast_2d(np.asarray(coefficients, dtype=np.float64))
        self.basis = basis
        self.name = name
        self.chunk_size = max(1, int(chunk_size))
        self.mean_map, self.std_map = self._moments()

    @property
    def n_samples(self) -> int:
        return self.coefficients.shape[0]

    @property
    def n_voxels(self) -> int:
        return self.basis.n_voxels

    def iter_chunks(self) -> Iterator[Tuple[int, np.ndarray]]:
        for start in range(0, self.n_samples, self.chunk_size):
            yield start, self.coefficients[start:start + self.chunk_size] @ self.basis.loading

    def dense(self) -> np.ndarray:
        return self.coefficients @ self.basis.loading

    def _moments(self):
        count = 0
        mean = np.zeros(self.n_voxels)
        m2 = np.zeros(self.n_voxels)
        for _, block in self.iter_chunks():
            n_b = block.shape[0]
            mean_b = block.mean(axis=0)
            m2_b = np.sum((block - mean_b) ** 2, axis=0)
            total = count + n_b
            delta = mean_b - mean
            mean = mean + delta * (n_b / total)
            m2 = m2 + m2_b + delta ** 2 * (count * n_b / total)
            count = total
        std = np.sqrt(m2 / (count - 1)) if count > 1 else np.full(self.n_voxels, np.nan)
        return mean, std


def contrast_samples(chain: McmcChain, basis: BasisMaps, contrast: ContrastSpec,
                     chunk_size: int = CHUNK_SIZE) -> ContrastSamples:
    """
    :param chain: posterior draws of gamma* (M' x p x R)
    :param basis: BasisMaps with the same rank
    :param contrast: p-vector of weights
    :return: ContrastSamples streaming c' gamma*^(m) L
    """
    if chain.rank != basis.rank:
        raise InvalidArgumentError(f'chain rank {chain.rank} does not match basis rank {basis.rank}')
    if contrast.weights.size != chain.p:
        raise InvalidArgumentError(f'contrast has {contrast.weights.size} weights, chain has {chain.p} covariates')
    coefficients = np.einsum('p,mpr->mr', contrast.weights, chain.gamma_star)
    return ContrastSamples(coefficients, basis, contrast.name, chunk_size)


def apply_mask(mask, spatial_dims: Sequence[int]) -> np.ndarray:
    """
    Flatten a 3-D boolean brain mask to the voxel order of the maps.
    :return: boolean Nv-vector
    """
    mask = np.asarray(mask).astype(bool)
    if tuple(mask.shape) != tuple(spatial_dims):
        raise InvalidArgumentError(f'mask dims {mask.shape} do not match spatial dims {tuple(spatial_dims)}')
    flat = mask.ravel(order='F')
    if not flat.any():
        raise DegeneratePosteriorError('mask selects no voxels')
    return flat


class SimBasResult:
    def __init__(self, mean_map, std_map, scale_map, z_quantiles, psimbas_map, alpha, mask, name='contrast'):
        self.mean_map = mean_map
        self.std_map = std_map
        self.scale_map = scale_map  # floored std used in the statistics
        self.z_quantiles = z_quantiles
        self.psimbas_map = psimbas_map
        self.alpha = float(alpha)
        self.mask = mask
        self.name = name

    @property
    def n_samples(self) -> int:
        return self.z_quantiles.size

    @property
    def flags(self) -> np.ndarray:
        return self.flags_at(self.alpha)

    @property
    def statistic(self) -> np.ndarray:
        return np.abs(self.mean_map) / self.scale_map

    def flags_at(self, alpha: float) -> np.ndarray:
        return (self.psimbas_map < alpha) & self.mask

    def quantile(self, alpha: Optional[float] = None) -> float:
        """
        q_(1-alpha): the order statistic z_(k) with k = M' - e, e the largest exceedance
        count with e / M' < alpha
        """
        alpha = self.alpha if alpha is None else alpha
        m = self.n_samples
        allowed = int(np.sum(np.arange(m + 1) / m < alpha)) - 1
        return float(self.z_quantiles[min(m, max(1, m - allowed)) - 1])

    def band(self, alpha: Optional[float] = None) -> Tuple[np.ndarray, np.ndarray]:
        """joint credible band mean -/+ q_(1-alpha) * std"""
        q = self.quantile(alpha)
        return self.mean_map - q * self.scale_map, self.mean_map + q * self.scale_map

    def excludes_zero(self, alpha: Optional[float] = None) -> np.ndarray:
        return (self.statistic > self.quantile(alpha)) & self.mask


def simbas(mean_map, std_map, samples, alpha: float = 0.01, mask=None, name: str = 'contrast') -> SimBasResult:
    """
    z^(m) = max over in-mask voxels of |C^(m)(v) - mean(v)| / s(v)
    P_SimBaS(v) = #{m : |mean(v)| / s(v) <= z^(m)} / M'
    with s(v) = max(std(v), 1e-12 * max std).
    :param mean_map: Nv posterior mean
    :param std_map: Nv posterior std
    :param samples: ContrastSamples or an M' x Nv array
    :param alpha: significance level of the flags
    :param mask: optional boolean Nv-vector (see apply_mask)
    :return: SimBasResult
    """
    mean_map = np.asarray(mean_map, dtype=np.float64).ravel()
    std_map = np.asarray(std_map, dtype=np.float64).ravel()
    if isinstance(samples, ContrastSamples):
        chunks, n_samples, n_voxels = samples.iter_chunks(), samples.n_samples, samples.n_voxels
    else:
        samples = np.atleast_2d(np.asarray(samples, dtype=np.float64))
        n_samples, n_voxels = samples.shape
        chunks = ((s, samples[s:s + CHUNK_SIZE]) for s in range(0, n_samples, CHUNK_SIZE))
    if mean_map.size != n_voxels or std_map.size != n_voxels:
        raise InvalidArgumentError(f'maps of length {mean_map.size}/{std_map.size} do not match {n_voxels} voxels')
    if n_samples < 2:
        raise InvalidArgumentError(f'need at least 2 posterior samples, got {n_samples}')
    if not 0 < alpha < 1:
        raise InvalidArgumentError(f'alpha must lie in (0, 1), got {alpha}')
    mask = np.ones(n_voxels, dtype=bool) if mask is None else np.asarray(mask, dtype=bool).ravel()
    if mask.size != n_voxels:
        raise InvalidArgumentError(f'mask has {mask.size} entries, maps have {n_voxels}')
    if not mask.any():
        raise DegeneratePosteriorError('mask selects no voxels')

    top = float(np.max(std_map[mask]))
    if not np.isfinite(top) or top <= 0.0:
        raise DegeneratePosteriorError('posterior std is zero at every voxel')
    scale = np.maximum(std_map, STD_FLOOR * top)

    z = np.empty(n_samples)
    for start, block in chunks:
        dev = np.abs(block[:, mask] - mean_map[mask]) / scale[mask]
        z[start:start + block.shape[0]] = dev.max(axis=1)
    z.sort()

    statistic = np.abs(mean_map) / scale
    exceed = n_samples - np.searchsorted(z, statistic, side='left')
    psimbas_map = exceed / n_samples
    psimbas_map[~mask] = 1.0
    result = SimBasResult(mean_map, std_map, scale, z, psimbas_map, alpha, mask, name)
    logger.info(f'{name}: {int(result.flags.sum())} of {int(mask.sum())} voxels flagged at alpha={alpha} '
                f'(q={result.quantile():.3f}, M\'={n_samples})')
    return result


# ------------------------------------------------------#
#                        clusters                       #
# ------------------------------------------------------#
class Cluster:
    def __init__(self, voxel_indices: np.ndarray, peak_voxel: tuple, peak_value: float):
        self.voxel_indices = voxel_indices
        self.peak_voxel = tuple(int(i) for i in peak_voxel)
        self.peak_value = float(peak_value)

    @property
    def size(self) -> int:
        return len(self.voxel_indices)

    def __repr__(self):
        return f'Cluster(size={self.size}, peak_voxel={self.peak_voxel}, peak_value={self.peak_value:.4g})'


def extract_clusters(flags, min_size: int = 125, connectivity: int = 6, mean_map=None) -> List[Cluster]:
    """
    Connected components of flagged voxels, largest first.
    :param flags: 3-D boolean map
    :param min_size: smallest cluster kept
    :param connectivity: 6 (faces) or 26 (faces, edges, corners)
    :param mean_map: 3-D map used for the peak voxel (max |value|)
    :return: list of Cluster
    """
    flags = np.asarray(flags).astype(bool)
    if flags.ndim != 3:
        raise InvalidArgumentError(f'flags must be a 3-D map, got order {flags.ndim}')
    if connectivity not in (6, 26):
        raise InvalidArgumentError(f'connectivity must be 6 or 26, got {connectivity}')
    if mean_map is not None:
        mean_map = np.asarray(mean_map, dtype=np.float64)
        if mean_map.shape != flags.shape:
            raise InvalidArgumentError(f'mean map dims {mean_map.shape} do not match flags {flags.shape}')
    structure = ndimage.generate_binary_structure(3, 1 if connectivity == 6 else 3)
    labels, n_labels = ndimage.label(flags, structure=structure)
    if n_labels == 0:
        return []
    sizes = np.bincount(labels.ravel())[1:]
    keep = [lab + 1 for lab in np.argsort(-sizes, kind='stable') if sizes[lab] >= min_size]

    clusters = []
    for lab in keep:
        voxels = np.argwhere(labels == lab)
        if mean_map is None:
            peak, value = voxels[0], np.nan
        else:
            values = mean_map[tuple(voxels.T)]
            best = int(np.argmax(np.abs(values)))
            peak, value = voxels[best], values[best]
        clusters.append(Cluster(voxels, peak, value))
    return clusters
