#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/params.py
"""
Parameter holders and the flat key=value configuration file.
"""
from typing import Optional, Sequence

from .exceptions import InvalidArgumentError

ALS_INITS = ('hosvd', 'random')
CONNECTIVITIES = (6, 26)


class AlsConfig:
    def __init__(self, max_iters: int = 500, tol: float = 1e-8, init: str = 'hosvd', seed: int = 0):
        if int(max_iters) < 1:
            raise InvalidArgumentError(f'max_iters must be >= 1, got {max_iters}')
        if not tol > 0:
            raise InvalidArgumentError(f'tol must be > 0, got {tol}')
        self.max_iters = int(max_iters)
        self.tol = float(tol)
        self.init = None
        self.set_init(init)
        self.seed = int(seed)

    def set_init(self, init):
        if init in ALS_INITS:
            self.init = init
        else:
            raise InvalidArgumentError(f"Invalid init: {init}. Valid options are {', '.join(ALS_INITS)}.")

    def with_seed(self, seed: int) -> 'AlsConfig':
        return AlsConfig(self.max_iters, self.tol, self.init, seed)


class ChainConfig:
    def __init__(self, n_total: int = 2000, burn_in: int = 500, thin: int = 1):
        if not int(n_total) > int(burn_in) >= 0:
            raise InvalidArgumentError(f'need n_total > burn_in >= 0, got n_total={n_total}, burn_in={burn_in}')
        if int(thin) < 1:
            raise InvalidArgumentError(f'thin must be >= 1, got {thin}')
        if (int(n_total) - int(burn_in)) // int(thin) < 1:
            raise InvalidArgumentError(f'chain keeps no draws: n_total={n_total}, burn_in={burn_in}, thin={thin}')
        self.n_total = int(n_total)
        self.burn_in = int(burn_in)
        self.thin = int(thin)

    @property
    def n_retained(self) -> int:
        return (self.n_total - self.burn_in) // self.thin


class PriorConfig:
    """
    Recipe for the default conjugate prior of a (p, R) problem:
    g0 = 0, L0 = precision * I_p, V0 = scale * I_R, nu0 = R + df_offset
    """

    def __init__(self, precision: float = 1e-6, scale: float = 1.0, df_offset: float = 2.0):
        if precision < 0 or scale <= 0:
            raise InvalidArgumentError('prior precision must be >= 0 and scale > 0')
        if df_offset <= -1:
            raise InvalidArgumentError('prior df_offset must exceed -1 so that nu0 > R - 1')
        self.precision = float(precision)
        self.scale = float(scale)
        self.df_offset = float(df_offset)

    def spec(self, p: int, rank: int):
        from .bayes import PriorSpec
        return PriorSpec.default(p, rank, precision=self.precision, scale=self.scale, df_offset=self.df_offset)


class CvConfig:
    def __init__(self, folds: int = 10, ranks: Sequence[int] = tuple(range(10, 81, 5)), seed: int = 0,
                 als: Optional[AlsConfig] = None, prior: Optional[PriorConfig] = None,
                 chain: Optional[ChainConfig] = None, num_workers: int = 1):
        ranks = [int(r) for r in ranks]
        if int(folds) < 2:
            raise InvalidArgumentError(f'folds must be >= 2, got {folds}')
        if not ranks or min(ranks) < 1:
            raise InvalidArgumentError(f'ranks must be a nonempty list of positive integers, got {ranks}')
        self.folds = int(folds)
        self.ranks = sorted(set(ranks))
        self.seed = int(seed)
        self.als = als or AlsConfig()
        self.prior = prior or PriorConfig()
        self.chain = chain or ChainConfig()
        self.num_workers = max(1, int(num_workers))


# ------------------------------------------------------#
#                 pipeline configuration                #
# ------------------------------------------------------#
def _to_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ('1', 'true', 'yes', 'on'):
        return True
    if text in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError(f'not a boolean: {value!r}')


def _to_ranks(value) -> list:
    if isinstance(value, (list, tuple)):
        return [int(v) for v in value]
    text = str(value).strip()
    if ':' in text:
        start, stop, step = (int(v) for v in text.split(':'))
        return list(range(start, stop + 1, step))
    return [int(v) for v in text.split(',') if v.strip()]


def _to_optional_str(value):
    if value is None:
        return None
    text = str(value).strip()
    return text or None


def _to_optional_int(value):
    if value is None or str(value).strip() in ('', 'none', 'None'):
        return None
    return int(value)


# key: (converter, default)
SCHEMA = {
    'tensor': (_to_optional_str, None),
    'covariates': (_to_optional_str, None),
    'output': (str, 'tenbasis_out'),
    'fit_dir': (_to_optional_str, None),
    'intercept': (_to_bool, True),
    'rank': (_to_optional_int, None),
    'cv': (_to_bool, False),
    'ranks': (_to_ranks, list(range(10, 81, 5))),
    'folds': (int, 10),
    'max_iters': (int, 500),
    'tol': (float, 1e-8),
    'init': (str, 'hosvd'),
    'prior_precision': (float, 1e-6),
    'prior_scale': (float, 1.0),
    'prior_df_offset': (float, 2.0),
    'n_total': (int, 2000),
    'burn_in': (int, 500),
    'thin': (int, 1),
    'n_chains': (int, 1),
    'contrast': (str, 'intercept'),
    'alpha': (float, 0.01),
    'min_cluster_size': (int, 125),
    'connectivity': (int, 6),
    'mask': (_to_optional_str, None),
    'nifti': (_to_bool, False),
    'seed': (int, 0),
    'num_workers': (int, 1),
}


class PipelineConfig:
    def __init__(self, **kwargs):
        for key, (_, default) in SCHEMA.items():
            setattr(self, key, list(default) if isinstance(default, list) else default)
        self.update(kwargs)

    def update(self, values: dict):
        """
        Overwrite keys with typed values; None values are skipped so unset CLI flags keep config-file values.
        """
        for key, value in values.items():
            if key not in SCHEMA:
                raise InvalidArgumentError(f'unknown configuration key: {key}')
            if value is None:
                continue
            converter = SCHEMA[key][0]
            try:
                setattr(self, key, converter(value))
            except (TypeError, ValueError) as e:
                raise InvalidArgumentError(f'bad value for {key}: {value!r} ({e})') from e
        return self

    def get_param(self, keyword, default=None):
        return getattr(self, keyword, default)

    def as_dict(self) -> dict:
        return {key: getattr(self, key) for key in SCHEMA}

    def validate(self, need_rank_source: bool = False):
        if not 0 < self.alpha < 1:
            raise InvalidArgumentError(f'alpha must lie in (0, 1), got {self.alpha}')
        if self.connectivity not in CONNECTIVITIES:
            raise InvalidArgumentError(f'connectivity must be 6 or 26, got {self.connectivity}')
        if self.min_cluster_size < 1:
            raise InvalidArgumentError(f'min_cluster_size must be >= 1, got {self.min_cluster_size}')
        if need_rank_source and (self.rank is None) == (not self.cv):
            raise InvalidArgumentError('specify exactly one of rank or cv')
        if self.rank is not None and self.rank < 1:
            raise InvalidArgumentError(f'rank must be >= 1, got {self.rank}')
        if self.n_chains < 1:
            raise InvalidArgumentError(f'n_chains must be >= 1, got {self.n_chains}')
        # constructing the sub-configs runs their own checks
        self.als_config()
        self.chain_config()
        self.prior_config()
        return self

    def als_config(self) -> AlsConfig:
        return AlsConfig(self.max_iters, self.tol, self.init, self.seed)

    def chain_config(self) -> ChainConfig:
        return ChainConfig(self.n_total, self.burn_in, self.thin)

    def prior_config(self) -> PriorConfig:
        return PriorConfig(self.prior_precision, self.prior_scale, self.prior_df_offset)

    def cv_config(self) -> CvConfig:
        return CvConfig(self.folds, self.ranks, self.seed, self.als_config(), self.prior_config(),
                        self.chain_config(), self.num_workers)


def read_config(path: str) -> dict:
    """
    Read a flat key = value file. '#' starts a comment.
    :param path: config file name
    :return: dict of raw string values
    """
    values = {}
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split('#', 1)[0].strip()
            if not line:
                continue
            if '=' not in line:
                raise InvalidArgumentError(f'{path}:{lineno}: expected key = value, got {line!r}')
            key, value = (s.strip() for s in line.split('=', 1))
            key = key.replace('-', '_')
            if key not in SCHEMA:
                raise InvalidArgumentError(f'{path}:{lineno}: unknown configuration key {key!r}')
            values[key] = value
    return values
