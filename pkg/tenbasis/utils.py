#!/usr/bin/env python
# -*- coding: utf-8 -*-
# @File: tenbasis/utils.py
"""
Seeded random streams.

Child streams are derived as parent XOR (golden-ratio constant * index), so folds,
ranks and chains each own a reproducible generator.
"""
import time
from contextlib import contextmanager

import numpy as np

from .tb_logger import logger

GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1


def derive_seed(seed: int, stream_index: int) -> int:
    """
    child_seed = parent_seed XOR (0x9E3779B97F4A7C15 * stream_index), modulo 2**64
    :param seed: parent seed, 64-bit unsigned
    :param stream_index: index of the child stream
    :return: child seed
    """
    return (int(seed) ^ ((GOLDEN_GAMMA * int(stream_index)) & MASK64)) & MASK64


def random_state(seed: int) -> np.random.Generator:
    """PCG64 generator seeded from a 64-bit unsigned integer"""
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))


@contextmanager
def timed(task: str):
    start = time.perf_counter()
    yield
    logger.info(f'{task} finished in {time.perf_counter() - start:.2f} s')
