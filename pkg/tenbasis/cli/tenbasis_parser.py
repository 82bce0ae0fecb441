#!/usr/bin/env python
# -*- coding: utf-8 -*-
"""
@file: tenbasis_parser.py
@description: command line interface of tenbasis
"""

import json
import os
import sys
import argparse

import numpy as np

from tenbasis.decomposition import cp_als
from tenbasis.exceptions import DataError, InvalidArgumentError, NumericalError
from tenbasis.fileio import load_response, write_covariates, write_cp_model, write_tensor
from tenbasis.params import PipelineConfig, read_config
from tenbasis.pipeline import load_for_fit, load_for_inference
from tenbasis.results import HandleResults
from tenbasis.simulator import SynthSpec, generate
from tenbasis.tb_logger import GetLogger, close_file_handlers, logger
from tenbasis.utils import timed

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def load_config(args) -> PipelineConfig:
    """
    Defaults, then the --config file, then command line flags (flags win).
    """
    cfg = PipelineConfig()
    if getattr(args, 'config', None):
        if not os.path.isfile(args.config):
            raise DataError(f'config file not found: {args.config}')
        cfg.update(read_config(args.config))
    flags = {key: value for key, value in vars(args).items() if key in cfg.as_dict()}
    return cfg.update(flags)


def start_run(cfg: PipelineConfig) -> str:
    out_dir = cfg.output
    if not os.path.exists(out_dir):
        os.makedirs(out_dir)
    GetLogger(os.path.join(out_dir, 'tenbasis.log'))
    return out_dir


def _floats(text: str) -> list:
    return [float(v) for v in text.split(',') if v.strip()]


def _int_list(text: str) -> list:
    try:
        return [int(v) for v in text.split(',')]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected comma separated integers, got {text!r}')


def _gamma_rows(text: str) -> list:
    try:
        rows = [_floats(row) for row in text.split(';')]
    except ValueError:
        raise argparse.ArgumentTypeError(f'expected rows of comma separated numbers, got {text!r}')
    if not rows[0] or any(len(row) != len(rows[0]) for row in rows):
        raise argparse.ArgumentTypeError(f'gamma rows must be non-empty and of equal length, got {text!r}')
    return rows


# ------------------------------------------------------#
#                  sub-command handlers                 #
# ------------------------------------------------------#
def simulate_command(args):
    cfg = load_config(args)
    out_dir = start_run(cfg)
    dims = args.dims
    design = [v.strip() for v in args.design.split(',')]
    rank = cfg.rank or 3
    gamma = None
    if args.gamma:
        gamma = np.array(args.gamma)
    spec = SynthSpec(dims, args.subjects, rank, design, gamma, args.noise_subject, args.noise_voxel, cfg.seed)
    with timed('simulate'):
        data = generate(spec)
        write_tensor(os.path.join(out_dir, 'Y.tnsr'), data.tensor)
        keep = [j for j, name in enumerate(data.covariate_names) if name != 'intercept']
        write_covariates(os.path.join(out_dir, 'covariates.csv'), data.design[:, keep],
                         [data.covariate_names[j] for j in keep], data.subject_ids)
        truth = data.truth
        write_tensor(os.path.join(out_dir, 'truth_weights.tnsr'), truth.weights)
        for k, factor in enumerate(truth.factors):
            write_tensor(os.path.join(out_dir, f'truth_factor{k + 1}.tnsr'), factor)
        write_tensor(os.path.join(out_dir, 'truth_gamma_star.tnsr'), truth.gamma_star)
        write_tensor(os.path.join(out_dir, 'truth_G.tnsr'), truth.G)
        maps = truth.coefficient_maps()
        write_tensor(os.path.join(out_dir, 'truth_maps.tnsr'),
                     np.reshape(maps.T, tuple(dims) + (spec.p,), order='F'))
        with open(os.path.join(out_dir, 'simulate.json'), 'w') as f:
            json.dump({'spatial_dims': dims, 'n_subjects': spec.n_subjects, 'rank': spec.rank, 'design': design,
                       'covariate_names': data.covariate_names, 'noise_subject_sd': spec.noise_subject_sd,
                       'noise_voxel_sd': spec.noise_voxel_sd, 'seed': spec.seed}, f, indent=4)
    logger.info(f'simulated dataset written to {out_dir}')


def decompose_command(args):
    cfg = load_config(args)
    if cfg.rank is None:
        raise InvalidArgumentError('decompose needs --rank')
    if not cfg.tensor:
        raise InvalidArgumentError('decompose needs --tensor')
    out_dir = start_run(cfg)
    with timed('decompose'):
        tensor, _ = load_response(cfg.tensor)
        model = cp_als(tensor, cfg.rank, cfg.validate().als_config())
        write_cp_model(model, out_dir)


def rank_cv_command(args):
    cfg = load_config(args).validate()
    out_dir = start_run(cfg)
    with timed('rank-cv'):
        reg = load_for_fit(cfg)
        result = reg.select_rank(out_dir)
    print(result.to_frame().to_string(index=False))


def fit_command(args):
    cfg = load_config(args).validate(need_rank_source=True)
    out_dir = start_run(cfg)
    with timed('fit'):
        reg = load_for_fit(cfg)
        reg.fit(out_dir)


def infer_command(args):
    cfg = load_config(args).validate()
    out_dir = start_run(cfg)
    with timed('infer'):
        reg = load_for_inference(cfg.fit_dir or out_dir, cfg)
        reg.infer(out_dir=out_dir)


def report_command(args):
    cfg = load_config(args)
    run_dir = args.run_dir or cfg.output
    if not os.path.isdir(run_dir):
        raise DataError(f'run directory not found: {run_dir}')
    GetLogger(os.path.join(run_dir, 'tenbasis.log'))
    handler = HandleResults(run_dir)
    print(handler.summary(), end='')
    logger.info(f'report written to {handler.to_report()}')


# ------------------------------------------------------#
#                    argument groups                    #
# ------------------------------------------------------#
def add_io_parameters(parser, need_data=True):
    group = parser.add_argument_group("input/output arguments")
    group.add_argument(
        "--config",
        type=str,
        default=None,
        help="key = value configuration file, command line flags override it.",
    )
    if need_data:
        group.add_argument(
            "-t",
            "--tensor",
            type=str,
            default=None,
            help="response: a .tnsr file (p1 x p2 x p3 x N) or a text file listing one .nii volume per subject.",
        )
        group.add_argument(
            "-c",
            "--covariates",
            type=str,
            default=None,
            help="covariate csv, first column subject_id, remaining columns numeric.",
        )
        group.add_argument(
            "--no_intercept",
            dest="intercept",
            action="store_const",
            const=False,
            default=None,
            help="do not prepend an intercept column to the design.",
        )
    group.add_argument(
        "-o",
        "--output",
        type=str,
        default=None,
        help="output directory (default: tenbasis_out).",
    )
    return parser


def add_computation_parameters(parser):
    group = parser.add_argument_group("computation arguments")
    group.add_argument(
        "--seed",
        type=int,
        default=None,
        help="seed for generating random numbers (default: 0)",
    )
    group.add_argument(
        "--num_workers",
        type=int,
        default=None,
        help="parallel workers for the rank search (default: 1)",
    )
    return parser


def add_als_parameters(parser):
    group = parser.add_argument_group("CP decomposition arguments")
    group.add_argument(
        "--max_iters",
        type=int,
        default=None,
        help="maximum ALS sweeps (default: 500)",
    )
    group.add_argument(
        "--tol",
        type=float,
        default=None,
        help="stop when the relative fit changes by less than this (default: 1e-8)",
    )
    group.add_argument(
        "--init",
        type=str,
        choices=["hosvd", "random"],
        default=None,
        help="factor initialization (default: hosvd)",
    )
    return parser


def add_cv_parameters(parser):
    group = parser.add_argument_group("rank selection arguments")
    group.add_argument(
        "--ranks",
        type=str,
        default=None,
        help="candidate ranks, 'a,b,c' or 'start:stop:step' (default: 10:80:5)",
    )
    group.add_argument(
        "--folds",
        type=int,
        default=None,
        help="cross-validation folds (default: 10)",
    )
    return parser


def add_bayes_parameters(parser):
    group = parser.add_argument_group("posterior sampling arguments")
    group.add_argument(
        "--n_total",
        type=int,
        default=None,
        help="total sampler iterations (default: 2000)",
    )
    group.add_argument(
        "--burn_in",
        type=int,
        default=None,
        help="discarded leading iterations (default: 500)",
    )
    group.add_argument(
        "--thin",
        type=int,
        default=None,
        help="keep every thin-th iteration after burn-in (default: 1)",
    )
    group.add_argument(
        "--prior_precision",
        type=float,
        default=None,
        help="prior precision of gamma*, L0 = precision * I (default: 1e-6)",
    )
    group.add_argument(
        "--prior_scale",
        type=float,
        default=None,
        help="inverse Wishart scale, V0 = scale * I (default: 1)",
    )
    group.add_argument(
        "--prior_df_offset",
        type=float,
        default=None,
        help="inverse Wishart degrees of freedom, nu0 = R + offset (default: 2)",
    )
    return parser


def add_simbas_parameters(parser):
    group = parser.add_argument_group("voxel inference arguments")
    group.add_argument(
        "--fit_dir",
        type=str,
        default=None,
        help="directory written by 'fit' (default: the output directory)",
    )
    group.add_argument(
        "--contrast",
        type=str,
        default=None,
        help="'all', a covariate name, weights '0,1' or 'label=1,-1' (default: intercept)",
    )
    group.add_argument(
        "--alpha",
        type=float,
        default=None,
        help="flag voxels with P_SimBaS < alpha (default: 0.01)",
    )
    group.add_argument(
        "--min_cluster_size",
        type=int,
        default=None,
        help="smallest reported cluster, in voxels (default: 125)",
    )
    group.add_argument(
        "--connectivity",
        type=int,
        choices=[6, 26],
        default=None,
        help="voxel neighbourhood of clusters (default: 6)",
    )
    group.add_argument(
        "--mask",
        type=str,
        default=None,
        help="brain mask volume (.tnsr or .nii), nonzero voxels are tested",
    )
    group.add_argument(
        "--nifti",
        action="store_const",
        const=True,
        default=None,
        help="also write result maps as NIfTI-1 files",
    )
    return parser


def create_argument_parser():
    parser = argparse.ArgumentParser(
        prog='tenbasis',
        description="Tensor function-on-scalar regression of 3-D volumes with simultaneous credible bands",
        fromfile_prefix_chars="@",
        add_help=True,
        epilog="Arguments can be read from file using a @args.txt construct. "
    )

    subparsers = parser.add_subparsers(help="sub-command help")

    # --------------------------------------------
    # create the parser for the "simulate" command
    # --------------------------------------------
    parser_sim = subparsers.add_parser(
        "simulate", help="Generate a synthetic dataset with known low-rank structure and covariate effects."
    )
    parser_sim.add_argument(
        "--dims",
        type=_int_list,
        default="10,12,8",
        help="spatial dims p1,p2,p3 (default: 10,12,8)",
    )
    parser_sim.add_argument(
        "--subjects",
        type=int,
        default=20,
        help="number of subjects (default: 20)",
    )
    parser_sim.add_argument(
        "-r",
        "--rank",
        type=int,
        default=None,
        help="true CP rank (default: 3)",
    )
    parser_sim.add_argument(
        "--design",
        type=str,
        default="intercept,binary",
        help="design columns among intercept, binary, continuous (default: intercept,binary)",
    )
    parser_sim.add_argument(
        "--gamma",
        type=_gamma_rows,
        default=None,
        help="true basis-space effects, rows separated by ';', e.g. '5,5,5;0,0,0' (default: standard normal)",
    )
    parser_sim.add_argument(
        "--noise_subject",
        type=float,
        default=0.0,
        help="sd of the noise added to the subject scores G",
    )
    parser_sim.add_argument(
        "--noise_voxel",
        type=float,
        default=0.0,
        help="sd of the voxelwise noise",
    )
    add_io_parameters(parser_sim, need_data=False)
    add_computation_parameters(parser_sim)
    parser_sim.set_defaults(func=simulate_command)

    # --------------------------------------------
    # create the parser for the "decompose" command
    # --------------------------------------------
    parser_dec = subparsers.add_parser("decompose", help="CP decomposition of a tensor file.")
    parser_dec.add_argument(
        "-r",
        "--rank",
        type=int,
        default=None,
        help="number of CP components",
    )
    add_io_parameters(parser_dec)
    add_als_parameters(parser_dec)
    add_computation_parameters(parser_dec)
    parser_dec.set_defaults(func=decompose_command)

    # --------------------------------------------
    # create the parser for the "rank-cv" command
    # --------------------------------------------
    parser_cv = subparsers.add_parser("rank-cv", help="Choose the CP rank by k-fold cross-validation.")
    add_io_parameters(parser_cv)
    add_cv_parameters(parser_cv)
    add_als_parameters(parser_cv)
    add_bayes_parameters(parser_cv)
    add_computation_parameters(parser_cv)
    parser_cv.set_defaults(func=rank_cv_command)

    # --------------------------------------------
    # create the parser for the "fit" command
    # --------------------------------------------
    parser_fit = subparsers.add_parser(
        "fit", help="CP basis, projection and posterior sampling; persists the model and the chain."
    )
    parser_fit.add_argument(
        "-r",
        "--rank",
        type=int,
        default=None,
        help="use this CP rank",
    )
    parser_fit.add_argument(
        "--cv",
        action="store_const",
        const=True,
        default=None,
        help="choose the rank by cross-validation first",
    )
    parser_fit.add_argument(
        "--n_chains",
        type=int,
        default=None,
        help="independent posterior chains, pooled in chain order (default: 1)",
    )
    add_io_parameters(parser_fit)
    add_cv_parameters(parser_fit)
    add_als_parameters(parser_fit)
    add_bayes_parameters(parser_fit)
    add_computation_parameters(parser_fit)
    parser_fit.set_defaults(func=fit_command)

    # --------------------------------------------
    # create the parser for the "infer" command
    # --------------------------------------------
    parser_infer = subparsers.add_parser(
        "infer", help="Contrast maps, P_SimBaS, flags, credible bands and clusters from a fitted chain."
    )
    add_io_parameters(parser_infer, need_data=False)
    add_simbas_parameters(parser_infer)
    parser_infer.set_defaults(func=infer_command)

    # --------------------------------------------
    # create the parser for the "report" command
    # --------------------------------------------
    parser_report = subparsers.add_parser("report", help="Summarize a run directory into report.txt.")
    parser_report.add_argument(
        "run_dir",
        type=str,
        nargs="?",
        default=None,
        help="run directory (default: the output directory)",
    )
    add_io_parameters(parser_report, need_data=False)
    parser_report.set_defaults(func=report_command)

    return parser


def main(argv=None) -> int:
    # Parse arguments.
    parser = create_argument_parser()
    try:
        args = parser.parse_args(args=argv)
    except SystemExit as e:
        return EXIT_OK if e.code in (None, 0) else EXIT_USAGE
    if not hasattr(args, "func"):
        parser.print_help()
        return EXIT_USAGE
    GetLogger()
    attached = list(logger.handlers)
    try:
        args.func(args)
    except InvalidArgumentError as e:
        logger.error(f'invalid argument: {e}')
        return EXIT_USAGE
    except (DataError, OSError) as e:
        logger.error(f'data error: {e}')
        return EXIT_DATA
    except (NumericalError, np.linalg.LinAlgError) as e:
        logger.error(f'numerical error: {e}')
        return EXIT_NUMERICAL
    finally:
        close_file_handlers(keep=attached)
    return EXIT_OK


if __name__ == '__main__':
    sys.exit(main())
