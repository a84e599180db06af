"""
Command-line application for the action proposal engine.

Each subcommand runs one pipeline stage on files written by the previous
one; ``run`` chains them all in memory.
"""

import argparse
import logging
import sys
import traceback
from dataclasses import replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from .. import __version__
from ..core.actionness import fit_motion_models, load_gmm_pair, save_gmm_pair
from ..core.config import PipelineConfig, load_config
from ..core.errors import EXIT_INTERNAL_ERROR, EXIT_INPUT_ERROR, EXIT_OK, InputError, ProposalError, exit_code_for
from ..core.evaluation import evaluate, write_report
from ..core.formats import (read_detections, read_ground_truth, read_motion_samples, read_path_sets,
                            read_paths, read_tracks, read_proposals, write_detections, write_ground_truth,
                            write_path_sets, write_paths, write_proposals, write_tracks)
from ..core.pipeline import ProposalPipeline, video_seed, write_outputs
from ..core.profiles import find_profile, get_all_profiles
from ..core.synthetic import SCENARIO_PRESETS, ScenarioSpec, SyntheticAppearance, generate_scenario
from ..utils.log import setup_logging
from ..utils.system import ensure_directory

logger = logging.getLogger(__name__)


class ProposalApp:
    """Multi-command front end: generate, score, search, associate, complete, emit, evaluate, run."""

    PROG = "action-proposals"

    def __init__(self):
        self._parser = self._build_parser()
        self._commands: Dict[str, Callable[[argparse.Namespace, PipelineConfig], int]] = {
            "generate": self._cmd_generate,
            "score": self._cmd_score,
            "search": self._cmd_search,
            "associate": self._cmd_associate,
            "complete": self._cmd_complete,
            "emit": self._cmd_emit,
            "evaluate": self._cmd_evaluate,
            "run": self._cmd_run,
        }

    def _build_parser(self) -> argparse.ArgumentParser:
        common = argparse.ArgumentParser(add_help=False)
        common.add_argument("--config", help="JSON or TOML configuration file")
        profiles = ", ".join(p.name for p in get_all_profiles())
        common.add_argument("--profile", help=f"configuration profile ({profiles})")
        common.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE",
                            help="override one configuration value (repeatable)")
        common.add_argument("--seed", type=int, help="random seed")
        common.add_argument("--output", "-o", default=".", help="output directory")
        common.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-vv for debug)")

        parser = argparse.ArgumentParser(prog=self.PROG, description="Unsupervised spatio-temporal action proposals")
        parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
        sub = parser.add_subparsers(dest="command", required=True)

        gen = sub.add_parser("generate", parents=[common], help="write a synthetic scenario")
        source = gen.add_mutually_exclusive_group()
        source.add_argument("--preset", choices=sorted(SCENARIO_PRESETS), default="two-actor-crossing")
        source.add_argument("--spec", help="scenario description (JSON)")
        gen.add_argument("--count", type=int, default=1, help="number of videos, seeded consecutively")
        gen.add_argument("--frames", type=int, help="frames per video (presets only)")

        score = sub.add_parser("score", parents=[common], help="compute detection actionness")
        score.add_argument("--detections", required=True)
        models = score.add_mutually_exclusive_group()
        models.add_argument("--gmm", help="saved motion mixtures")
        models.add_argument("--fit", help="labeled motion samples to fit the mixtures from")
        models.add_argument("--fit-gt", help="ground truth used to label motion samples")
        score.add_argument("--save-gmm", help="write the fitted mixtures here")

        search = sub.add_parser("search", parents=[common], help="find candidate action paths")
        search.add_argument("--detections", required=True, help="scored detections")

        assoc = sub.add_parser("associate", parents=[common], help="group candidate paths into path sets")
        assoc.add_argument("--detections", required=True, help="scored detections")
        assoc.add_argument("--paths", required=True)

        complete = sub.add_parser("complete", parents=[common], help="split path sets into tracks and fill gaps")
        complete.add_argument("--detections", required=True, help="scored detections")
        complete.add_argument("--paths", required=True)
        complete.add_argument("--path-sets", required=True)
        complete.add_argument("--scenario", action="append", default=[],
                              help="scenario description providing window appearance (repeatable)")

        emit = sub.add_parser("emit", parents=[common], help="turn tracks into proposals")
        emit.add_argument("--tracks", required=True)

        ev = sub.add_parser("evaluate", parents=[common], help="score proposals against ground truth")
        ev.add_argument("--proposals", required=True)
        ev.add_argument("--ground-truth", required=True)

        run = sub.add_parser("run", parents=[common], help="run every stage end to end")
        run.add_argument("--detections", required=True)
        run.add_argument("--ground-truth", help="evaluate against this ground truth")
        run_models = run.add_mutually_exclusive_group()
        run_models.add_argument("--gmm", help="saved motion mixtures")
        run_models.add_argument("--fit-gt", action="store_true",
                                help="fit the motion mixtures from the ground truth first")
        run.add_argument("--scenario", action="append", default=[],
                         help="scenario description providing window appearance (repeatable)")
        return parser

    def _config(self, args: argparse.Namespace) -> PipelineConfig:
        base = find_profile(args.profile).apply_to_config() if args.profile else None
        return load_config(args.config, args.overrides, base, args.seed)

    def _output_dir(self, args: argparse.Namespace) -> str:
        if not ensure_directory(args.output):
            raise InputError(f"cannot create output directory {args.output}")
        return args.output

    def _output(self, args: argparse.Namespace, name: str) -> str:
        return str(Path(self._output_dir(args)) / name)

    def _on_progress(self, message: str, percent: int = -1) -> None:
        suffix = f" ({percent}%)" if percent >= 0 else ""
        print(f"--- {message}{suffix} ---", file=sys.stderr, flush=True)

    def _pipeline(self, config: PipelineConfig, gmm=None, scenarios: Sequence[str] = ()) -> ProposalPipeline:
        appearance = {}
        for path in scenarios:
            spec = ScenarioSpec.load(path)
            appearance[spec.video] = SyntheticAppearance(spec)
        pipeline = ProposalPipeline(config, gmm, appearance)
        pipeline.set_progress_callback(self._on_progress)
        return pipeline

    def run(self, argv: Optional[Sequence[str]] = None) -> int:
        """
        Parse arguments and execute one subcommand.

        Returns:
            Process exit code (0 success, 1 input error, 2 internal error)
        """
        try:
            args = self._parser.parse_args(argv)
        except SystemExit as e:
            return EXIT_OK if e.code in (0, None) else EXIT_INPUT_ERROR
        setup_logging(args.verbose)
        try:
            config = self._config(args)
            return self._commands[args.command](args, config)
        except ProposalError as e:
            print(f"{self.PROG}: error: {e}", file=sys.stderr, flush=True)
            if exit_code_for(e) == EXIT_INTERNAL_ERROR:
                logger.debug("Internal error details", exc_info=True)
            return exit_code_for(e)
        except Exception as e:
            print(f"CRITICAL ERROR: {e}", file=sys.stderr, flush=True)
            traceback.print_exc()
            return EXIT_INTERNAL_ERROR

    def _cmd_generate(self, args: argparse.Namespace, config: PipelineConfig) -> int:
        if args.count < 1:
            raise InputError(f"--count must be >= 1, got {args.count}")
        template = ScenarioSpec.load(args.spec) if args.spec else None
        first_seed = template.seed if template is not None and args.seed is None else config.seed
        specs: List[ScenarioSpec] = []
        for i in range(args.count):
            seed = first_seed + i
            if template is not None:
                spec = replace(template, seed=seed)
            else:
                kwargs = {"n_frames": args.frames} if args.frames else {}
                spec = SCENARIO_PRESETS[args.preset](seed=seed, **kwargs)
            if args.count > 1:
                spec.video = f"{spec.video}-{i:03d}"
            specs.append(spec.validate())

        scenarios = [generate_scenario(spec) for spec in specs]
        scenario_dir = Path(self._output(args, "scenarios"))
        ensure_directory(str(scenario_dir))
        for scenario in scenarios:
            scenario.spec.save(str(scenario_dir / f"{scenario.video}.json"))
        n = write_detections({s.video: s.frames for s in scenarios}, self._output(args, "detections.jsonl"),
                             include_actionness=False)
        write_ground_truth([g for s in scenarios for g in s.ground_truth], self._output(args, "ground_truth.jsonl"))
        logger.info(f"Generated {len(scenarios)} videos with {n} detections")
        return EXIT_OK

    def _cmd_score(self, args: argparse.Namespace, config: PipelineConfig) -> int:
        detections = read_detections(args.detections)
        gmm = None
        if args.gmm:
            gmm = load_gmm_pair(args.gmm)
        elif args.fit:
            samples = read_motion_samples(args.fit)
            gmm = fit_motion_models(samples.positives, samples.negatives, config.gmm, seed=config.seed,
                                    n_classes=samples.n_classes)
        pipeline = self._pipeline(config, gmm)
        if args.fit_gt:
            pipeline.fit_motion(detections, read_ground_truth(args.fit_gt))
        if args.save_gmm:
            if pipeline.gmm is None:
                raise InputError("--save-gmm needs --fit or --fit-gt")
            save_gmm_pair(pipeline.gmm[0], pipeline.gmm[1], args.save_gmm)
        if pipeline.gmm is None and config.scoring.lambda_p > 0:
            logger.warning("No motion mixtures available; scoring with the human detector alone")
        for video in sorted(detections):
            # Always recompute, even if the file already carried scores.
            for frame in detections[video]:
                for detection in frame:
                    detection.actionness = None
            pipeline.score(video, detections[video])
        write_detections(detections, self._output(args, "scored_detections.jsonl"))
        return EXIT_OK

    def _cmd_search(self, args: argparse.Namespace, config: PipelineConfig) -> int:
        detections = read_detections(args.detections)
        pipeline = self._pipeline(config)
        paths = {video: pipeline.search(frames) for video, frames in sorted(detections.items())}
        write_paths(paths, self._output(args, "paths.jsonl"))
        logger.info(f"Found {sum(len(p) for p in paths.values())} candidate paths")
        return EXIT_OK

    def _cmd_associate(self, args: argparse.Namespace, config: PipelineConfig) -> int:
        detections = read_detections(args.detections)
        paths = read_paths(args.paths, detections)
        pipeline = self._pipeline(config)
        path_sets = {}
        for video in sorted(paths):
            path_sets[video] = pipeline.associate(paths[video])
            for path_set in path_sets[video]:
                path_set.check_constraints()
        write_path_sets(path_sets, self._output(args, "path_sets.jsonl"))
        return EXIT_OK

    def _cmd_complete(self, args: argparse.Namespace, config: PipelineConfig) -> int:
        detections = read_detections(args.detections)
        paths = read_paths(args.paths, detections)
        path_sets = read_path_sets(args.path_sets, paths, config.association.max_paths, config.association.eta_p)
        pipeline = self._pipeline(config, scenarios=args.scenario)
        tracks = []
        for video in sorted(path_sets):
            rng = np.random.default_rng(video_seed(config.seed, video))
            tracks.extend(pipeline.complete(video, detections[video], path_sets[video], rng))
        write_tracks(tracks, self._output(args, "tracks.jsonl"))
        return EXIT_OK

    def _cmd_emit(self, args: argparse.Namespace, config: PipelineConfig) -> int:
        tracks = read_tracks(args.tracks)
        pipeline = self._pipeline(config)
        proposals = [p for video in sorted(tracks) for p in pipeline.emit(video, tracks[video])]
        write_proposals(proposals, self._output(args, "proposals.jsonl"))
        logger.info(f"Emitted {len(proposals)} proposals")
        return EXIT_OK

    def _cmd_evaluate(self, args: argparse.Namespace, config: PipelineConfig) -> int:
        report = evaluate(read_proposals(args.proposals), read_ground_truth(args.ground_truth), config.evaluation)
        write_report(report, self._output_dir(args))
        print(report.summary())
        return EXIT_OK

    def _cmd_run(self, args: argparse.Namespace, config: PipelineConfig) -> int:
        detections = read_detections(args.detections)
        ground_truth = read_ground_truth(args.ground_truth) if args.ground_truth else None
        if args.fit_gt and ground_truth is None:
            raise InputError("--fit-gt needs --ground-truth")
        gmm = load_gmm_pair(args.gmm) if args.gmm else None
        pipeline = self._pipeline(config, gmm, args.scenario)
        result = pipeline.run(detections, ground_truth, fit_motion=args.fit_gt)
        write_outputs(result, self._output_dir(args))
        for stage, seconds in result.timings.items():
            logger.info(f"{stage}: {seconds:.3f}s")
        if result.report is not None:
            print(result.report.summary())
        return EXIT_OK
