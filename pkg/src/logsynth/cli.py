"""Command-line entry point.

`logsynth run` executes the whole pipeline; each stage also exists as its
own subcommand operating on the persisted artifacts of the previous stage,
and composing the subcommands reproduces `run` byte for byte.

Exit codes: 0 success, 1 usage/config error, 2 stage failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import fields

from . import pipeline
from .config import PipelineConfig
from .errors import ConfigError, LogsynthError, MissingUpstreamArtifactError


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(1)


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file")
    parser.add_argument("--corpus", nargs="*", metavar="PATH",
                        help="source files (.jsub)")
    parser.add_argument("--meta", help="corpus.meta.json path")
    parser.add_argument("--import-graph", dest="import_graph",
                        help="CSV edge list to import instead of building")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--entry-threshold", type=int)
    parser.add_argument("--depth-threshold", type=int)
    parser.add_argument("--loop-k", type=int)
    parser.add_argument("--path-budget", type=int)
    parser.add_argument("--backend", choices=["rule-engine", "llm"])
    parser.add_argument("--llm-endpoint")
    parser.add_argument("--llm-model")
    parser.add_argument("--credential-env")
    parser.add_argument("--cache-dir")
    parser.add_argument("--rules", help="rule-set JSON file")
    parser.add_argument("--reference-templates",
                        help="template-per-line reference dataset")
    parser.add_argument("--annotations",
                        help="reviewer annotation CSV (item,annotator,label)")
    parser.add_argument("--review-rate", dest="review_rate", type=float)
    parser.add_argument("--seed", type=int)


_FLAG_TO_FIELD = {
    "corpus": "corpus_paths",
    "meta": "meta_path",
    "import_graph": "import_graph_path",
    "out": "out_dir",
    "entry_threshold": "entry_threshold",
    "depth_threshold": "depth_threshold",
    "loop_k": "loop_k",
    "path_budget": "path_budget",
    "backend": "reasoner_backend",
    "llm_endpoint": "llm_endpoint",
    "llm_model": "llm_model",
    "credential_env": "credential_env",
    "cache_dir": "cache_dir",
    "rules": "rules_path",
    "reference_templates": "reference_templates_path",
    "annotations": "annotations_path",
    "review_rate": "review_rate",
    "seed": "seed",
}


def build_config(args: argparse.Namespace) -> PipelineConfig:
    """Precedence: flag > config file > default."""
    config = (PipelineConfig.from_file(args.config) if args.config
              else PipelineConfig())
    valid_fields = {f.name for f in fields(PipelineConfig)}
    for flag, field_name in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None and field_name in valid_fields:
            setattr(config, field_name, value)
    return config


STAGE_FUNCS = {
    "parse": pipeline.stage_parse,
    "graph": pipeline.stage_graph,
    "prune": pipeline.stage_prune,
    "extract": pipeline.stage_extract,
    "enhance": pipeline.stage_enhance,
    "merge": pipeline.stage_merge,
    "label": pipeline.stage_label,
    "report": pipeline.stage_report,
}


def main(argv=None) -> int:
    parser = _Parser(prog="logsynth",
                     description="execution-free log sequence synthesis")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ["run"] + list(STAGE_FUNCS):
        stage_parser = sub.add_parser(name)
        _add_config_flags(stage_parser)

    args = parser.parse_args(argv)
    try:
        config = build_config(args)
    except (ConfigError, OSError, json.JSONDecodeError) as exc:
        print(f"logsynth: config error: {exc}", file=sys.stderr)
        return 1

    try:
        if args.command == "run":
            summary = pipeline.run(config)
            for stage, info in summary.items():
                compact = ", ".join(f"{k}={v}" for k, v in info.items()
                                    if not isinstance(v, (list, dict)))
                print(f"{stage:8s} {compact}")
        else:
            if args.command == "parse":
                config.validate()
            info = STAGE_FUNCS[args.command](config)
            compact = ", ".join(f"{k}={v}" for k, v in info.items()
                                if not isinstance(v, (list, dict)))
            print(f"{args.command}: {compact}")
    except ConfigError as exc:
        print(f"logsynth: config error: {exc}", file=sys.stderr)
        return 1
    except MissingUpstreamArtifactError as exc:
        print(f"logsynth: {args.command}: {exc}", file=sys.stderr)
        return 2
    except LogsynthError as exc:
        print(f"logsynth: {args.command} failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
