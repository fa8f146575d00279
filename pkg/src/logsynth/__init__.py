"""logsynth: execution-free synthesis of anomaly-labeled log sequences.

The pipeline turns a source corpus into a labeled dataset in four phases:
call-graph construction with log-method tagging and pruning; per-method
log-oriented control flow graphs with reasoner-verified enhancement;
bottom-up recursive merging of per-method log projections into full
sequences; and knowledge-rule anomaly annotation with agreement reporting.
"""

from .callgraph import (CallGraph, LogTag, MethodNode, build_call_graph,
                        import_call_graph, prune, tag_log_methods)
from .config import PipelineConfig
from .corpus import (Corpus, CorpusMeta, LogStatement, MethodSource,
                     list_log_statements, parse_corpus)
from .enhance import (EnhancedCfg, Ternary, augment_exception_paths,
                      associate_log_flow, constrain_and_verify,
                      enhance_ternary, match_and_complete_calls)
from .label import (AgreementReport, AnomalyRecord, RuleSet,
                    krippendorff_alpha, label_sequence, sample_for_review)
from .lcfg import (Lcfg, LcfgNode, NodeKind, Subgraph, annotate_lcfg,
                   build_lcfg, extract_subgraphs)
from .merge import (ExecutionContext, LogEvent, LogSequence,
                    enumerate_method_paths, merge_bottom_up,
                    optimize_sequences, verify_merge)
from .metrics import CoverageReport, coverage, coverage_ratio, increment, \
    r_coverage
from .paths import LoopPolicy, MethodPath
from .reasoner import (Reasoner, ReasonerRequest, ReasonerVerdict, RequestKind,
                       RuleEngine)

__version__ = "0.1.0"

__all__ = [
    "CallGraph", "LogTag", "MethodNode", "build_call_graph",
    "import_call_graph", "prune", "tag_log_methods",
    "PipelineConfig",
    "Corpus", "CorpusMeta", "LogStatement", "MethodSource",
    "list_log_statements", "parse_corpus",
    "EnhancedCfg", "Ternary", "augment_exception_paths", "associate_log_flow",
    "constrain_and_verify", "enhance_ternary", "match_and_complete_calls",
    "AgreementReport", "AnomalyRecord", "RuleSet", "krippendorff_alpha",
    "label_sequence", "sample_for_review",
    "Lcfg", "LcfgNode", "NodeKind", "Subgraph", "annotate_lcfg", "build_lcfg",
    "extract_subgraphs",
    "ExecutionContext", "LogEvent", "LogSequence", "enumerate_method_paths",
    "merge_bottom_up", "optimize_sequences", "verify_merge",
    "CoverageReport", "coverage", "coverage_ratio", "increment", "r_coverage",
    "LoopPolicy", "MethodPath",
    "Reasoner", "ReasonerRequest", "ReasonerVerdict", "RequestKind",
    "RuleEngine",
]
