"""
Log-oriented control flow graphs
================================

Builds the per-method CFG for a method with a branch, a loop, and an
exception handler; annotates each log point with its dominating branch
conditions; and enumerates the feasible paths with their log projections.
"""

from logsynth.corpus import parse_corpus_text
from logsynth.lcfg import annotate_lcfg, build_lcfg, render_constraint
from logsynth.paths import LoopPolicy, enumerate_paths

SOURCE = """
class Worker {
    static void drain(int n, boolean strict) {
        try {
            while (n > 0) {
                log.debug("draining, {} left", n);
                n = n - 1;
            }
            if (strict) {
                check();
            }
            log.info("drain complete");
        } catch (QueueCorruption e) {
            log.error("drain aborted: queue corrupt");
        }
    }
    static void check() throws QueueCorruption {
        throw QueueCorruption;
    }
}
"""

corpus = parse_corpus_text([("worker.jsub", SOURCE)])
cfg = build_lcfg(corpus.get("Worker.drain/2"))

# %% The graph in its deterministic text form (also exportable as DOT).
print(cfg.to_text())

# %% Annotation attaches the conjunction of dominating branch conditions to
# every log and call node, as pure metadata.
annotate_lcfg(cfg)
for node in cfg.log_nodes():
    conj = " && ".join(render_constraint(a) for a in node.constraints) or "true"
    print(f"log {node.log.template!r:38s} under [{conj}]")

# %% Path enumeration expands each loop 0, 1, and K times (K=2 here), so the
# projections show the loop-dependent prefix growing.
print("\npaths (log projections):")
for path in enumerate_paths(cfg, LoopPolicy(k=2)).paths:
    projection = [cfg.node(n).log.template for n in path.log_nodes(cfg)]
    tail = f" -> throws {path.termination}" if path.termination else ""
    print(f"  {projection}{tail}")
