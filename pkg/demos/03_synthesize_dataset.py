"""
End-to-end dataset synthesis
============================

Runs every phase over a self-contained corpus with a polymorphic audit sink
and an exception path, then prints the labeled sequences the pipeline
emits -- all without executing the subject program.
"""

import json
import tempfile
from pathlib import Path

from logsynth.config import PipelineConfig
from logsynth.pipeline import run

SOURCE = """
class Gateway {
    static void forward(string user, int size) {
        try {
            Quota.reserve(size);
            log.info("forwarded {} bytes for {}", size, user);
        } catch (QuotaExceeded e) {
            log.warn("cannot forward for {}: quota", user);
        }
        calldyn Sink.deliver(user);
    }
}
class Quota {
    static void reserve(int size) throws QuotaExceeded {
        if (size > 2) {
            throw QuotaExceeded;
        }
        log.debug("reserved {} bytes", size);
    }
}
class PrimarySink {
    static void deliver(string user) {
        log.info("delivered to primary for {}", user);
    }
}
class MirrorSink {
    static void deliver(string user) {
        log.info("mirrored for {}", user);
    }
}
"""

META = {
    "interfaces": {"Sink": ["MirrorSink.deliver/1", "PrimarySink.deliver/1"]},
    "external": [],
    "domains": {"user": ["alice", "bob"], "size": [1, 4]},
}

# %% Write the corpus and run the whole pipeline with the deterministic
# rule-engine backend.
workdir = Path(tempfile.mkdtemp(prefix="logsynth-demo-"))
(workdir / "gateway.jsub").write_text(SOURCE, encoding="utf-8")
(workdir / "corpus.meta.json").write_text(json.dumps(META), encoding="utf-8")

config = PipelineConfig(
    corpus_paths=[str(workdir / "gateway.jsub")],
    meta_path=str(workdir / "corpus.meta.json"),
    out_dir=str(workdir / "out"),
)
summary = run(config)
for stage, info in summary.items():
    compact = {k: v for k, v in info.items() if not isinstance(v, (list, dict))}
    print(f"{stage:8s} {compact}")

# %% Each record carries the rendered events, the execution context that
# produced them (path, condition values, dispatch choice), and the anomaly
# label with its rule evidence.
print("\ndataset records:")
for line in Path(config.out_dir, "dataset.jsonl").read_text().splitlines():
    record = json.loads(line)
    dispatch = record["execution_context"]["dispatch"]
    values = record["execution_context"]["condition_values"]
    print(f"- {record['id']} [{record['anomaly_label']}] "
          f"inputs={values} dispatch={list(dispatch.values())}")
    for message in record["messages"]:
        print(f"    {message}")
    for ev in record["evidence"]:
        print(f"    evidence: {ev['rule']} matched {ev['matched']!r}")

print(Path(config.out_dir, "report.txt").read_text())
