"""Replay a recorded agent run and read its reflection packets.

The Chinese house needs a second round: the first draft leaves the doorway
blocked, the check catches it, and the reflection suggestion fixes it.
"""
# %%
import json
import tempfile
from pathlib import Path

from luban.agent import run_task
from luban.gateway import ReplayBackend
from luban.tasks import data_dir, load_fixture

TASK = "chinese-ancient-house"
out = Path(tempfile.mkdtemp(prefix="luban-demo-"))
backend = ReplayBackend(data_dir() / "transcripts", TASK, 0, strict=True)
summary = run_task(load_fixture(TASK), backend, out)
print("pass rate by iteration:", summary.history)
print("run directory:", summary.root)

# %% [markdown]
# Each iteration leaves a packet with the failed checks and the suggestion
# that went into the next round.

# %%
for packet in sorted(summary.root.glob("iter*/packet.json")):
    doc = json.loads(packet.read_text())
    failed = [(f["id"], f["reason"]) for f in doc["failures"]]
    print(packet.parent.name, doc["pass_rate"], failed, repr(doc["suggestions"]))
