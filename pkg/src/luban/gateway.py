"""The only boundary to the vision-language model.

Stages exchange payloads in fenced blocks tagged by kind::

    ```components   one subcomponent description per line
    ```dsl          modeling source (subcomponent panels, or place lines)
    ```index        1-based candidate number, or the word none
    ```checks       check program JSON
    ```suggestion   free-text improvement notes

A select reply that contains no index block but says "none of the
candidates" selects nothing. Backends: ``live`` (HTTP chat), ``record``
(wraps another backend and writes transcripts), ``replay`` (answers from
transcripts keyed by stage and attempt) and ``scripted`` (in-memory queues,
used by tests and the transcript generator).
"""
from __future__ import annotations

import base64
import hashlib
import io
import json
import os
import re
import urllib.error
import urllib.request
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Protocol

from . import errors
from .dsl import CheckProgram, parse_checks

STAGES = ("decompose", "generate", "assemble", "select", "compile_checks", "reflect")
API_KEY_ENV = "LUBAN_VLM_API_KEY"

DEFAULT_K = 3
DEFAULT_RESAMPLE_ROUNDS = 2
DEFAULT_TEMPERATURE = 0.7
SLOT_RETRIES = 2

_PAYLOAD_TAG = {
    "decompose": "components",
    "generate": "dsl",
    "assemble": "dsl",
    "select": "index",
    "compile_checks": "checks",
    "reflect": "suggestion",
}


@dataclass(frozen=True)
class StageRequest:
    stage: str
    texts: tuple[str, ...] = ()
    images: tuple[str, ...] = ()
    k: int = 1
    temperature: float = DEFAULT_TEMPERATURE
    attempt: int = 0
    # where relative image paths live; not part of the request identity
    image_root: str = field(default="", compare=False)

    def __post_init__(self):
        if self.stage not in STAGES:
            raise ValueError(f"unknown stage {self.stage!r}")
        if self.k < 1:
            raise ValueError("sample count k must be >= 1")
        if self.stage == "select" and (self.k < 2 or len(self.images) != self.k):
            raise ValueError("select needs k >= 2 and exactly k candidate images")

    def identity(self) -> dict:
        return {"stage": self.stage, "texts": list(self.texts), "images": list(self.images),
                "k": self.k, "temperature": self.temperature, "attempt": self.attempt}

    def hash(self) -> str:
        blob = json.dumps(self.identity(), sort_keys=True, ensure_ascii=False).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()


@dataclass
class StageResponse:
    stage: str
    attempt: int
    raw: str
    payload: object


class Backend(Protocol):
    def complete(self, r: StageRequest) -> str: ...


# --------------------------------------------------------------------------
# payload extraction

_FENCE = re.compile(r"```([A-Za-z_]+)[ \t]*\n(.*?)```", re.S)
_NONE = re.compile(r"\bnone of the candidates\b", re.I)


def fenced(raw: str, tag: str) -> str | None:
    for m in _FENCE.finditer(raw):
        if m.group(1) == tag:
            return m.group(2)
    return None


def extract(stage: str, raw: str):
    """Pull the stage's payload out of a raw reply; ExtractionFailed if absent or malformed."""
    tag = _PAYLOAD_TAG[stage]
    body = fenced(raw, tag)
    if stage == "select":
        if body is None:
            if _NONE.search(raw):
                return None
            raise errors.ExtractionFailed("select reply has no index block")
        word = body.strip().lower()
        if word == "none":
            return None
        if not word.isdigit() or int(word) < 1:
            raise errors.ExtractionFailed(f"select index must be a positive integer or none, got {word!r}")
        return int(word)
    if body is None:
        raise errors.ExtractionFailed(f"{stage} reply has no ```{tag} block")
    if stage == "decompose":
        items = [ln.strip().lstrip("-*").strip() for ln in body.splitlines()]
        items = [s for s in items if s]
        if not items:
            raise errors.ExtractionFailed("decompose reply lists no subcomponents")
        return items
    if stage == "compile_checks":
        try:
            return parse_checks(body)
        except errors.LubanError as exc:
            raise errors.ExtractionFailed(f"checks block does not parse: {exc}") from exc
    if stage == "reflect":
        return body.strip()
    return body


def call(r: StageRequest, backend: Backend) -> StageResponse:
    raw = backend.complete(r)
    return StageResponse(r.stage, r.attempt, raw, extract(r.stage, raw))


# --------------------------------------------------------------------------
# backends

def transcript_path(root: Path | str, task: str, seed: int, stage: str, attempt: int) -> Path:
    return Path(root) / task / str(seed) / f"{stage}.{attempt}.json"


class ScriptedBackend:
    """Answers from per-stage queues: the n-th call of a stage gets entry n."""

    def __init__(self, queues: dict[str, list[str]]):
        self.queues = {k: list(v) for k, v in queues.items()}

    def complete(self, r: StageRequest) -> str:
        q = self.queues.get(r.stage, [])
        if r.attempt >= len(q):
            raise errors.TranscriptMiss(f"scripted backend has no reply for {r.stage}.{r.attempt}")
        return q[r.attempt]


class ReplayBackend:
    """Read-only transcript lookup keyed by (stage, attempt).

    With ``strict`` the stored request hash must match the request as well.
    """

    def __init__(self, root: Path | str, task: str, seed: int, strict: bool = False):
        self.root, self.task, self.seed, self.strict = Path(root), task, seed, strict

    def complete(self, r: StageRequest) -> str:
        path = transcript_path(self.root, self.task, self.seed, r.stage, r.attempt)
        if not path.is_file():
            raise errors.TranscriptMiss(f"no transcript entry {self.task}/{self.seed}/{r.stage}.{r.attempt}")
        doc = json.loads(path.read_text(encoding="utf-8"))
        if self.strict and doc.get("request_hash") != r.hash():
            raise errors.TranscriptMiss(f"request hash mismatch for {r.stage}.{r.attempt}")
        return doc["response_text"]


class RecordBackend:
    """Forward to ``inner`` and append each exchange to the transcript store."""

    def __init__(self, inner: Backend, root: Path | str, task: str, seed: int):
        self.inner, self.root, self.task, self.seed = inner, Path(root), task, seed

    def complete(self, r: StageRequest) -> str:
        text = self.inner.complete(r)
        path = transcript_path(self.root, self.task, self.seed, r.stage, r.attempt)
        path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"request_hash": r.hash(), "images": list(r.images), "response_text": text}
        path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return text


def _image_data_url(path: Path) -> str:
    try:
        from PIL import Image
    except ImportError:  # pragma: no cover - depends on the optional extra
        raise errors.BackendUnavailable("the live backend needs Pillow to transcode PPM renders") from None
    buf = io.BytesIO()
    with Image.open(path) as im:
        im.save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


class LiveBackend:
    """OpenAI-style chat completion over HTTP with interleaved text and images."""

    def __init__(self, endpoint: str, model: str, api_key: str | None = None, timeout: float = 120.0,
                 opener: Callable | None = None):
        self.endpoint, self.model, self.timeout = endpoint, model, timeout
        self.api_key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        self._open = opener or urllib.request.urlopen

    def body(self, r: StageRequest) -> dict:
        content: list[dict] = [{"type": "text", "text": f"[stage: {r.stage}]"}]
        content += [{"type": "text", "text": t} for t in r.texts]
        for img in r.images:
            url = _image_data_url(Path(r.image_root) / img)
            content.append({"type": "image_url", "image_url": {"url": url}})
        return {"model": self.model, "temperature": r.temperature,
                "messages": [{"role": "user", "content": content}]}

    def complete(self, r: StageRequest) -> str:
        if not self.endpoint:
            raise errors.BackendUnavailable("no endpoint configured for the live backend")
        if not self.api_key:
            raise errors.BackendUnavailable(f"set {API_KEY_ENV} to use the live backend")
        req = urllib.request.Request(
            self.endpoint, data=json.dumps(self.body(r)).encode("utf-8"), method="POST",
            headers={"Content-Type": "application/json", "Authorization": f"Bearer {self.api_key}"})
        try:
            with self._open(req, timeout=self.timeout) as resp:
                doc = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise errors.BackendUnavailable(f"request to {self.endpoint} failed: {exc}") from exc
        try:
            return doc["choices"][0]["message"]["content"]
        except (KeyError, IndexError, TypeError):
            raise errors.ExtractionFailed("chat response has no choices[0].message.content") from None


# --------------------------------------------------------------------------
# sampling

class AttemptCounter:
    """Per-stage attempt indices, shared by a whole run."""

    def __init__(self):
        self.counts: dict[str, int] = {}

    def next(self, stage: str) -> int:
        n = self.counts.get(stage, 0)
        self.counts[stage] = n + 1
        return n


@dataclass
class Candidate:
    slot: int
    attempt: int
    source: str
    value: object  # whatever the validator returned


@dataclass
class Rejection:
    slot: int
    attempt: int
    code: str
    message: str


@dataclass
class SampleResult:
    candidates: list[Candidate]
    rejected: list[Rejection]


def sample_candidates(r: StageRequest, backend: Backend, counter: AttemptCounter,
                      validate: Callable[[str], object], retries: int = SLOT_RETRIES) -> SampleResult:
    """Draw ``r.k`` candidates; an invalid one is retried up to ``retries`` times, then dropped."""
    out, rejected = [], []
    for slot in range(r.k):
        for _ in range(retries + 1):
            req = replace(r, attempt=counter.next(r.stage))
            try:
                resp = call(req, backend)
                value = validate(resp.payload)
            except errors.LubanError as exc:
                rejected.append(Rejection(slot, req.attempt, exc.code, exc.message))
                continue
            out.append(Candidate(slot, req.attempt, resp.payload, value))
            break
    if not out:
        raise errors.AllCandidatesInvalid(f"all {r.k} {r.stage} slots failed after retries")
    return SampleResult(out, rejected)


def checks_payload(resp: StageResponse) -> CheckProgram:
    assert resp.stage == "compile_checks"
    return resp.payload
