"""Deterministic scenario replay producing a line-oriented transcript."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from consert.dsl import DslError, load_document
from consert.dsl.parser import SourceDocument, parse
from consert.events import Expect, Load, Root, Scenario, Step
from consert.model import Catalog, SystemManifest
from consert.runtime.registry import Registry, RegistryError
from consert.runtime.session import (
    Session,
    SessionError,
    UnresolvableManifest,
    apply_event,
    format_delta,
)

logger = logging.getLogger(__name__)


class ReplayError(Exception):
    """Scenario cannot be run at all (missing files, bad documents, unknown systems)."""

    def __init__(self, message: str, diagnostics=()):
        super().__init__(message)
        self.diagnostics = list(diagnostics)


@dataclass(frozen=True)
class TranscriptLine:
    seq: int
    event: str
    delta: str
    verdict: str

    @property
    def failed(self) -> bool:
        return self.verdict != "ok" and self.verdict != "PASS"

    def __str__(self) -> str:
        return f"{self.seq}\t{self.event}\t{self.delta}\t{self.verdict}"


@dataclass
class Transcript:
    lines: list[TranscriptLine] = field(default_factory=list)
    session: Optional[Session] = None

    @property
    def failures(self) -> int:
        return sum(1 for ln in self.lines if ln.failed)

    def text(self) -> str:
        return "".join(f"{ln}\n" for ln in self.lines)


def _load(step: Load, base_dir: Path):
    path = base_dir / step.path
    if not path.is_file():
        raise ReplayError(f"cannot find {step.path!r} (relative to {base_dir})")
    try:
        return load_document(path)
    except DslError as exc:
        raise ReplayError(f"{step.path} does not parse", exc.diagnostics) from None


def replay(scenario: Scenario, registry: Registry, base_dir=".") -> Transcript:
    """Run ``scenario`` against ``registry``.

    ``load`` steps install the catalog or publish manifests; ``event`` steps
    go through :func:`apply_event`; ``expect`` steps compare the latest
    achieved order. Failed expectations and rejected events are reported in
    the transcript and replay continues.
    """
    base_dir = Path(base_dir)
    catalog: Optional[Catalog] = None
    root = None
    session: Optional[Session] = None
    out = Transcript()
    seq = 0

    for step in scenario.steps:
        if isinstance(step, Load):
            doc = _load(step, base_dir)
            if isinstance(doc, Catalog):
                if session is not None and session.catalog != doc:
                    raise ReplayError("the catalog cannot change once events have been applied")
                catalog = doc
            elif isinstance(doc, SystemManifest):
                if catalog is None:
                    raise ReplayError(f"load a catalog before manifest {step.path}")
                try:
                    registry.publish(doc, catalog)
                except RegistryError as exc:
                    raise ReplayError(f"{step.path}: {exc}", exc.diagnostics) from None
            else:
                raise ReplayError(f"{step.path}: scenarios cannot load other scenarios")
            continue
        if isinstance(step, Root):
            root = (step.system_id, step.service_type)
            if session is not None:
                session = session.with_root(root)
            continue

        assert isinstance(step, Step)
        if session is None:
            if catalog is None:
                raise ReplayError("scenario applies events before loading a catalog")
            session = Session.start(catalog, registry, root)
        seq += 1
        action = step.action
        if isinstance(action, Expect):
            key = (action.system_id, action.service_type)
            got = session.result[key].order if key in session.result else "absent"
            if got == action.order:
                verdict = "PASS"
            else:
                want = "none" if action.order is None else f"order {action.order}"
                have = got if isinstance(got, str) else ("none" if got is None else f"order {got}")
                verdict = f"FAIL expected {want}, got {have}"
            out.lines.append(TranscriptLine(seq, str(action), "-", verdict))
            continue
        try:
            session, delta = apply_event(session, action)
        except UnresolvableManifest as exc:
            raise ReplayError(str(exc)) from None
        except SessionError as exc:
            logger.debug("rejected %s: %s", action, exc)
            out.lines.append(TranscriptLine(seq, str(action), "-", f"REJECTED {exc}"))
            continue
        out.lines.append(TranscriptLine(seq, str(action), format_delta(delta), "ok"))

    out.session = session
    return out


def replay_file(path, registry: Registry) -> Transcript:
    path = Path(path)
    res = parse(SourceDocument.from_path(path))
    if not res.ok:
        raise ReplayError(f"{path} does not parse", res.diagnostics)
    if not isinstance(res.model, Scenario):
        raise ReplayError(f"{path} is not a scenario")
    return replay(res.model, registry, path.parent)
