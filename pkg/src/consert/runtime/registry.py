"""Directory-backed registry of published system manifests.

Layout::

    <root>/index.tsv          system_id<TAB>sha256<TAB>filename, sorted by id
    <root>/<system_id>.consert canonical manifest text

Files are written to a temporary name and renamed into place, and the index
is rewritten the same way only after the manifest file is complete, so a
crashed publish never leaves a half-written file in the index.
"""

from __future__ import annotations

import contextlib
import fcntl
import hashlib
import logging
import os
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Optional

from consert.dsl import format_canonical, has_errors, parse, validate
from consert.model import Catalog, SystemManifest

logger = logging.getLogger(__name__)

INDEX = "index.tsv"
LOCK = ".lock"


class RegistryError(Exception):
    def __init__(self, code: str, message: str, diagnostics=()):
        super().__init__(message)
        self.code = code
        self.diagnostics = list(diagnostics)

    def __str__(self) -> str:
        return f"{self.code}: {self.args[0]}"


@dataclass(frozen=True)
class Entry:
    system_id: str
    digest: str
    filename: str


def content_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


class Registry:
    """Content-hashed store of canonical manifests keyed by system id."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def __repr__(self) -> str:
        return f"Registry({str(self.root)!r})"

    @contextlib.contextmanager
    def _locked(self) -> Iterator[None]:
        with open(self.root / LOCK, "a") as fh:
            fcntl.flock(fh.fileno(), fcntl.LOCK_EX)
            try:
                yield
            finally:
                fcntl.flock(fh.fileno(), fcntl.LOCK_UN)

    def _read_index(self) -> dict[str, Entry]:
        path = self.root / INDEX
        if not path.exists():
            return {}
        entries: dict[str, Entry] = {}
        for n, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise RegistryError("CORRUPT_INDEX", f"{path}:{n}: expected 3 tab-separated fields")
            entries[parts[0]] = Entry(*parts)
        return entries

    def _write_index(self, entries: dict[str, Entry]) -> None:
        text = "".join(f"{e.system_id}\t{e.digest}\t{e.filename}\n" for _, e in sorted(entries.items()))
        _atomic_write(self.root / INDEX, text)

    def publish(self, manifest: SystemManifest, catalog: Catalog) -> str:
        """Store ``manifest`` in canonical form; return its content hash.

        Publishing identical content again is a no-op returning the same
        hash. A different manifest under an existing id is ``ID_CONFLICT``.
        """
        diags = validate(manifest, catalog, path=f"<{manifest.system_id}>")
        if has_errors(diags):
            raise RegistryError(
                "VALIDATION_FAILED",
                f"manifest {manifest.system_id} does not validate",
                [d for d in diags if d.is_error],
            )
        text = format_canonical(manifest)
        digest = content_hash(text)
        with self._locked():
            entries = self._read_index()
            prev = entries.get(manifest.system_id)
            if prev is not None:
                if prev.digest == digest:
                    return digest
                raise RegistryError(
                    "ID_CONFLICT",
                    f"system id {manifest.system_id!r} is already published with different content",
                )
            filename = f"{manifest.system_id}.consert"
            _atomic_write(self.root / filename, text)
            entries[manifest.system_id] = Entry(manifest.system_id, digest, filename)
            self._write_index(entries)
        logger.info("published %s %s", manifest.system_id, digest[:12])
        return digest

    def entries(self) -> list[Entry]:
        return [e for _, e in sorted(self._read_index().items())]

    def __contains__(self, system_id: str) -> bool:
        return system_id in self._read_index()

    def lookup(self, system_id: str) -> str:
        """Canonical text of ``system_id``; raises on unknown id or hash mismatch."""
        entry = self._read_index().get(system_id)
        if entry is None:
            raise RegistryError("NOT_FOUND", f"system {system_id!r} is not in the registry")
        try:
            text = (self.root / entry.filename).read_text(encoding="utf-8")
        except OSError as exc:
            raise RegistryError("NOT_FOUND", f"{entry.filename}: {exc.strerror}") from None
        if content_hash(text) != entry.digest:
            raise RegistryError("TAMPERED", f"content of {entry.filename} does not match its recorded hash")
        return text

    def manifest(self, system_id: str) -> SystemManifest:
        res = parse(self.lookup(system_id), path=f"{self.root / (system_id + '.consert')}")
        if not res.ok or not isinstance(res.model, SystemManifest):
            raise RegistryError("CORRUPT_ENTRY", f"stored manifest {system_id!r} does not parse", res.diagnostics)
        return res.model

    def get(self, system_id: str) -> Optional[SystemManifest]:
        try:
            return self.manifest(system_id)
        except RegistryError:
            return None
