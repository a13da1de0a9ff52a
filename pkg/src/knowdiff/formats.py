"""Versioned on-disk envelope shared by all binary artifacts.

Layout: magic(4) | version(u32 LE) | payload_len(u64 LE) | payload |
sha256(magic..payload). Readers reject wrong magic, wrong version,
truncation, and checksum mismatch with distinct errors.

JSON reports use a lighter scheme: a top-level {"format", "version"} pair
that loaders verify.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

from .exceptions import ChecksumError, FileFormatError, TruncatedFileError, VersionError

MAGIC_LIBRARY = b"KDLB"
MAGIC_LOG = b"KDLG"
MAGIC_CHECKPOINT = b"KDCK"

FORMAT_VERSION = 1

_HEADER = struct.Struct("<4sIQ")
_DIGEST_LEN = hashlib.sha256().digest_size


def write_envelope(path, magic: bytes, payload: bytes, version: int = FORMAT_VERSION) -> None:
    header = _HEADER.pack(magic, version, len(payload))
    digest = hashlib.sha256(header + payload).digest()
    Path(path).write_bytes(header + payload + digest)


def read_envelope(path, magic: bytes, version: int = FORMAT_VERSION) -> bytes:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise TruncatedFileError(f"{path}: file shorter than header")
    got_magic, got_version, payload_len = _HEADER.unpack_from(raw)
    if got_magic != magic:
        raise FileFormatError(
            f"{path}: bad magic {got_magic!r}, expected {magic!r}")
    if got_version != version:
        raise VersionError(
            f"{path}: format version {got_version}, this build reads {version}")
    expected_len = _HEADER.size + payload_len + _DIGEST_LEN
    if len(raw) < expected_len:
        raise TruncatedFileError(
            f"{path}: expected {expected_len} bytes, file has {len(raw)}")
    payload = raw[_HEADER.size:_HEADER.size + payload_len]
    digest = raw[_HEADER.size + payload_len:expected_len]
    if hashlib.sha256(raw[:_HEADER.size + payload_len]).digest() != digest:
        raise ChecksumError(f"{path}: checksum mismatch")
    return payload


def dump_json_payload(obj) -> bytes:
    """Canonical JSON bytes: sorted keys, compact separators, repr floats.

    Python's float repr round-trips exactly, so payloads are byte-stable and
    numerically lossless.
    """
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def write_report(path, kind: str, payload: dict, version: int = FORMAT_VERSION) -> None:
    doc = {"format": kind, "version": version}
    doc.update(payload)
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def read_report(path, kind: str, version: int = FORMAT_VERSION) -> dict:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FileFormatError(f"{path}: invalid JSON report: {exc}") from exc
    if doc.get("format") != kind:
        raise FileFormatError(f"{path}: report format {doc.get('format')!r}, expected {kind!r}")
    if doc.get("version") != version:
        raise VersionError(f"{path}: report version {doc.get('version')}, expected {version}")
    return doc
