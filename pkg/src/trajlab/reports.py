"""Report bundles: canonical serialization, content fingerprints, manifests.

Every command writes its machine artifacts (JSON/CSV) plus a manifest that
records a sha256 per artifact and a fingerprint of the canonical config.
Timestamps live only in the manifest and are never part of any fingerprint,
so identical inputs and seeds give byte-identical artifacts.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from pathlib import Path

from . import __version__
from .errors import FingerprintMismatch, MissingArtifact

MANIFEST_NAME = "manifest.json"


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def fingerprint_obj(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()


def file_sha256(path: Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_json_artifact(path: Path, obj) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def write_manifest(out_dir: Path, command: str, seeds, config_obj) -> Path:
    """Hash every artifact in out_dir (manifest excluded) and write the manifest."""
    out_dir = Path(out_dir)
    artifacts = {}
    for path in sorted(out_dir.rglob("*")):
        if path.is_file() and path.name != MANIFEST_NAME:
            artifacts[str(path.relative_to(out_dir))] = file_sha256(path)
    manifest = {
        "tool_version": __version__,
        "command": command,
        "created_utc": datetime.datetime.now(datetime.timezone.utc).isoformat(),
        "seeds": seeds,
        "config_fingerprint": fingerprint_obj(config_obj),
        "artifacts": artifacts,
    }
    path = out_dir / MANIFEST_NAME
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return path


def load_manifest(in_dir: Path) -> dict:
    path = Path(in_dir) / MANIFEST_NAME
    if not path.exists():
        raise MissingArtifact(f"no {MANIFEST_NAME} in {in_dir}")
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def verify_bundle(in_dir: Path) -> dict:
    """Re-hash every artifact and compare against the manifest."""
    in_dir = Path(in_dir)
    manifest = load_manifest(in_dir)
    for rel, expected in sorted(manifest.get("artifacts", {}).items()):
        path = in_dir / rel
        if not path.exists():
            raise MissingArtifact(f"artifact missing: {rel}")
        actual = file_sha256(path)
        if actual != expected:
            raise FingerprintMismatch(f"artifact {rel}: sha256 {actual} != manifest "
                                      f"{expected}")
    return manifest


def text_table(headers: list[str], rows: list[list]) -> str:
    """Aligned-column plain-text table."""
    cells = [[str(h) for h in headers]] + [[str(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = []
    for r, row in enumerate(cells):
        lines.append("  ".join(c.ljust(widths[i]) for i, c in enumerate(row)).rstrip())
        if r == 0:
            lines.append("  ".join("-" * widths[i] for i in range(len(headers))))
    return "\n".join(lines) + "\n"
