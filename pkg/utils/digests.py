"""Input file digests for run manifests."""

import hashlib
from pathlib import Path


def file_digest(path) -> str:
    """Content hash of a file as `sha256:<hex>`."""
    h = hashlib.sha256()
    with open(Path(path), "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            h.update(chunk)
    return f"sha256:{h.hexdigest()}"
