"""Content-addressed image storage for file-backed runs.

Every image lands at images/<sha256><suffix> under the workspace root, so
byte-identical payloads share one file and one ImageRef id, and a topology
document can be resolved later by anyone holding the workspace directory.
"""

from __future__ import annotations

from pathlib import Path

from .errors import UnresolvableImage
from .topology import IMAGE_KIND_FILE, IMAGE_KIND_SIM, ImageRef, content_id


class Workspace:
    def __init__(self, root: str | Path):
        self.root = Path(root)
        (self.root / "images").mkdir(parents=True, exist_ok=True)

    def put_bytes(self, data: bytes, suffix: str = ".png") -> ImageRef:
        if not data:
            raise UnresolvableImage("refusing to store an empty image payload")
        digest = content_id(data)
        locator = f"images/{digest}{suffix}"
        target = self.root / locator
        if not target.exists():
            target.write_bytes(data)
        return ImageRef(id=digest, kind=IMAGE_KIND_FILE, locator=locator)

    def import_file(self, path: str | Path) -> ImageRef:
        source = Path(path)
        if not source.is_file():
            raise UnresolvableImage(f"no such file: {source}")
        suffix = source.suffix if source.suffix else ".png"
        return self.put_bytes(source.read_bytes(), suffix=suffix)

    def path_for(self, image: ImageRef) -> Path:
        if image.kind != IMAGE_KIND_FILE:
            raise UnresolvableImage("only file refs have workspace paths")
        return self.root / image.locator

    def exists(self, image: ImageRef) -> bool:
        if image.kind == IMAGE_KIND_SIM:
            return True
        return (self.root / image.locator).is_file()

    def load_bytes(self, image: ImageRef) -> bytes:
        if image.kind == IMAGE_KIND_SIM:
            return image.locator.encode("utf-8")
        path = self.root / image.locator
        if not path.is_file():
            raise UnresolvableImage(f"missing image file: {image.locator}")
        return path.read_bytes()

    def find_by_id(self, digest: str) -> ImageRef | None:
        """Locate a stored image by content hash alone."""
        matches = sorted((self.root / "images").glob(f"{digest}.*"))
        if not matches:
            return None
        locator = f"images/{matches[0].name}"
        return ImageRef(id=digest, kind=IMAGE_KIND_FILE, locator=locator)
