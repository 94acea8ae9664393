"""Sequence manifests: an ordered list of frames with image, depth and pose files."""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from uwdepth.errors import InputError
from uwdepth.geometry import CameraIntrinsics, RigidPose, load_intrinsics, load_pose
from uwdepth.imagecore import DepthMap, load_depth, load_image

FORMAT = "uwdepth-manifest"
VERSION = 1


@dataclass(frozen=True)
class FrameRecord:
    image: Path
    depth: Path | None
    pose: Path | None
    timestamp: float


@dataclass(frozen=True)
class SequenceManifest:
    """Frames in time order plus the camera intrinsics file.

    Relative paths in the JSON file are resolved against its directory.
    """

    frames: tuple[FrameRecord, ...]
    intrinsics_path: Path
    water_preset: str | None = None
    root: Path = Path(".")

    def __post_init__(self):
        stamps = [f.timestamp for f in self.frames]
        if any(b <= a for a, b in zip(stamps, stamps[1:])):
            raise InputError("manifest timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.frames)

    @classmethod
    def load(cls, path) -> "SequenceManifest":
        path = Path(path)
        try:
            d = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read manifest {path}: {exc}") from exc
        return cls.from_dict(d, path.parent)

    @classmethod
    def from_dict(cls, d: dict, root=".") -> "SequenceManifest":
        root = Path(root)
        if not isinstance(d, dict) or "frames" not in d or "intrinsics" not in d:
            raise InputError("manifest needs 'frames' and 'intrinsics'")

        def resolve(p):
            if p is None:
                return None
            q = root / p
            if not q.is_file():
                raise InputError(f"manifest references missing file {q}")
            return q

        frames = []
        for i, f in enumerate(d["frames"]):
            try:
                frames.append(
                    FrameRecord(
                        resolve(f["image"]),
                        resolve(f.get("depth")),
                        resolve(f.get("pose")),
                        float(f.get("timestamp", i)),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise InputError(f"manifest frame {i} is malformed: {exc}") from exc
        if not frames:
            raise InputError("manifest has no frames")
        return cls(tuple(frames), resolve(d["intrinsics"]), d.get("water_preset"), root)

    def to_dict(self) -> dict:
        def rel(p):
            return None if p is None else Path(p).relative_to(self.root).as_posix()

        return {
            "format": FORMAT,
            "version": VERSION,
            "intrinsics": rel(self.intrinsics_path),
            "water_preset": self.water_preset,
            "frames": [
                {
                    "image": rel(f.image),
                    "depth": rel(f.depth),
                    "pose": rel(f.pose),
                    "timestamp": f.timestamp,
                }
                for f in self.frames
            ],
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    def intrinsics(self) -> CameraIntrinsics:
        return load_intrinsics(self.intrinsics_path)

    def image(self, i: int):
        return load_image(self.frames[i].image)

    def depth(self, i: int) -> DepthMap:
        if self.frames[i].depth is None:
            raise InputError(f"frame {i} has no depth file")
        return load_depth(self.frames[i].depth)

    def pose(self, i: int) -> RigidPose:
        if self.frames[i].pose is None:
            raise InputError(f"frame {i} has no pose file")
        return load_pose(self.frames[i].pose)
