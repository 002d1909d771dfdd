"""Built-in frame decoder honoring the subprocess contract:

    python -m groupmood.framedecode <video-path> <frame-index>

writes the frame as PNG to stdout. Understands two lightweight containers so
the toolkit works end to end without a media stack:

  * a .npz archive with a 'frames' array of shape (N, H, W, 3) uint8
  * a directory of per-frame images, ordered lexicographically

Real video files (mp4 etc.) need an external decoder: set GROUPMOOD_DECODER
to any executable with the same argument/stdout contract, e.g. an ffmpeg
wrapper script.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np


def decode(path: str, index: int) -> bytes:
    import cv2

    src = Path(path)
    if src.is_dir():
        frames = sorted(
            p for p in src.iterdir() if p.suffix.lower() in (".png", ".jpg", ".jpeg")
        )
        if not 0 <= index < len(frames):
            raise IndexError(f"frame {index} out of range ({len(frames)} frames in {src})")
        data = frames[index].read_bytes()
        if frames[index].suffix.lower() == ".png":
            return data
        raw = cv2.imdecode(np.frombuffer(data, np.uint8), cv2.IMREAD_COLOR)
        ok, buf = cv2.imencode(".png", raw)
        if not ok:
            raise ValueError(f"cannot re-encode {frames[index]}")
        return buf.tobytes()

    if src.suffix == ".npz":
        with np.load(src) as archive:
            frames = archive["frames"]
            if not 0 <= index < frames.shape[0]:
                raise IndexError(f"frame {index} out of range ({frames.shape[0]} frames in {src})")
            rgb = frames[index]
        ok, buf = cv2.imencode(".png", cv2.cvtColor(rgb, cv2.COLOR_RGB2BGR))
        if not ok:
            raise ValueError("PNG encoding failed")
        return buf.tobytes()

    raise ValueError(
        f"unsupported container {src}; set GROUPMOOD_DECODER to a decoder for this format"
    )


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    if len(argv) != 2:
        print("usage: python -m groupmood.framedecode <video-path> <frame-index>", file=sys.stderr)
        return 2
    try:
        png = decode(argv[0], int(argv[1]))
    except Exception as exc:
        print(f"framedecode: {exc}", file=sys.stderr)
        return 1
    sys.stdout.buffer.write(png)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
