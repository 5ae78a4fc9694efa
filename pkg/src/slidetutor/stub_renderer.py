"""Stub rasterizer: writes one solid-color PNG per slide.

Stands in for an office-suite renderer in tests and CI. Invoked as
``python -m slidetutor.stub_renderer <input.pptx> <outdir>``. The flags exist
so error paths (wrong page count, crashes, hangs) can be exercised.
"""

from __future__ import annotations

import argparse
import io
import sys
import time
import zipfile
from pathlib import Path

from .imaging import encode_png


def _count_slides(archive: Path) -> int:
    with zipfile.ZipFile(io.BytesIO(archive.read_bytes())) as zf:
        return sum(
            1
            for name in zf.namelist()
            if name.startswith("ppt/slides/") and name.endswith(".xml") and "_rels" not in name
        )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="slidetutor-stub-renderer")
    parser.add_argument("input", type=Path)
    parser.add_argument("outdir", type=Path)
    parser.add_argument("--pages", type=int, default=None,
                        help="emit exactly this many pages instead of the slide count")
    parser.add_argument("--size", default="1024x768")
    parser.add_argument("--fail", action="store_true", help="exit non-zero without output")
    parser.add_argument("--sleep", type=float, default=0.0)
    args = parser.parse_args(argv)

    if args.sleep:
        time.sleep(args.sleep)
    if args.fail:
        print("stub renderer: simulated failure", file=sys.stderr)
        return 3

    width, height = (int(part) for part in args.size.split("x"))
    count = args.pages if args.pages is not None else _count_slides(args.input)
    args.outdir.mkdir(parents=True, exist_ok=True)
    for index in range(count):
        # vary the fill so page images are distinguishable byte-wise
        color = (index * 37 % 256, index * 59 % 256, 128)
        (args.outdir / f"page-{index}.png").write_bytes(encode_png(width, height, color))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
