"""Slide-archive ingestion: parse a zip-of-XML deck and rasterize its pages.

The archive is read directly with zipfile + ElementTree; no office suite is
involved. Rasterization shells out to a configured command so tests can swap
in a stub renderer.
"""

from __future__ import annotations

import hashlib
import io
import re
import shlex
import subprocess
import tempfile
import xml.etree.ElementTree as ET
import zipfile
from dataclasses import dataclass, field, replace
from pathlib import Path

from .config import RendererConfig
from .errors import (
    EmptyDeck,
    MalformedArchive,
    NotRasterized,
    PageCountMismatch,
    RendererFailed,
)
from .imaging import png_dimensions

_NS = {
    "p": "http://schemas.openxmlformats.org/presentationml/2006/main",
    "a": "http://schemas.openxmlformats.org/drawingml/2006/main",
    "r": "http://schemas.openxmlformats.org/officeDocument/2006/relationships",
    "rel": "http://schemas.openxmlformats.org/package/2006/relationships",
}
_R_ID = "{%s}id" % _NS["r"]

_PAGE_PNG = re.compile(r"^page-(\d+)\.png$")


@dataclass(frozen=True)
class PageImage:
    data: bytes = field(repr=False)
    width: int
    height: int


@dataclass(frozen=True)
class Page:
    index: int
    page_id: str
    text_blocks: tuple[str, ...]
    image: PageImage | None = None


@dataclass(frozen=True)
class SlideDeck:
    deck_id: str
    title: str
    pages: tuple[Page, ...]
    # original archive bytes, kept so rasterization can re-invoke the renderer
    source: bytes = field(default=b"", repr=False)


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _shape_text(sp: ET.Element) -> str:
    paragraphs = []
    body = sp.find("p:txBody", _NS)
    if body is None:
        return ""
    for para in body.findall("a:p", _NS):
        runs = [t.text or "" for t in para.iter("{%s}t" % _NS["a"])]
        paragraphs.append("".join(runs))
    return "\n".join(paragraphs).strip("\n")


def _offset(el: ET.Element, prop_tag: str) -> tuple[int, int] | None:
    xfrm = el.find(f"{prop_tag}/a:xfrm", _NS)
    if xfrm is None:
        return None
    off = xfrm.find("a:off", _NS)
    if off is None:
        return None
    try:
        return int(off.get("x", "")), int(off.get("y", ""))
    except ValueError:
        return None


def _child_offset(el: ET.Element) -> tuple[int, int]:
    # group children are positioned relative to chOff, rendered at off
    xfrm = el.find("p:grpSpPr/a:xfrm", _NS)
    if xfrm is None:
        return 0, 0
    off = xfrm.find("a:off", _NS)
    ch = xfrm.find("a:chOff", _NS)
    if off is None or ch is None:
        return 0, 0
    try:
        return (int(off.get("x", "0")) - int(ch.get("x", "0")),
                int(off.get("y", "0")) - int(ch.get("y", "0")))
    except ValueError:
        return 0, 0


def _collect_blocks(tree: ET.Element) -> list[str]:
    """Shape texts sorted by (top, left); geometry-free shapes keep document order."""
    sp_tree = tree.find("p:cSld/p:spTree", _NS)
    if sp_tree is None:
        return []
    found: list[tuple[float, float, int, str]] = []
    order = 0

    def visit(container: ET.Element, dx: int, dy: int) -> None:
        nonlocal order
        for child in container:
            tag = _local(child.tag)
            if tag == "sp":
                text = _shape_text(child)
                pos = _offset(child, "p:spPr")
                seq = order
                order += 1
                if text.strip():
                    if pos is None:
                        found.append((float("inf"), float("inf"), seq, text))
                    else:
                        found.append((float(pos[1] + dy), float(pos[0] + dx), seq, text))
            elif tag == "grpSp":
                gx, gy = _child_offset(child)
                visit(child, dx + gx, dy + gy)

    visit(sp_tree, 0, 0)
    found.sort(key=lambda item: (item[0], item[1], item[2]))
    return [text for _, _, _, text in found]


def _slide_parts(zf: zipfile.ZipFile) -> list[str]:
    """Slide part names in presentation order, resolved through the rels table."""
    try:
        pres = ET.fromstring(zf.read("ppt/presentation.xml"))
        rels = ET.fromstring(zf.read("ppt/_rels/presentation.xml.rels"))
    except KeyError as exc:
        raise MalformedArchive(f"archive is missing {exc.args[0]!r}") from exc
    except ET.ParseError as exc:
        raise MalformedArchive(f"archive XML does not parse: {exc}") from exc

    targets = {}
    for rel in rels.findall("rel:Relationship", _NS):
        targets[rel.get("Id")] = rel.get("Target", "")

    parts = []
    sld_list = pres.find("p:sldIdLst", _NS)
    if sld_list is None:
        return parts
    for sld in sld_list.findall("p:sldId", _NS):
        rid = sld.get(_R_ID)
        target = targets.get(rid)
        if not target:
            raise MalformedArchive(f"slide relationship {rid!r} is unresolved")
        part = target.lstrip("/")
        if not part.startswith("ppt/"):
            part = "ppt/" + part
        parts.append(part)
    return parts


def parse_deck(archive: bytes, title: str) -> SlideDeck:
    """Parse a slide archive into a SlideDeck with per-page text blocks.

    Images stay unset until rasterize_deck runs. Identical archives produce
    identical decks.
    """
    if not title or not title.strip():
        raise ValueError("deck title must be non-empty")
    try:
        zf = zipfile.ZipFile(io.BytesIO(archive))
    except zipfile.BadZipFile as exc:
        raise MalformedArchive("input is not a zip archive") from exc

    with zf:
        parts = _slide_parts(zf)
        if not parts:
            raise EmptyDeck("deck contains zero slides")
        deck_id = "deck-" + hashlib.sha256(archive).hexdigest()[:12]
        pages = []
        for index, part in enumerate(parts):
            try:
                tree = ET.fromstring(zf.read(part))
            except KeyError as exc:
                raise MalformedArchive(f"archive is missing slide part {part!r}") from exc
            except ET.ParseError as exc:
                raise MalformedArchive(f"slide part {part!r} does not parse: {exc}") from exc
            pages.append(Page(
                index=index,
                page_id=f"{deck_id}/p{index}",
                text_blocks=tuple(_collect_blocks(tree)),
            ))
    return SlideDeck(deck_id=deck_id, title=title.strip(), pages=tuple(pages), source=archive)


def _substitute(command: str, input_path: Path, outdir: Path) -> list[str]:
    argv = []
    for token in shlex.split(command):
        argv.append(token.replace("{input}", str(input_path)).replace("{outdir}", str(outdir)))
    return argv


def rasterize_deck(deck: SlideDeck, renderer: RendererConfig) -> SlideDeck:
    """Run the external renderer and attach one PNG per page.

    The command must write ``page-<index>.png`` files covering exactly the
    parsed page indices.
    """
    if not deck.source:
        raise ValueError("deck carries no source archive to rasterize")
    with tempfile.TemporaryDirectory(prefix="slidetutor-render-") as tmp:
        tmp_path = Path(tmp)
        input_path = tmp_path / "deck.pptx"
        outdir = tmp_path / "out"
        outdir.mkdir()
        input_path.write_bytes(deck.source)
        argv = _substitute(renderer.command, input_path, outdir)
        try:
            proc = subprocess.run(argv, capture_output=True, timeout=renderer.timeout_s)
        except subprocess.TimeoutExpired as exc:
            raise RendererFailed(f"renderer timed out after {renderer.timeout_s}s") from exc
        except OSError as exc:
            raise RendererFailed(f"renderer could not start: {exc}") from exc
        if proc.returncode != 0:
            tail = proc.stderr.decode("utf-8", "replace")[-500:]
            raise RendererFailed(f"renderer exited with {proc.returncode}: {tail}")

        produced = {}
        for path in outdir.iterdir():
            match = _PAGE_PNG.match(path.name)
            if match:
                produced[int(match.group(1))] = path
        expected = {page.index for page in deck.pages}
        if set(produced) != expected:
            raise PageCountMismatch(
                f"renderer produced {len(produced)} page images for {len(expected)} slides"
            )
        pages = []
        for page in deck.pages:
            data = produced[page.index].read_bytes()
            width, height = png_dimensions(data)
            pages.append(replace(page, image=PageImage(data=data, width=width, height=height)))
    return replace(deck, pages=tuple(pages))


def page_content(page: Page) -> tuple[str, PageImage]:
    """Uniform (text, image) accessor for a rasterized page."""
    if page.image is None:
        raise NotRasterized(f"page {page.index} has no raster image")
    return "\n".join(page.text_blocks), page.image


def image_relpath(index: int) -> str:
    return f"images/page-{index}.png"


def manifest_dict(deck: SlideDeck) -> dict:
    """JSON-ready deck manifest; images referenced by conventional paths."""
    pages = []
    for page in deck.pages:
        entry: dict = {
            "index": page.index,
            "page_id": page.page_id,
            "text_blocks": list(page.text_blocks),
        }
        if page.image is not None:
            entry["image"] = {
                "path": image_relpath(page.index),
                "width": page.image.width,
                "height": page.image.height,
            }
        pages.append(entry)
    return {"deck_id": deck.deck_id, "title": deck.title, "pages": pages}


def write_deck_files(deck: SlideDeck, root: Path) -> dict:
    """Write archive + page images under root, return the manifest dict."""
    root.mkdir(parents=True, exist_ok=True)
    if deck.source:
        (root / "source.pptx").write_bytes(deck.source)
    for page in deck.pages:
        if page.image is not None:
            target = root / image_relpath(page.index)
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(page.image.data)
    return manifest_dict(deck)


def deck_from_manifest(manifest: dict, root: Path) -> SlideDeck:
    """Rehydrate a SlideDeck from a manifest plus the files written beside it."""
    pages = []
    for entry in manifest["pages"]:
        image = None
        if entry.get("image"):
            data = (root / entry["image"]["path"]).read_bytes()
            image = PageImage(data=data, width=entry["image"]["width"], height=entry["image"]["height"])
        pages.append(Page(
            index=entry["index"],
            page_id=entry["page_id"],
            text_blocks=tuple(entry["text_blocks"]),
            image=image,
        ))
    source_path = root / "source.pptx"
    source = source_path.read_bytes() if source_path.exists() else b""
    return SlideDeck(
        deck_id=manifest["deck_id"],
        title=manifest["title"],
        pages=tuple(pages),
        source=source,
    )
