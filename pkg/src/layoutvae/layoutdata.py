"""Layout documents, rasterization to occupancy grids, corpora, and SVG output.

A layout is a screen-sized list of typed elements with normalized bounding
boxes. Rasterization turns it into a per-class soft occupancy grid (values are
exact covered-area fractions per cell, clamped to [0,1]), which is the
representation the model trains on. This module also handles RICO-style
semantic-annotation ingestion, a deterministic synthetic corpus for
desk-scale work, dataset splitting, JSONL persistence, and SVG rendering.
"""

from __future__ import annotations

import json
import logging
import math
import random
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Iterator, Sequence
from xml.sax.saxutils import quoteattr

import numpy as np

from .numcore import ShapeError

logger = logging.getLogger(__name__)


class ValidationError(ValueError):
    """Input data violates a documented invariant."""


class IngestError(RuntimeError):
    """An ingestion source yielded no usable documents."""


class ElementClass(Enum):
    TEXT = 0
    IMAGE = 1
    BUTTON = 2
    ICON = 3
    TOOLBAR = 4
    LIST_ITEM = 5


N_CLASSES = len(ElementClass)

# Coarse mapping from RICO semantic componentLabel values. Labels not listed
# here are dropped (and counted) during ingestion.
DEFAULT_RICO_MAPPING: dict[str, ElementClass] = {
    "Text": ElementClass.TEXT,
    "Input": ElementClass.TEXT,
    "Image": ElementClass.IMAGE,
    "Background Image": ElementClass.IMAGE,
    "Text Button": ElementClass.BUTTON,
    "Button Bar": ElementClass.BUTTON,
    "Checkbox": ElementClass.BUTTON,
    "Radio Button": ElementClass.BUTTON,
    "On/Off Switch": ElementClass.BUTTON,
    "Icon": ElementClass.ICON,
    "Pager Indicator": ElementClass.ICON,
    "Toolbar": ElementClass.TOOLBAR,
    "Bottom Navigation": ElementClass.TOOLBAR,
    "Multi-Tab": ElementClass.TOOLBAR,
    "List Item": ElementClass.LIST_ITEM,
    "Card": ElementClass.LIST_ITEM,
}

SVG_CLASS_COLORS: dict[ElementClass, str] = {
    ElementClass.TEXT: "#4a90d9",
    ElementClass.IMAGE: "#7bc96f",
    ElementClass.BUTTON: "#e0533d",
    ElementClass.ICON: "#f0b429",
    ElementClass.TOOLBAR: "#8e54a0",
    ElementClass.LIST_ITEM: "#56c3c0",
}


@dataclass(frozen=True)
class Element:
    cls: ElementClass
    bbox: tuple[float, float, float, float]  # x0, y0, x1, y1 in [0,1]


@dataclass(frozen=True)
class LayoutDoc:
    id: str
    screen_w: int
    screen_h: int
    elements: tuple[Element, ...]

    def validate(self) -> None:
        if self.screen_w <= 0 or self.screen_h <= 0:
            raise ValidationError(
                f"doc {self.id!r}: screen size must be positive, "
                f"got {self.screen_w}x{self.screen_h}"
            )
        for i, el in enumerate(self.elements):
            x0, y0, x1, y1 = el.bbox
            ok = 0.0 <= x0 < x1 <= 1.0 and 0.0 <= y0 < y1 <= 1.0
            if not ok or not all(math.isfinite(v) for v in el.bbox):
                raise ValidationError(
                    f"doc {self.id!r}: element {i} has invalid bbox {el.bbox}"
                )


@dataclass(frozen=True)
class GridSpec:
    channels: int = N_CLASSES
    rows: int = 20
    cols: int = 12

    def __post_init__(self):
        if self.channels < 1 or self.rows < 1 or self.cols < 1:
            raise ValidationError(f"grid dimensions must be >= 1, got {self}")

    @property
    def flat_dim(self) -> int:
        return self.channels * self.rows * self.cols


@dataclass
class GridTensor:
    spec: GridSpec
    cells: np.ndarray  # (channels, rows, cols) float64 in [0,1]

    def __post_init__(self):
        self.cells = np.ascontiguousarray(np.asarray(self.cells, dtype=np.float64))
        shape = (self.spec.channels, self.spec.rows, self.spec.cols)
        if self.cells.shape != shape:
            raise ShapeError(f"cells shape {self.cells.shape} != spec shape {shape}")

    @classmethod
    def zeros(cls, spec: GridSpec) -> "GridTensor":
        return cls(spec, np.zeros((spec.channels, spec.rows, spec.cols)))


def rasterize(doc: LayoutDoc, spec: GridSpec = GridSpec()) -> GridTensor:
    """Exact-coverage rasterization: cell value = covered area fraction.

    Per class channel, each cell holds the total fraction of its area covered
    by that class's elements (axis-aligned rectangle intersection, no
    sampling), clamped to 1 where same-class elements overlap.
    """
    doc.validate()
    cells = np.zeros((spec.channels, spec.rows, spec.cols))
    h, w = spec.rows, spec.cols
    # integer cell edges keep full-coverage cells exactly 1.0
    col_lo, col_hi = np.arange(w), np.arange(1, w + 1)
    row_lo, row_hi = np.arange(h), np.arange(1, h + 1)
    for i, el in enumerate(doc.elements):
        if el.cls.value >= spec.channels:
            raise ValidationError(
                f"doc {doc.id!r}: element {i} class {el.cls.name} does not fit "
                f"a {spec.channels}-channel grid"
            )
        x0, y0, x1, y1 = el.bbox
        fx = np.clip(np.minimum(x1 * w, col_hi) - np.maximum(x0 * w, col_lo), 0.0, 1.0)
        fy = np.clip(np.minimum(y1 * h, row_hi) - np.maximum(y0 * h, row_lo), 0.0, 1.0)
        cells[el.cls.value] += np.outer(fy, fx)
    np.clip(cells, 0.0, 1.0, out=cells)
    return GridTensor(spec, cells)


def flatten(g: GridTensor) -> np.ndarray:
    """Channel-major, then row-major vector of length spec.flat_dim."""
    return g.cells.reshape(-1).copy()


def unflatten(v: np.ndarray, spec: GridSpec) -> GridTensor:
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if v.size != spec.flat_dim:
        raise ShapeError(f"vector length {v.size} != spec flat dim {spec.flat_dim}")
    return GridTensor(spec, v.reshape(spec.channels, spec.rows, spec.cols).copy())


def corpus_matrix(docs: Sequence[LayoutDoc], spec: GridSpec = GridSpec()) -> np.ndarray:
    """Rasterize and flatten a corpus into an (N, flat_dim) training matrix."""
    out = np.zeros((len(docs), spec.flat_dim))
    for i, doc in enumerate(docs):
        out[i] = rasterize(doc, spec).cells.reshape(-1)
    return out


# --- RICO semantic-annotation ingestion ---


@dataclass
class IngestStats:
    files_parsed: int = 0
    files_skipped: int = 0
    elements_kept: int = 0
    labels_skipped: int = 0


def _walk_nodes(node) -> Iterator[dict]:
    if not isinstance(node, dict):
        return
    yield node
    children = node.get("children") or []
    if isinstance(children, list):
        for child in children:
            yield from _walk_nodes(child)


def _doc_from_rico(raw: dict, doc_id: str, mapping: dict[str, ElementClass],
                   stats: IngestStats) -> LayoutDoc:
    bounds = raw.get("bounds")
    if not isinstance(bounds, (list, tuple)) or len(bounds) != 4:
        raise ValidationError("root node has no usable bounds")
    screen_w = float(bounds[2]) - float(bounds[0])
    screen_h = float(bounds[3]) - float(bounds[1])
    if screen_w <= 0 or screen_h <= 0:
        raise ValidationError(f"non-positive screen bounds {bounds}")
    elements = []
    for node in _walk_nodes(raw):
        label = node.get("componentLabel")
        if label is None:
            continue
        cls = mapping.get(label)
        if cls is None:
            stats.labels_skipped += 1
            continue
        nb = node.get("bounds")
        if not isinstance(nb, (list, tuple)) or len(nb) != 4:
            continue
        x0 = min(max((float(nb[0]) - float(bounds[0])) / screen_w, 0.0), 1.0)
        y0 = min(max((float(nb[1]) - float(bounds[1])) / screen_h, 0.0), 1.0)
        x1 = min(max((float(nb[2]) - float(bounds[0])) / screen_w, 0.0), 1.0)
        y1 = min(max((float(nb[3]) - float(bounds[1])) / screen_h, 0.0), 1.0)
        if x1 <= x0 or y1 <= y0:  # zero-area after clamping
            continue
        elements.append(Element(cls, (x0, y0, x1, y1)))
        stats.elements_kept += 1
    return LayoutDoc(
        id=doc_id,
        screen_w=int(round(screen_w)),
        screen_h=int(round(screen_h)),
        elements=tuple(elements),
    )


def ingest_rico(
    directory: str | Path,
    mapping: dict[str, ElementClass] | None = None,
    stats: IngestStats | None = None,
) -> Iterator[LayoutDoc]:
    """Stream LayoutDocs from a directory of RICO semantic-annotation JSON.

    One JSON document per screen, nested view hierarchy with componentLabel
    and absolute bounds. Unreadable or malformed files are skipped with a
    warning; labels missing from the mapping are dropped and counted. Raises
    IngestError when the directory yields no parsable file at all.
    """
    directory = Path(directory)
    if mapping is None:
        mapping = DEFAULT_RICO_MAPPING
    if stats is None:
        stats = IngestStats()
    for path in sorted(directory.glob("*.json")):
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
            doc = _doc_from_rico(raw, doc_id=path.stem, mapping=mapping, stats=stats)
        except (OSError, json.JSONDecodeError, ValidationError, TypeError, ValueError) as exc:
            logger.warning("skipping %s: %s", path, exc)
            stats.files_skipped += 1
            continue
        stats.files_parsed += 1
        yield doc
    if stats.files_parsed == 0:
        raise IngestError(f"no parsable annotation files under {directory}")


# --- synthetic corpus ---


def _grid_of(cls, rng, top, bottom, n_rows, n_cols, pad):
    cell_h = (bottom - top) / n_rows
    cell_w = 1.0 / n_cols
    return [
        Element(
            cls,
            (
                c * cell_w + pad,
                top + r * cell_h + pad,
                (c + 1) * cell_w - pad,
                top + (r + 1) * cell_h - pad,
            ),
        )
        for r in range(n_rows)
        for c in range(n_cols)
    ]


def _synth_doc(rng: random.Random, doc_id: str) -> LayoutDoc:
    # Archetypes with different dominant classes so per-class mass varies
    # widely across the corpus (readers are text-heavy, keypads button-heavy,
    # galleries image-heavy, and so on).
    kind = rng.choices(
        ("mixed", "reader", "gallery", "keypad", "list"),
        weights=(30, 20, 15, 20, 15),
    )[0]
    elements: list[Element] = []

    top = rng.uniform(0.02, 0.06)
    if kind != "keypad" and rng.random() < 0.8:
        bar_h = rng.uniform(0.05, 0.12)
        elements.append(Element(ElementClass.TOOLBAR, (0.0, 0.0, 1.0, bar_h)))
        top = bar_h + rng.uniform(0.01, 0.04)

    if kind == "reader":
        n = rng.randint(2, 5)
        bottom = rng.uniform(0.88, 0.97)
        slot_h = (bottom - top) / n
        for b in range(n):
            y0 = top + b * slot_h
            margin = rng.uniform(0.03, 0.10)
            elements.append(
                Element(
                    ElementClass.TEXT,
                    (margin, y0, 1.0 - margin, y0 + slot_h * rng.uniform(0.80, 0.95)),
                )
            )
    elif kind == "gallery":
        bottom = rng.uniform(0.88, 0.97)
        elements += _grid_of(
            ElementClass.IMAGE, rng, top, bottom,
            rng.randint(2, 4), rng.randint(2, 3), rng.uniform(0.01, 0.04),
        )
    elif kind == "keypad":
        if rng.random() < 0.7:
            disp_h = rng.uniform(0.08, 0.16)
            elements.append(
                Element(ElementClass.TEXT, (0.05, top, 0.95, top + disp_h))
            )
            top += disp_h + 0.02
        bottom = rng.uniform(0.90, 0.98)
        elements += _grid_of(
            ElementClass.BUTTON, rng, top, bottom,
            rng.randint(3, 5), rng.randint(3, 4), rng.uniform(0.005, 0.02),
        )
    elif kind == "list":
        n = rng.randint(4, 8)
        bottom = rng.uniform(0.88, 0.97)
        item_h = (bottom - top) / n
        with_icons = rng.random() < 0.6
        for k in range(n):
            y0 = top + k * item_h
            y1 = y0 + item_h * 0.85
            if with_icons:
                elements.append(Element(ElementClass.ICON, (0.04, y0, 0.14, y1)))
                elements.append(Element(ElementClass.LIST_ITEM, (0.17, y0, 0.95, y1)))
            else:
                elements.append(Element(ElementClass.LIST_ITEM, (0.05, y0, 0.95, y1)))
    else:
        # 1-4 stacked content blocks of TEXT / IMAGE / LIST_ITEM.
        n_blocks = rng.randint(1, 4)
        bottom = rng.uniform(0.68, 0.78)
        slot_h = (bottom - top) / n_blocks
        for b in range(n_blocks):
            y0 = top + b * slot_h
            y1 = y0 + slot_h * rng.uniform(0.75, 0.95)
            margin = rng.uniform(0.02, 0.10)
            x0, x1 = margin, 1.0 - margin
            r = rng.random()
            if r < 0.40:
                cls = ElementClass.TEXT
            elif r < 0.70:
                cls = ElementClass.IMAGE
            else:
                cls = ElementClass.LIST_ITEM
            if cls is ElementClass.LIST_ITEM:
                # A list block is a run of stacked item rows.
                n_items = rng.randint(2, 4)
                item_h = (y1 - y0) / n_items
                for k in range(n_items):
                    iy0 = y0 + k * item_h
                    iy1 = iy0 + item_h * 0.85
                    elements.append(Element(cls, (x0, iy0, x1, min(iy1, 1.0))))
            else:
                elements.append(Element(cls, (x0, y0, x1, min(y1, 1.0))))

        # 0-3 buttons/icons in the lower region.
        n_controls = rng.randint(0, 3)
        if n_controls:
            slot_w = 1.0 / n_controls
            for k in range(n_controls):
                cy0 = rng.uniform(0.80, 0.88)
                if rng.random() < 0.6:
                    cls = ElementClass.BUTTON
                    w = rng.uniform(0.15, min(0.4, slot_w * 0.9))
                    h = rng.uniform(0.05, 0.08)
                else:
                    cls = ElementClass.ICON
                    w = rng.uniform(0.05, min(0.10, slot_w * 0.9))
                    h = rng.uniform(0.04, 0.07)
                cx = (k + 0.5) * slot_w
                x0 = min(max(cx - w / 2, 0.0), 1.0 - w)
                elements.append(Element(cls, (x0, cy0, x0 + w, min(cy0 + h, 1.0))))

    return LayoutDoc(id=doc_id, screen_w=1440, screen_h=2560, elements=tuple(elements))


def synth_corpus(seed: int, n: int, spec: GridSpec = GridSpec()) -> list[LayoutDoc]:
    """Deterministic procedural corpus: a desk-scale stand-in for real screens.

    Documents are drawn from a family of archetypes (mixed screens, text
    readers, image galleries, button keypads, icon lists) with counts and
    extents from a seeded generator, so the same seed always reproduces the
    same corpus and per-class mass varies strongly across documents.
    """
    if n < 0:
        raise ValidationError("n must be >= 0")
    rng = random.Random(seed)
    docs = [_synth_doc(rng, doc_id=f"synth-{seed}-{i:05d}") for i in range(n)]
    for doc in docs:
        doc.validate()
    return docs


def split(
    corpus: Sequence[LayoutDoc],
    ratios: tuple[int, int, int] = (16, 1, 1),
    seed: int = 0,
) -> tuple[list[LayoutDoc], list[LayoutDoc], list[LayoutDoc]]:
    """Deterministic shuffle, then partition by ratio with largest-remainder
    rounding. The three parts are disjoint and exhaustive."""
    if not corpus:
        raise ValidationError("cannot split an empty corpus")
    if any(r <= 0 for r in ratios):
        raise ValidationError(f"ratios must be positive, got {ratios}")
    order = list(corpus)
    random.Random(seed).shuffle(order)
    n = len(order)
    total = sum(ratios)
    quotas = [n * r / total for r in ratios]
    sizes = [int(q) for q in quotas]
    leftover = n - sum(sizes)
    by_remainder = sorted(range(len(ratios)), key=lambda i: (-(quotas[i] - sizes[i]), i))
    for i in by_remainder[:leftover]:
        sizes[i] += 1
    cut1, cut2 = sizes[0], sizes[0] + sizes[1]
    return order[:cut1], order[cut1:cut2], order[cut2:]


# --- SVG rendering ---


def _svg_header(view_w: float, view_h: float) -> list[str]:
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {view_w:g} {view_h:g}">',
        f'<rect x="0" y="0" width="{view_w:g}" height="{view_h:g}" fill="#f7f7f5"/>',
    ]


def render_svg(obj: LayoutDoc | GridTensor, threshold: float = 0.5) -> str:
    """Render a layout (one rect per element) or a grid (one rect per cell
    whose value exceeds the threshold) as standalone SVG text.

    Rectangles carry a data-class attribute so interactive clients can map
    clicks back to element classes.
    """
    parts: list[str]
    if isinstance(obj, LayoutDoc):
        obj.validate()
        w, h = float(obj.screen_w), float(obj.screen_h)
        parts = _svg_header(w, h)
        for el in obj.elements:
            x0, y0, x1, y1 = el.bbox
            parts.append(
                f'<rect x="{x0 * w:.2f}" y="{y0 * h:.2f}" '
                f'width="{(x1 - x0) * w:.2f}" height="{(y1 - y0) * h:.2f}" '
                f'fill="{SVG_CLASS_COLORS[el.cls]}" fill-opacity="0.88" '
                f"data-class={quoteattr(el.cls.name)}/>"
            )
    elif isinstance(obj, GridTensor):
        spec = obj.spec
        parts = _svg_header(spec.cols, spec.rows)
        classes = list(ElementClass)
        for c in range(spec.channels):
            color = SVG_CLASS_COLORS[classes[c]] if c < N_CLASSES else "#888888"
            name = classes[c].name if c < N_CLASSES else f"CH{c}"
            rows, cols = np.nonzero(obj.cells[c] > threshold)
            for i, j in zip(rows.tolist(), cols.tolist()):
                parts.append(
                    f'<rect x="{j}" y="{i}" width="1" height="1" '
                    f'fill="{color}" fill-opacity="0.88" data-class={quoteattr(name)}/>'
                )
    else:
        raise TypeError(f"cannot render {type(obj).__name__}")
    parts.append("</svg>")
    return "\n".join(parts)


# --- JSONL corpus persistence ---


def doc_to_json(doc: LayoutDoc) -> dict:
    return {
        "id": doc.id,
        "w": doc.screen_w,
        "h": doc.screen_h,
        "elements": [
            {"class": el.cls.name, "bbox": list(el.bbox)} for el in doc.elements
        ],
    }


def doc_from_json(d: dict) -> LayoutDoc:
    try:
        elements = tuple(
            Element(ElementClass[e["class"]], tuple(float(v) for v in e["bbox"]))
            for e in d["elements"]
        )
        doc = LayoutDoc(
            id=str(d["id"]),
            screen_w=int(d["w"]),
            screen_h=int(d["h"]),
            elements=elements,
        )
    except (KeyError, TypeError) as exc:
        raise ValidationError(f"malformed layout record: {exc}") from exc
    doc.validate()
    return doc


def save_jsonl(docs: Iterable[LayoutDoc], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for doc in docs:
            fh.write(json.dumps(doc_to_json(doc)) + "\n")


def load_jsonl(path: str | Path) -> list[LayoutDoc]:
    docs = []
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                docs.append(doc_from_json(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise ValidationError(f"{path}:{line_no}: bad JSON: {exc}") from exc
    return docs
