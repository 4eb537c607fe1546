"""Artifact writing: atomic CSV/JSON files, heatmaps and the run sidecar."""

import io
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import matplotlib
import numpy as np
import pandas as pd
from matplotlib.figure import Figure

from smrm.core.logging import logger
from smrm.features.export.schemas import ArtifactRecord, RunMetadata

HEATMAP_CMAP = "RdBu_r"
HEATMAP_RANGE = (-1.0, 1.0)
# Fixed salt so element ids, and therefore the files, are reproducible
SVG_HASH_SALT = "smrm"


def atomic_write_bytes(path: Path, data: bytes) -> Path:
    """Write ``data`` to a temporary file next to ``path``, then rename it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(
        dir=path.parent, prefix=f".{path.name}.", suffix=".tmp"
    )
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_text(path: Path, text: str) -> Path:
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_table(path: Path, table: pd.DataFrame) -> Path:
    """CSV with a header row and shortest round-trip float formatting."""
    return atomic_write_text(path, table.to_csv(index=False, float_format=None))


def write_json(path: Path, payload: Any) -> Path:
    text = json.dumps(payload, indent=2, default=_jsonable)
    return atomic_write_text(path, text + "\n")


def _jsonable(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "model_dump"):
        return value.model_dump(mode="json")
    raise TypeError(f"cannot serialise {type(value).__name__}")


def matrix_table(
    matrix: np.ndarray,
    row_names: Sequence[str],
    column_names: Sequence[str],
    index_label: str = "name",
) -> pd.DataFrame:
    """Labelled matrix as a table whose first column holds the row names."""
    table = pd.DataFrame(np.asarray(matrix), columns=list(column_names))
    table.insert(0, index_label, list(row_names))
    return table


def render_heatmap_svg(matrix: np.ndarray, names: Sequence[str], title: str) -> bytes:
    """Static SVG of a q x q matrix on a fixed diverging scale."""
    q = len(names)
    size = max(4.0, 0.35 * q + 2.0)
    fig = Figure(figsize=(size, size))
    ax = fig.subplots()
    image = ax.imshow(
        np.asarray(matrix),
        cmap=HEATMAP_CMAP,
        vmin=HEATMAP_RANGE[0],
        vmax=HEATMAP_RANGE[1],
    )
    ax.set_xticks(range(q))
    ax.set_yticks(range(q))
    ax.set_xticklabels(names, rotation=90)
    ax.set_yticklabels(names)
    ax.set_title(title)
    fig.colorbar(image, ax=ax, fraction=0.046, pad=0.04)
    fig.tight_layout()
    buffer = io.BytesIO()
    with matplotlib.rc_context({"svg.hashsalt": SVG_HASH_SALT}):
        fig.savefig(buffer, format="svg", metadata={"Date": None})
    return buffer.getvalue()


class ArtifactWriter:
    """Writes the artifacts of one run and keeps their records for the sidecar."""

    def __init__(self, out_dir: Path):
        self.out_dir = Path(out_dir)
        self.records: List[ArtifactRecord] = []

    def _record(self, path: Path, kind: str, description: str) -> Path:
        relative = path.relative_to(self.out_dir).as_posix()
        self.records = [r for r in self.records if r.path != relative]
        self.records.append(
            ArtifactRecord(path=relative, kind=kind, description=description)
        )
        logger.info(f"Wrote {relative}")
        return path

    def table(self, name: str, table: pd.DataFrame, description: str = "") -> Path:
        path = write_table(self.out_dir / name, table)
        return self._record(path, "csv", description)

    def text(self, name: str, text: str, kind: str, description: str = "") -> Path:
        path = atomic_write_text(self.out_dir / name, text)
        return self._record(path, kind, description)

    def json(self, name: str, payload: Any, description: str = "") -> Path:
        path = write_json(self.out_dir / name, payload)
        return self._record(path, "json", description)

    def heatmap(
        self,
        stem: str,
        matrix: np.ndarray,
        names: Sequence[str],
        title: str,
        svg: bool = True,
    ) -> List[Path]:
        """q x q CSV plus an optional SVG rendering."""
        paths = [
            self.table(
                f"{stem}.csv",
                matrix_table(matrix, names, names, index_label="response"),
                title,
            )
        ]
        if svg:
            path = atomic_write_bytes(
                self.out_dir / f"{stem}.svg", render_heatmap_svg(matrix, names, title)
            )
            paths.append(self._record(path, "svg", title))
        return paths

    def missing_artifacts(self) -> List[str]:
        return [r.path for r in self.records if not (self.out_dir / r.path).is_file()]

    def write_metadata(
        self, metadata: RunMetadata, name: str = "run_metadata.json"
    ) -> Path:
        """Sidecar listing every artifact written so far."""
        document = metadata.model_copy(update={"artifacts": tuple(self.records)})
        path = write_json(self.out_dir / name, document.model_dump(mode="json"))
        logger.info(f"Wrote {name} ({len(self.records)} artifacts)")
        return path


def write_error_record(
    out_dir: Optional[Path], record: Dict[str, Any]
) -> Optional[Path]:
    """Write ``error.json`` when an output directory is known."""
    if out_dir is None:
        return None
    path = Path(out_dir) / "error.json"
    try:
        return write_json(path, record)
    except OSError as exc:
        logger.error(f"Could not write error record to {path}: {exc}")
        return None
