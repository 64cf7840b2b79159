"""CSV report writers and the run manifest.

All writers format floats with ``repr`` (shortest round-trip) and a fixed
newline, so identical runs produce byte-identical files. Manifests carry
content hashes of every input and output, the seed, and the package
version; they contain no timestamps.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__
from .months import month_label


def fmt_cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # plain float repr, also for numpy scalars
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt_cell(v) for v in row])
    return path


def write_json(path: str | Path, payload: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(output_dir: str | Path, command: str, config_echo: dict,
                   inputs: Sequence[Path], outputs: Sequence[Path]) -> Path:
    payload = {
        "command": command,
        "version": __version__,
        "config": config_echo,
        "inputs": {p.name: sha256_file(p) for p in sorted(inputs)},
        "outputs": {p.name: sha256_file(p) for p in sorted(outputs)},
    }
    return write_json(Path(output_dir) / f"manifest-{command}.json", payload)


def flow_rows(corridors: Sequence[tuple[str, str]], months: Sequence[int], flows,
              scenario_id: str) -> Iterable[Sequence]:
    """flows is (n_corridors, n_months) aligned with corridors x months."""
    for c, (origin, dest) in enumerate(corridors):
        for mi, month in enumerate(months):
            yield dest, origin, month_label(month), float(flows[c, mi]), scenario_id
