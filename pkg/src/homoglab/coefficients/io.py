"""Delimited-text dumps of lattice data.

Layout: header lines starting with '#', each `# key = value`, followed by one
value per line. Values are written block after block; inside a block the order
is direction-major (all sites of direction 1, then direction 2, ...) and sites
run lexicographically with the first coordinate slowest. Floats use repr, the
shortest string that round-trips.
"""
from pathlib import Path
from typing import Dict, Iterable, Tuple, Union

import numpy as np

from ..lattice import TorusGrid
from ..media import CoefficientField

PathLike = Union[str, Path]


def write_dump(path: PathLike, header: Dict[str, object], blocks: Iterable[np.ndarray]) -> None:
    lines = [f"# {key} = {value}" for key, value in header.items()]
    for block in blocks:
        lines.extend(repr(float(v)) for v in np.asarray(block, dtype=float).ravel())
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_dump(path: PathLike) -> Tuple[Dict[str, str], np.ndarray]:
    header: Dict[str, str] = {}
    values = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
        elif line.strip():
            values.append(float(line))
    return header, np.array(values)


def dump_field(medium: CoefficientField, path: PathLike) -> None:
    header = {
        "d": medium.grid.dim,
        "L": medium.grid.side,
        "lambda": repr(medium.lam),
        "kind": medium.kind,
        "seed": medium.seed,
    }
    write_dump(path, header, [medium.conductance])


def load_field(path: PathLike) -> CoefficientField:
    header, values = read_dump(path)
    grid = TorusGrid(int(header["d"]), int(header["L"]))
    seed = None if header.get("seed") in (None, "None") else int(header["seed"])
    return CoefficientField(
        grid,
        values.reshape((grid.dim,) + grid.shape),
        float(header["lambda"]),
        kind=header.get("kind", "custom"),
        seed=seed,
    )
