"""File formats: CSV payloads with JSON headers, and canonical JSON reports."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .atlas import CIRCLE_ATLAS, TORUS2_ATLAS, SampledMap, grid_ranges
from .energy import DescentTrace
from .manifolds import TargetManifold
from .sections import PullbackSection

_ATLASES = {"circle": CIRCLE_ATLAS, "torus2": TORUS2_ATLAS}


def _header(obj: dict) -> str:
    return "# " + json.dumps(obj, sort_keys=True)


def _read_header(line: str) -> dict:
    if not line.startswith("# "):
        raise ValueError("missing JSON header line")
    return json.loads(line[2:])


def write_map_csv(f: SampledMap, path) -> None:
    """Columns: chart_id, grid indices, coordinate values."""
    path = Path(path)
    dim = f.atlas.dim
    amb = f.target.ambient_dim
    with path.open("w", newline="") as fh:
        fh.write(
            _header(
                {
                    "atlas": f.atlas.kind,
                    "resolution": f.resolution,
                    "target": json.loads(f.target.to_json()),
                }
            )
            + "\n"
        )
        writer = csv.writer(fh)
        writer.writerow(
            ["chart_id"] + [f"i{a}" for a in range(dim)] + [f"c{a}" for a in range(amb)]
        )
        for chart in f.atlas.charts:
            vals = f.values[chart.id]
            flat = vals.reshape(-1, amb)
            shape = vals.shape[:-1]
            for row, idx in enumerate(np.ndindex(shape)):
                writer.writerow(
                    [chart.id, *idx, *(repr(float(x)) for x in flat[row])]
                )


def read_map_csv(path) -> SampledMap:
    path = Path(path)
    with path.open() as fh:
        head = _read_header(fh.readline())
        atlas = _ATLASES[head["atlas"]]
        target = TargetManifold.from_json(json.dumps(head["target"]))
        res = int(head["resolution"])
        reader = csv.reader(fh)
        next(reader)  # column names
        dim = atlas.dim
        amb = target.ambient_dim
        arrays = []
        for chart in atlas.charts:
            shape = tuple(j1 - j0 + 1 for j0, j1 in grid_ranges(chart, res))
            arrays.append(np.empty(shape + (amb,)))
        for row in reader:
            cid = int(row[0])
            idx = tuple(int(x) for x in row[1 : 1 + dim])
            arrays[cid][idx] = [float(x) for x in row[1 + dim :]]
    return SampledMap(atlas, target, res, tuple(arrays))


def write_section_csv(s: PullbackSection, path) -> None:
    """Columns: chart_id, grid indices, base point, vector components."""
    path = Path(path)
    f = s.base_map
    dim = f.atlas.dim
    amb = f.target.ambient_dim
    with path.open("w", newline="") as fh:
        fh.write(
            _header(
                {
                    "atlas": f.atlas.kind,
                    "resolution": f.resolution,
                    "target": json.loads(f.target.to_json()),
                    "bound": s.bound,
                }
            )
            + "\n"
        )
        writer = csv.writer(fh)
        writer.writerow(
            ["chart_id"]
            + [f"i{a}" for a in range(dim)]
            + [f"p{a}" for a in range(amb)]
            + [f"v{a}" for a in range(amb)]
        )
        for chart in f.atlas.charts:
            base = f.values[chart.id].reshape(-1, amb)
            vecs = s.vectors[chart.id].reshape(-1, amb)
            shape = f.values[chart.id].shape[:-1]
            for row, idx in enumerate(np.ndindex(shape)):
                writer.writerow(
                    [chart.id, *idx]
                    + [repr(float(x)) for x in base[row]]
                    + [repr(float(x)) for x in vecs[row]]
                )


def read_section_csv(path) -> PullbackSection:
    path = Path(path)
    with path.open() as fh:
        head = _read_header(fh.readline())
        atlas = _ATLASES[head["atlas"]]
        target = TargetManifold.from_json(json.dumps(head["target"]))
        res = int(head["resolution"])
        reader = csv.reader(fh)
        next(reader)
        dim = atlas.dim
        amb = target.ambient_dim
        bases, vecs = [], []
        for chart in atlas.charts:
            shape = tuple(j1 - j0 + 1 for j0, j1 in grid_ranges(chart, res))
            bases.append(np.empty(shape + (amb,)))
            vecs.append(np.empty(shape + (amb,)))
        for row in reader:
            cid = int(row[0])
            idx = tuple(int(x) for x in row[1 : 1 + dim])
            nums = [float(x) for x in row[1 + dim :]]
            bases[cid][idx] = nums[:amb]
            vecs[cid][idx] = nums[amb:]
    f = SampledMap(atlas, target, res, tuple(bases))
    # stored vectors were projected when the section was built; re-projecting
    # here would perturb the last bits and break exact round trips
    return PullbackSection(f, tuple(vecs), float(head["bound"]))


def write_trace_csv(trace: DescentTrace, path) -> None:
    """One row per iterate: step, energy, grad_norm, step_size."""
    if not trace.rows:
        raise ValueError("trace is empty")
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "energy", "grad_norm", "step_size"])
        for step, energy, gnorm, size in trace.rows:
            writer.writerow([step, repr(energy), repr(gnorm), repr(size)])


def read_trace_csv(path) -> DescentTrace:
    path = Path(path)
    with path.open() as fh:
        reader = csv.reader(fh)
        next(reader)
        rows = tuple(
            (int(r[0]), float(r[1]), float(r[2]), float(r[3])) for r in reader
        )
    return DescentTrace(rows)


def canonical_json(obj) -> str:
    """Deterministic JSON text: sorted keys, plain floats, trailing newline."""
    return json.dumps(_plain(obj), sort_keys=True, indent=2) + "\n"


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    raise TypeError(f"cannot serialize {type(obj)!r}")


def trace_round_trip_equal(a: DescentTrace, b: DescentTrace) -> bool:
    return a.rows == b.rows
