"""Result persistence: CSV, JSON and SVG with atomic writes, plus run manifests."""
from __future__ import annotations

from dataclasses import dataclass, field
import datetime as _dt
import json
import math
import os
from pathlib import Path
import tempfile

import numpy as np

from .grid import Field, Grid

FLOAT_FMT = ".17g"


def fmt(value) -> str:
    """17 significant digits: parsing the text returns the same double."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return format(float(value), FLOAT_FMT)
    return str(value)


def atomic_write(path, text: str) -> Path:
    """Write via a temporary file in the same directory and rename."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def emit_json(obj, path) -> Path:
    """JSON with sorted keys; non-finite numbers become null."""
    return atomic_write(path, dumps(obj))


def emit_csv(header, rows, path) -> Path:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        lines.append(",".join(fmt(v) for v in row))
    return atomic_write(path, "\n".join(lines) + "\n")


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    return header, [line.split(",") for line in lines[1:]]


def write_profile(phi: Field, path) -> Path:
    return emit_csv(("xi", "value"), zip(phi.grid.x, phi.values), path)


def read_profile(path, frame: str = "moving") -> Field:
    header, rows = read_csv(path)
    if header != ["xi", "value"]:
        raise ValueError(f"{path}: expected header xi,value")
    xi = np.array([float(r[0]) for r in rows])
    values = np.array([float(r[1]) for r in rows])
    grid = Grid(float(-xi[0]), len(xi))
    return Field(grid, values, frame)


def write_trajectory(fields, directory, reason: str | None = None) -> Path:
    """One profile CSV per snapshot plus ``index.json`` listing the times."""
    directory = Path(directory)
    names = []
    for k, f in enumerate(fields):
        name = f"snapshot_{k:05d}.csv"
        write_profile(f, directory / name)
        names.append(name)
    index = {"times": [f.time for f in fields], "files": names}
    if reason is not None:
        index["reason"] = reason
    return emit_json(index, directory / "index.json")


SWEEP_HEADER = ("c", "L", "lambda", "classification", "steady_max")


def write_sweep(cells, path, timings: bool = False) -> Path:
    """Phase-sweep CSV in cell order.  Wall times vary between runs, so the
    ``wall_time`` column is written only when ``timings`` is set."""
    header = SWEEP_HEADER + (("wall_time",) if timings else ())
    rows = []
    for cell in cells:
        row = [cell.c, cell.L, cell.lambda_cl, cell.classification, cell.steady_max]
        if timings:
            row.append(cell.wall_time)
        rows.append(row)
    return emit_csv(header, rows, path)


# --- SVG -------------------------------------------------------------------

COLORS = {"Persistence": "#2c7fb8", "Extinction": "#d95f0e", "Indeterminate": "#bdbdbd"}


def _polyline(xs, ys, box, color, width=1.5, dash=None):
    (x0, x1, y0, y1), (left, top, w, h) = box
    sx = lambda v: left + (v - x0) / (x1 - x0) * w
    sy = lambda v: top + h - (v - y0) / (y1 - y0) * h
    pts = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in zip(xs, ys))
    extra = f' stroke-dasharray="{dash}"' if dash else ""
    return f'<polyline fill="none" stroke="{color}" stroke-width="{width}"{extra} points="{pts}"/>'


def _axes(box, xlabel, ylabel, title):
    (x0, x1, y0, y1), (left, top, w, h) = box
    return [
        f'<rect x="{left}" y="{top}" width="{w}" height="{h}" fill="none" stroke="#444"/>',
        f'<text x="{left + w / 2}" y="{top - 8}" text-anchor="middle" font-size="13">{title}</text>',
        f'<text x="{left + w / 2}" y="{top + h + 30}" text-anchor="middle" font-size="12">{xlabel}</text>',
        f'<text x="{left - 40}" y="{top + h / 2}" font-size="12" transform="rotate(-90 {left - 40} {top + h / 2})" text-anchor="middle">{ylabel}</text>',
        f'<text x="{left}" y="{top + h + 15}" font-size="10">{x0:.3g}</text>',
        f'<text x="{left + w}" y="{top + h + 15}" font-size="10" text-anchor="end">{x1:.3g}</text>',
        f'<text x="{left - 5}" y="{top + h}" font-size="10" text-anchor="end">{y0:.3g}</text>',
        f'<text x="{left - 5}" y="{top + 10}" font-size="10" text-anchor="end">{y1:.3g}</text>',
    ]


def _svg(width, height, body):
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
            f'viewBox="0 0 {width} {height}">\n' + "\n".join(body) + "\n</svg>\n")


def profile_svg(phi: Field, path, tail_fits=None) -> Path:
    """Profile and log-profile against xi; ``tail_fits`` is an optional list
    of ``(slope, (lo, hi))`` lines drawn on the log panel."""
    x, v = phi.grid.x, phi.values
    step = max(1, len(x) // 800)
    xs, vs = x[::step], v[::step]
    top = max(float(vs.max()), 1e-300)
    body = []
    box1 = ((float(x[0]), float(x[-1]), 0.0, top * 1.05), (70, 30, 520, 220))
    body += _axes(box1, "xi", "profile", "profile")
    body.append(_polyline(xs, vs, box1, "#2c7fb8"))
    pos = vs > 0
    if pos.any():
        logs = np.log10(vs[pos])
        lo = max(float(logs.min()), float(logs.max()) - 300)
        box2 = ((float(x[0]), float(x[-1]), lo, float(logs.max()) + 0.5), (70, 320, 520, 220))
        body += _axes(box2, "xi", "log10 profile", "log-profile")
        body.append(_polyline(xs[pos], np.maximum(logs, lo), box2, "#2c7fb8"))
        for slope, (a, b) in tail_fits or []:
            sel = (x >= a) & (x <= b) & (v > 0)
            if sel.sum() < 2:
                continue
            anchor_x = x[sel][0]
            anchor_y = math.log10(v[sel][0])
            seg = np.array([a, b])
            body.append(_polyline(seg, anchor_y + slope * (seg - anchor_x) / math.log(10), box2,
                                  "#d95f0e", 1.2, "5,3"))
    return atomic_write(path, _svg(640, 590, body))


def phase_svg(cells, path) -> Path:
    """Colored cell map of the classification over (L, c)."""
    cs = sorted({cell.c for cell in cells})
    Ls = sorted({cell.L for cell in cells})
    cw, ch, left, top = 60, 36, 80, 40
    body = [f'<text x="{left}" y="{top - 15}" font-size="13">classification by (L, c)</text>']
    for cell in cells:
        i, j = Ls.index(cell.L), len(cs) - 1 - cs.index(cell.c)
        color = COLORS.get(cell.classification, "#ffffff")
        body.append(f'<rect x="{left + i * cw}" y="{top + j * ch}" width="{cw}" height="{ch}" '
                    f'fill="{color}" stroke="#fff"><title>c={cell.c:.6g} L={cell.L:.6g} '
                    f'lambda={cell.lambda_cl:.6g} {cell.classification}</title></rect>')
    for i, L in enumerate(Ls):
        body.append(f'<text x="{left + i * cw + cw / 2}" y="{top + len(cs) * ch + 15}" '
                    f'font-size="10" text-anchor="middle">{L:.3g}</text>')
    for j, c in enumerate(reversed(cs)):
        body.append(f'<text x="{left - 6}" y="{top + j * ch + ch / 2 + 4}" font-size="10" '
                    f'text-anchor="end">{c:.3g}</text>')
    body.append(f'<text x="{left + len(Ls) * cw / 2}" y="{top + len(cs) * ch + 32}" '
                f'font-size="12" text-anchor="middle">L</text>')
    body.append(f'<text x="20" y="{top + len(cs) * ch / 2}" font-size="12">c</text>')
    ly = top + len(cs) * ch + 50
    for k, (name, color) in enumerate(COLORS.items()):
        body.append(f'<rect x="{left + k * 130}" y="{ly}" width="12" height="12" fill="{color}"/>')
        body.append(f'<text x="{left + k * 130 + 16}" y="{ly + 11}" font-size="11">{name}</text>')
    width = left + len(Ls) * cw + 40
    return atomic_write(path, _svg(max(width, 480), ly + 30, body))


def emit_svg(result, path, **kwargs) -> Path:
    """Profile plot for a Field, phase map for a list of cells."""
    if isinstance(result, Field):
        return profile_svg(result, path, **kwargs)
    return phase_svg(list(result), path)


# --- manifest ----------------------------------------------------------------

def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    config: dict | None = None
    config_hash: str | None = None
    seed: int | None = None
    version: str = ""
    started: str = field(default_factory=_now)
    finished: str | None = None
    tolerances: dict = field(default_factory=dict)
    outcome: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    exit_code: int | None = None

    def finish(self, exit_code: int, **outcome) -> "RunManifest":
        self.finished = _now()
        self.exit_code = exit_code
        self.outcome.update(outcome)
        return self

    def write(self, directory) -> Path:
        return emit_json(self.__dict__, Path(directory) / f"{self.command}_manifest.json")
