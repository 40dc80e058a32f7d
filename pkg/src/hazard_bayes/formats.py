"""On-disk formats shared by the command-line tools.

* posterior samples: CSV ``mu1,mu2,L,C,D``, one equal-weight draw per row
* summaries: JSON, one SummaryRow object per parameter
* predictive curves: CSV ``x,median,lo68,hi68,lo95,hi95,predictive``
* hypergrid: CSV ``nu,sigma,log_mass,mass``

Floats are written with ``repr`` so files round-trip exactly.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
import re
from pathlib import Path

import numpy as np

from .hierarchical import HyperGrid, grid_from_log_mass
from .player import PlayerPosterior, PredictiveCurve

POSTERIOR_COLUMNS = ("mu1", "mu2", "L", "C", "D")
CURVE_COLUMNS = ("x", "median", "lo68", "hi68", "lo95", "hi95", "predictive")
GRID_COLUMNS = ("nu", "sigma", "log_mass", "mass")
POSTERIOR_SUFFIX = "_posterior.csv"


class FormatError(ValueError):
    pass


def slugify(name: str) -> str:
    slug = re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_")
    return slug or "player"


def _fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    return repr(v)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, allow_nan=True) + "\n",
                          encoding="utf-8")


def write_rows(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def write_posterior_csv(path, post: PlayerPosterior) -> None:
    table = np.column_stack([post.natural, post.C, post.D])
    write_rows(path, POSTERIOR_COLUMNS, (map(float, row) for row in table))


def player_id_from_path(path) -> str:
    name = Path(path).name
    return name[: -len(POSTERIOR_SUFFIX)] if name.endswith(POSTERIOR_SUFFIX) else Path(path).stem


def read_posterior_csv(path, player_id: str | None = None) -> PlayerPosterior:
    path = Path(path)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise FormatError(f"{path}: empty posterior file") from None
        missing = [c for c in ("C", "mu2", "D") if c not in header]
        if missing:
            raise FormatError(f"{path}: posterior header lacks columns {missing}")
        idx = [header.index(c) for c in ("C", "mu2", "D")]
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append([float(row[i]) for i in idx])
            except (ValueError, IndexError):
                raise FormatError(f"{path}:{lineno}: malformed posterior row") from None
    if not rows:
        raise FormatError(f"{path}: posterior file has no samples")
    arr = np.array(rows)
    bad = ~(np.isfinite(arr).all(axis=1) & (arr[:, 0] >= 0) & (arr[:, 0] <= 1)
            & (arr[:, 1] >= 0) & (arr[:, 2] >= 0) & (arr[:, 2] <= 1))
    if bad.any():
        raise FormatError(f"{path}:{int(np.argmax(bad)) + 2}: posterior sample outside the parameter domain")
    pid = player_id or player_id_from_path(path)
    post = PlayerPosterior(pid, arr)
    evidence = path.with_name(f"{pid}_evidence.json")
    if evidence.exists():
        info = json.loads(evidence.read_text(encoding="utf-8"))
        post.log_evidence = info.get("log_z", math.nan)
        post.log_evidence_err = info.get("log_z_err", math.nan)
        post.n_innings = info.get("n_innings", 0)
        post.n_not_out = info.get("n_not_out", 0)
    return post


def write_curve_csv(path, curve: PredictiveCurve) -> None:
    cols = [curve.x, curve.median, curve.lo68, curve.hi68, curve.lo95, curve.hi95, curve.predictive]
    write_rows(path, CURVE_COLUMNS,
               ([int(r[0])] + [float(v) for v in r[1:]] for r in zip(*cols)))


def write_grid_csv(path, grid: HyperGrid) -> None:
    rows = (
        (float(nu), float(sig), float(grid.log_mass[i, j]), float(grid.normalized_mass[i, j]))
        for i, nu in enumerate(grid.nu_axis)
        for j, sig in enumerate(grid.sigma_axis)
    )
    write_rows(path, GRID_COLUMNS, rows)


def read_grid_csv(path) -> HyperGrid:
    data = np.genfromtxt(path, delimiter=",", names=True)
    nu = np.unique(data["nu"])
    sigma = np.unique(data["sigma"])
    log_mass = data["log_mass"].reshape(len(nu), len(sigma))
    return grid_from_log_mass(nu, sigma, log_mass)
