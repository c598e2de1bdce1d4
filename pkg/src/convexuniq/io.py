"""JSON and CSV formats.

Field:  ``{"schema": ..., "grid": {"kind": "gauss_legendre", "L", "nlat", "nlon"},
"values": [...], "coeffs": [...]}`` with ``coeffs`` in the real orthonormal
harmonic basis ordered by ``l^2 + l + m``.

Body:   ``{"kind": "ball" | "ellipsoid" | "harmonic_perturbed_ball", "params": [...]}``
or ``{"kind": "field", "field": <field object>}``.

Reports are written with sorted keys through a temporary file and an atomic
rename, so a reader never sees a partial file.
"""

from __future__ import annotations

import contextlib
import csv
import io as _io
import json
import os
import tempfile

import numpy as np

from .bodies import SupportBody, make_preset
from .errors import DomainError, GridError
from .sphere import ScalarField, build_grid

SCHEMA_VERSION = "1.0"
GRID_KIND = "gauss_legendre"


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialize {type(o).__name__}")


def _clean(o):
    # non-finite floats are not valid JSON
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, np.generic):
        o = o.item()
    if isinstance(o, float) and not np.isfinite(o):
        return None if np.isnan(o) else ("inf" if o > 0 else "-inf")
    return o


def dumps(obj):
    return json.dumps(_clean(obj), sort_keys=True, indent=2, default=_default) + "\n"


def atomic_write(path, text):
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def write_json(path, obj):
    atomic_write(path, dumps(obj))


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_csv(path, header, rows):
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(float(v)) for v in row])
    atomic_write(path, buf.getvalue())


@contextlib.contextmanager
def output_lock(directory):
    """Exclusive lock file in ``directory``; fails fast if another run holds it."""
    os.makedirs(directory, exist_ok=True)
    lock = os.path.join(directory, ".convexuniq.lock")
    try:
        fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
    except FileExistsError as exc:
        raise DomainError(f"output directory {directory} is locked by another run ({lock})") from exc
    try:
        os.write(fd, str(os.getpid()).encode())
        yield lock
    finally:
        os.close(fd)
        with contextlib.suppress(FileNotFoundError):
            os.unlink(lock)


# ------------------------------------------------------------------ fields
def grid_to_dict(grid):
    return {"kind": GRID_KIND, "L": grid.L, "nlat": grid.nlat, "nlon": grid.nlon}


def grid_from_dict(d):
    if d.get("kind", GRID_KIND) != GRID_KIND:
        raise GridError(f"unsupported grid kind {d.get('kind')!r}")
    return build_grid(int(d["L"]), d.get("nlat"), d.get("nlon"))


def field_to_dict(u):
    return {"schema": SCHEMA_VERSION, "grid": grid_to_dict(u.grid), "values": u.values.tolist(),
            "coeffs": u.grid.to_real(u.coeffs).tolist()}


def field_from_dict(d, grid=None):
    g = grid_from_dict(d["grid"])
    if grid is not None:
        grid.check_same(g)
    if "values" in d and d["values"] is not None:
        return ScalarField(g, np.asarray(d["values"], dtype=float))
    return ScalarField.from_coeffs(g, g.from_real(np.asarray(d["coeffs"], dtype=float)))


def field_csv_rows(u, values=None):
    vals = u.values if values is None else values
    return np.column_stack([u.grid.nodes, vals])


def write_field_csv(path, u, values=None):
    write_csv(path, ["x", "y", "z", "value"], field_csv_rows(u, values))


# ------------------------------------------------------------------ bodies
def body_to_dict(body):
    prov = body.provenance
    kind = prov.get("kind")
    if kind == "ball":
        params = [prov["radius"], *prov["center"]]
    elif kind == "ellipsoid":
        params = [*prov["axes"], *prov["center"]]
    elif kind == "harmonic_perturbed_ball":
        params = [prov["radius"], prov["degree"], prov["order"], prov["amplitude"], *prov["center"]]
    else:
        return {"schema": SCHEMA_VERSION, "kind": "field", "field": field_to_dict(body.u), "provenance": prov}
    return {"schema": SCHEMA_VERSION, "kind": kind, "params": params}


def body_from_dict(d, grid, check=True):
    kind = d.get("kind")
    if kind == "field":
        u = field_from_dict(d["field"], grid)
        body = SupportBody(u, d.get("provenance", {"kind": "field"}))
        if check:
            from .bodies import check_convexity
            from .errors import ConvexityError

            rep = check_convexity(u)
            if not rep["pass"]:
                raise ConvexityError(f"field body is not strictly convex (min eigenvalue {rep['min_eig']:.3e})",
                                     rep["min_eig"], rep["argmin_node"])
        return body
    if "params" not in d:
        raise DomainError(f"body of kind {kind!r} needs 'params'")
    return make_preset(kind, d["params"], grid, check=check)


def parse_body_spec(spec, grid, check=True):
    """Body from a JSON path or a preset string ``kind:p1,p2,...[@ax,ay,az]``.

    ``ellipsoid:1.2,1,0.9@0.1,0,0`` is the ellipsoid translated by
    ``(0.1, 0, 0)``.
    """
    if os.path.exists(spec) and spec.endswith(".json"):
        return body_from_dict(read_json(spec), grid, check)
    kind, _, rest = spec.partition(":")
    params_s, _, center_s = rest.partition("@")
    try:
        params = [float(p) for p in params_s.split(",") if p.strip()]
        center = [float(p) for p in center_s.split(",") if p.strip()]
    except ValueError as exc:
        raise DomainError(f"malformed body spec {spec!r}: {exc}") from exc
    if center and len(center) != 3:
        raise DomainError(f"translation in {spec!r} needs three components")
    if center:
        base = {"ball": 1, "ellipsoid": 3, "harmonic_perturbed_ball": 4}.get(kind)
        if base is None:
            raise DomainError(f"unknown preset {kind!r}")
        params = params[:base] + center
    return make_preset(kind, params, grid, check=check)
