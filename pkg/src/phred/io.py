"""Matrix Market exchange files and JSON model manifests.

One .mtx file per matrix plus a manifest declaring the realization kind
and sizes. Files are written with shortest-representation decimal text
(Python repr) so values round-trip at full double precision; reading
goes through scipy's Matrix Market parser and accepts both coordinate
and array forms.
"""

import json
import os

import numpy as np
import scipy.io as sio
import scipy.sparse as sp

from .core import InterpolationData, PortHamiltonianSystem, StateSpaceSystem
from .errors import BadParams

PH_MATRICES = ("J", "R", "Q", "B")
SS_MATRICES = ("E", "A", "B", "C")


def write_matrix_market(path, mat, comment=""):
    """Write one matrix: coordinate form for sparse, array form for dense."""
    with open(path, "w") as fh:
        if sp.issparse(mat):
            coo = mat.tocoo()
            fh.write("%%MatrixMarket matrix coordinate real general\n")
            if comment:
                fh.write(f"%{comment}\n")
            fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
            for i, j, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")
        else:
            arr = np.atleast_2d(np.asarray(mat, dtype=float))
            fh.write("%%MatrixMarket matrix array real general\n")
            if comment:
                fh.write(f"%{comment}\n")
            fh.write(f"{arr.shape[0]} {arr.shape[1]}\n")
            for j in range(arr.shape[1]):
                for i in range(arr.shape[0]):
                    fh.write(f"{float(arr[i, j])!r}\n")


def read_matrix_market(path):
    mat = sio.mmread(path)
    return mat.tocsc() if sp.issparse(mat) else np.asarray(mat)


def _atomic_json(path, payload):
    tmp = f"{path}.tmp"
    with open(tmp, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)


def save_ph(directory, ph, comment=""):
    """Write J.mtx, R.mtx, Q.mtx, B.mtx plus manifest.json."""
    os.makedirs(directory, exist_ok=True)
    files = {}
    for name in PH_MATRICES:
        fname = f"{name}.mtx"
        write_matrix_market(os.path.join(directory, fname),
                            getattr(ph, name), comment)
        files[name] = fname
    _atomic_json(os.path.join(directory, "manifest.json"),
                 {"kind": "ph", "n": ph.n, "m": ph.m, "files": files})
    return os.path.join(directory, "manifest.json")


def save_state_space(directory, sys, comment=""):
    """Write E.mtx, A.mtx, B.mtx, C.mtx plus manifest.json."""
    os.makedirs(directory, exist_ok=True)
    files = {}
    for name in SS_MATRICES:
        fname = f"{name}.mtx"
        write_matrix_market(os.path.join(directory, fname),
                            getattr(sys, name), comment)
        files[name] = fname
    _atomic_json(os.path.join(directory, "manifest.json"),
                 {"kind": "ss", "n": sys.n, "m": sys.m, "p": sys.p,
                  "files": files})
    return os.path.join(directory, "manifest.json")


def load_system(path):
    """Load a system from a manifest path or a directory containing one.

    Returns a PortHamiltonianSystem or StateSpaceSystem according to the
    manifest kind.
    """
    if os.path.isdir(path):
        path = os.path.join(path, "manifest.json")
    with open(path) as fh:
        manifest = json.load(fh)
    base = os.path.dirname(path)
    kind = manifest.get("kind")
    files = manifest.get("files", {})

    def mat(name):
        return read_matrix_market(os.path.join(base, files[name]))

    if kind == "ph":
        ph = PortHamiltonianSystem(mat("J"), mat("R"), mat("Q"), mat("B"))
        if ph.n != manifest.get("n") or ph.m != manifest.get("m"):
            raise BadParams("manifest sizes disagree with the matrix files")
        return ph
    if kind == "ss":
        sys = StateSpaceSystem(mat("E"), mat("A"), mat("B"), mat("C"))
        if sys.n != manifest.get("n"):
            raise BadParams("manifest sizes disagree with the matrix files")
        return sys
    raise BadParams(f"unknown manifest kind {kind!r}")


def save_interpolation_data(path, data):
    payload = {
        "points": [[float(s.real), float(s.imag)] for s in data.points],
        "directions": [[[float(c.real), float(c.imag)] for c in row]
                       for row in data.directions],
    }
    _atomic_json(path, payload)


def load_interpolation_data(path):
    with open(path) as fh:
        payload = json.load(fh)
    points = np.array([complex(re, im) for re, im in payload["points"]])
    directions = np.array(
        [[complex(re, im) for re, im in row] for row in payload["directions"]])
    return InterpolationData(points, directions)
