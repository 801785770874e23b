"""File formats: binary dataset, JSON model checkpoint, curve-label CSV,
geometry exports and optimization reports.

The dataset is a little-endian binary stream of independent, CRC-checked
records behind a JSON header, so reads can stream and corruption is
reported with the record index. All JSON numbers use Python's shortest
round-trip float formatting (exact float64)."""

from __future__ import annotations

import base64
import hashlib
import json
import struct
import zlib
from dataclasses import asdict, dataclass, field

import numpy as np

from . import slots
from .datagen import DatasetRecord, Provenance
from .fe import MaterialParams
from .graph import TrussGraph, UnitCell
from .nn import MlpSpec, ParamBlock
from .slots import N_SLOTS, N_UPPER
from .vae import PROPERTY_DIMS, LatentLayout, ModelState

_MAGIC = b"TLDS0001"
_FORMAT_VERSION = 1
_CHECKPOINT_VERSION = 1
_TRIU = np.triu_indices(N_SLOTS, k=1)


class DataFormatError(ValueError):
    """Corrupt or incompatible file content."""


@dataclass(frozen=True)
class DatasetMeta:
    property_kind: str = "none"  # "none" until homogenize fills labels
    rho: float = 0.15
    material: MaterialParams = field(default_factory=MaterialParams)
    datagen_digest: str = ""
    seed: int = 0

    @property
    def n_props(self) -> int:
        return 0 if self.property_kind == "none" else PROPERTY_DIMS[self.property_kind]


def _graph_to_payload(rec: DatasetRecord, n_props: int) -> bytes:
    bits = np.packbits(rec.graph.adjacency[_TRIU]).tobytes()
    offsets = rec.graph.offsets.astype("<f8").tobytes()
    if n_props:
        if rec.properties is None:
            raise DataFormatError("record lacks properties but header declares them")
        props = np.asarray(rec.properties, dtype="<f8").tobytes()
    else:
        props = b""
    prov = struct.pack(
        "<QQQ", rec.provenance.parent_a, rec.provenance.parent_b, rec.provenance.stream
    )
    return bits + offsets + props + prov


def _payload_to_record(payload: bytes, n_props: int) -> DatasetRecord:
    n_bits = (N_UPPER + 7) // 8
    expect = n_bits + 8 * slots.N_OFFSETS + 8 * n_props + 24
    if len(payload) != expect:
        raise DataFormatError(f"payload length {len(payload)} != {expect}")
    bits = np.unpackbits(np.frombuffer(payload[:n_bits], dtype=np.uint8))[:N_UPPER]
    pos = n_bits
    offsets = np.frombuffer(payload[pos : pos + 8 * slots.N_OFFSETS], dtype="<f8").copy()
    pos += 8 * slots.N_OFFSETS
    props = None
    if n_props:
        props = np.frombuffer(payload[pos : pos + 8 * n_props], dtype="<f8").copy()
        pos += 8 * n_props
    pa, pb, stream = struct.unpack("<QQQ", payload[pos : pos + 24])
    adj = np.eye(N_SLOTS, dtype=np.uint8)
    adj[_TRIU] = bits
    adj.T[_TRIU] = bits
    return DatasetRecord(TrussGraph(adj, offsets), props, Provenance(pa, pb, stream))


def write_dataset(path, records: list[DatasetRecord], meta: DatasetMeta) -> None:
    header = {
        "format_version": _FORMAT_VERSION,
        "slot_table_hash": slots.slot_table_hash(),
        "property_kind": meta.property_kind,
        "n_props": meta.n_props,
        "rho": meta.rho,
        "material": {"e_s": meta.material.e_s, "nu_s": meta.material.nu_s},
        "datagen_digest": meta.datagen_digest,
        "seed": meta.seed,
        "n_records": len(records),
    }
    blob = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(blob)))
        fh.write(blob)
        for rec in records:
            payload = _graph_to_payload(rec, meta.n_props)
            fh.write(struct.pack("<II", len(payload), zlib.crc32(payload)))
            fh.write(payload)


def read_dataset(path) -> tuple[list[DatasetRecord], DatasetMeta]:
    with open(path, "rb") as fh:
        if fh.read(8) != _MAGIC:
            raise DataFormatError(f"{path}: not a trusslat dataset")
        raw = fh.read(4)
        if len(raw) != 4:
            raise DataFormatError(f"{path}: truncated header")
        (hlen,) = struct.unpack("<I", raw)
        try:
            header = json.loads(fh.read(hlen).decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise DataFormatError(f"{path}: unreadable header: {exc}") from exc
        if header.get("format_version") != _FORMAT_VERSION:
            raise DataFormatError(
                f"{path}: unsupported format version {header.get('format_version')}"
            )
        if header["slot_table_hash"] != slots.slot_table_hash():
            raise DataFormatError(f"{path}: slot table hash mismatch")
        meta = DatasetMeta(
            property_kind=header["property_kind"],
            rho=header["rho"],
            material=MaterialParams(**header["material"]),
            datagen_digest=header["datagen_digest"],
            seed=header["seed"],
        )
        records = []
        for idx in range(header["n_records"]):
            head = fh.read(8)
            if len(head) != 8:
                raise DataFormatError(f"{path}: record {idx}: truncated")
            plen, crc = struct.unpack("<II", head)
            payload = fh.read(plen)
            if len(payload) != plen:
                raise DataFormatError(f"{path}: record {idx}: truncated")
            if zlib.crc32(payload) != crc:
                raise DataFormatError(f"{path}: record {idx}: checksum mismatch")
            try:
                records.append(_payload_to_record(payload, meta.n_props))
            except DataFormatError as exc:
                raise DataFormatError(f"{path}: record {idx}: {exc}") from exc
    return records, meta


# -- checkpoints -------------------------------------------------------------


def write_checkpoint(path, model: ModelState) -> None:
    blocks = {}
    for name, block in model.blocks.items():
        blocks[name] = {
            "widths": list(block.spec.layer_widths),
            "activations": list(block.spec.activations),
            "params": base64.b64encode(block.flat.astype("<f8").tobytes()).decode(),
        }
    doc = {
        "format_version": _CHECKPOINT_VERSION,
        "kind": "trusslat-checkpoint",
        "layout": asdict(model.layout),
        "property_kind": model.property_kind,
        "label_mean": model.label_mean.tolist(),
        "label_std": model.label_std.tolist(),
        "config_digest": model.config_digest,
        "blocks": blocks,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def read_checkpoint(
    path,
    expect_layout: LatentLayout | None = None,
    expect_property_kind: str | None = None,
) -> ModelState:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON: {exc}") from exc
    if doc.get("kind") != "trusslat-checkpoint":
        raise DataFormatError(f"{path}: not a trusslat checkpoint")
    if doc.get("format_version") != _CHECKPOINT_VERSION:
        raise DataFormatError(
            f"{path}: unsupported checkpoint version {doc.get('format_version')}"
        )
    layout = LatentLayout(**doc["layout"])
    if expect_layout is not None and layout != expect_layout:
        raise DataFormatError(
            f"{path}: layout {layout} does not match requested {expect_layout}"
        )
    if expect_property_kind is not None and doc["property_kind"] != expect_property_kind:
        raise DataFormatError(
            f"{path}: checkpoint predicts {doc['property_kind']}, "
            f"task needs {expect_property_kind}"
        )
    blocks = {}
    for name, spec_doc in doc["blocks"].items():
        spec = MlpSpec(tuple(spec_doc["widths"]), tuple(spec_doc["activations"]))
        flat = np.frombuffer(base64.b64decode(spec_doc["params"]), dtype="<f8").copy()
        blocks[name] = ParamBlock(spec, flat)
    return ModelState(
        layout=layout,
        label_mean=np.array(doc["label_mean"]),
        label_std=np.array(doc["label_std"]),
        property_kind=doc["property_kind"],
        config_digest=doc["config_digest"],
        **blocks,
    )


# -- curve label CSV ----------------------------------------------------------


def write_label_csv(path, labels: dict[str, np.ndarray]) -> None:
    """Rows of graph_hash, sigma_1..sigma_13."""
    with open(path, "w") as fh:
        fh.write("graph_hash," + ",".join(f"sigma_{i + 1}" for i in range(13)) + "\n")
        for digest, values in labels.items():
            fh.write(digest + "," + ",".join(repr(float(v)) for v in values) + "\n")


def read_label_csv(path) -> dict[str, np.ndarray]:
    labels: dict[str, np.ndarray] = {}
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        if header[0] != "graph_hash" or len(header) != 14:
            raise DataFormatError(f"{path}: expected graph_hash,sigma_1..sigma_13")
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 14:
                raise DataFormatError(f"{path}:{lineno}: expected 14 columns")
            try:
                labels[parts[0]] = np.array([float(v) for v in parts[1:]])
            except ValueError as exc:
                raise DataFormatError(f"{path}:{lineno}: {exc}") from exc
    return labels


def attach_curve_labels(records: list[DatasetRecord], labels: dict[str, np.ndarray]) -> int:
    """Set curve13 properties on records whose graph hash has a label row."""
    matched = 0
    for rec in records:
        values = labels.get(rec.graph.digest())
        if values is not None:
            rec.properties = values
            matched += 1
    return matched


# -- geometry export -----------------------------------------------------------


def export_obj(cell: UnitCell, path) -> None:
    """Wireframe OBJ: one vertex per node, one line element per beam."""
    with open(path, "w") as fh:
        fh.write("# trusslat wireframe\n")
        for p in cell.nodes:
            fh.write(f"v {p[0]!r} {p[1]!r} {p[2]!r}\n")
        for i, j, _w in cell.beams:
            fh.write(f"l {i + 1} {j + 1}\n")


def export_beam_csv(cell: UnitCell, path) -> None:
    """One beam per row: x1,y1,z1,x2,y2,z2,radius,weight."""
    with open(path, "w") as fh:
        fh.write("x1,y1,z1,x2,y2,z2,radius,weight\n")
        for i, j, w in cell.beams:
            a, b = cell.nodes[i], cell.nodes[j]
            fh.write(
                f"{a[0]!r},{a[1]!r},{a[2]!r},{b[0]!r},{b[1]!r},{b[2]!r},"
                f"{cell.radius!r},{w!r}\n"
            )


def export_geometry(cell: UnitCell, fmt: str, path) -> None:
    if fmt == "obj_wireframe":
        export_obj(cell, path)
    elif fmt == "beam_csv":
        export_beam_csv(cell, path)
    else:
        raise ValueError(f"unknown geometry format {fmt!r}")


def write_surface_csv(table: np.ndarray, path) -> None:
    """(dx, dy, dz, E) rows from elastic.surface_table."""
    with open(path, "w") as fh:
        fh.write("dx,dy,dz,E\n")
        for row in table:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


# -- graph JSON helpers and optimization reports --------------------------------


def graph_to_doc(g: TrussGraph) -> dict:
    bits = np.packbits(g.adjacency[_TRIU]).tobytes()
    return {
        "adjacency_hex": bits.hex(),
        "offsets": g.offsets.tolist(),
    }


def graph_from_doc(doc: dict) -> TrussGraph:
    bits = np.unpackbits(np.frombuffer(bytes.fromhex(doc["adjacency_hex"]), dtype=np.uint8))
    adj = np.eye(N_SLOTS, dtype=np.uint8)
    adj[_TRIU] = bits[:N_UPPER]
    adj.T[_TRIU] = bits[:N_UPPER]
    return TrussGraph(adj, np.array(doc["offsets"], dtype=float))


def write_optimization_report(path, run, seed: int, rho: float,
                              config_digest: str = "") -> None:
    """Full JSON report: objective, per-seed trajectories, ranked candidates."""
    doc = {
        "kind": "trusslat-optimization-report",
        "format_version": 1,
        "seed": seed,
        "rho": rho,
        "config_digest": config_digest,
        "objective": {
            "kind": run.objective.kind,
            "target": None
            if run.objective.target is None
            else run.objective.target.values.tolist(),
        },
        "fe_verified": run.fe_verified,
        "trajectories": [
            {
                "seed_index": t.seed_index,
                "objective_path": t.objective_path.tolist(),
                "digests": t.digests,
                "z_path": t.z_path.tolist(),
                "best_step": t.best_step,
                "best_objective": t.best_objective,
            }
            for t in run.trajectories
        ],
        "candidates": [
            {
                "seed_index": c.seed_index,
                "source": c.source,
                "graph": graph_to_doc(c.graph),
                "predicted_objective": c.predicted_objective,
                "fe_properties": None
                if c.fe_properties is None
                else np.asarray(c.fe_properties).tolist(),
                "fe_objective": c.fe_objective,
                "fe_failure": c.fe_failure,
            }
            for c in run.candidates
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def read_optimization_report(path) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON: {exc}") from exc
    if doc.get("kind") != "trusslat-optimization-report":
        raise DataFormatError(f"{path}: not an optimization report")
    return doc


def file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
