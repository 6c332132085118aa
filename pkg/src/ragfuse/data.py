"""Dataset directory format, CSV-dump conversion, and the synthetic generator.

Directory layout written by :func:`save_dataset`:

    manifest.json   keys: num_nodes, num_relations, feature_dim,
                    relation_names, files
    features.bin    little-endian float32, row-major, n x k
    labels.csv      one "node_id,label" line per node
    edges_r<i>.csv  one "src,dst" line per undirected edge, src < dst

The synthetic generator plants two independently tunable signals: a feature
signal (class-conditional mean separation) and a topology signal (per-relation
edge homophily). Structural draws use integer RNG output only, so a seed fixes
the dataset bit-for-bit across platforms.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import MultiRelationGraph, build_graph

_COIN_SCALE = 2**53


@dataclass
class RelationConfig:
    mean_degree: int
    homophily: float

    def validate(self, num_nodes: int):
        if not 0.0 <= self.homophily <= 1.0:
            raise ValueError("homophily must lie in [0, 1]")
        if not 0 < self.mean_degree < num_nodes:
            raise ValueError("mean_degree must lie in (0, num_nodes)")


@dataclass
class SyntheticConfig:
    num_nodes: int
    fraud_fraction: float
    feature_dim: int
    feature_separation: float
    relations: list[RelationConfig]
    noise_fraction: float = 0.0
    seed: int = 0

    def validate(self):
        if self.num_nodes < 2:
            raise ValueError("need at least two nodes")
        if not 0.0 < self.fraud_fraction < 1.0:
            raise ValueError("fraud_fraction must lie in (0, 1)")
        if self.feature_dim < 1:
            raise ValueError("feature_dim must be >= 1")
        if self.feature_separation < 0:
            raise ValueError("feature_separation must be >= 0")
        if not 0.0 <= self.noise_fraction <= 1.0:
            raise ValueError("noise_fraction must lie in [0, 1]")
        if not self.relations:
            raise ValueError("need at least one relation")
        for rel in self.relations:
            rel.validate(self.num_nodes)

    @classmethod
    def from_dict(cls, raw: dict) -> "SyntheticConfig":
        known = {
            "num_nodes",
            "fraud_fraction",
            "feature_dim",
            "feature_separation",
            "relations",
            "noise_fraction",
            "seed",
        }
        unknown = set(raw) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        rels = [
            RelationConfig(mean_degree=int(r["mean_degree"]), homophily=float(r["homophily"]))
            for r in raw["relations"]
        ]
        cfg = cls(
            num_nodes=int(raw["num_nodes"]),
            fraud_fraction=float(raw["fraud_fraction"]),
            feature_dim=int(raw["feature_dim"]),
            feature_separation=float(raw["feature_separation"]),
            relations=rels,
            noise_fraction=float(raw.get("noise_fraction", 0.0)),
            seed=int(raw.get("seed", 0)),
        )
        cfg.validate()
        return cfg

    def as_dict(self) -> dict:
        return {
            "num_nodes": self.num_nodes,
            "fraud_fraction": self.fraud_fraction,
            "feature_dim": self.feature_dim,
            "feature_separation": self.feature_separation,
            "relations": [
                {"mean_degree": r.mean_degree, "homophily": r.homophily}
                for r in self.relations
            ],
            "noise_fraction": self.noise_fraction,
            "seed": self.seed,
        }


@dataclass
class DatasetManifest:
    num_nodes: int
    num_relations: int
    feature_dim: int
    relation_names: list[str]
    files: dict

    def as_dict(self) -> dict:
        return {
            "num_nodes": self.num_nodes,
            "num_relations": self.num_relations,
            "feature_dim": self.feature_dim,
            "relation_names": self.relation_names,
            "files": self.files,
        }


def _coin(rng: np.random.Generator, p: float, size) -> np.ndarray:
    """Bernoulli(p) from integer draws (no float RNG in structural decisions)."""
    return rng.integers(0, _COIN_SCALE, size=size) < int(round(p * _COIN_SCALE))


def generate_synthetic(config: SyntheticConfig) -> MultiRelationGraph:
    """Draw a labeled multi-relation graph; deterministic given config.seed."""
    config.validate()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    n = config.num_nodes
    k = config.feature_dim

    labels = _coin(rng, config.fraud_fraction, n).astype(np.int64)

    num_noise = int(round(k * config.noise_fraction))
    num_informative = k - num_noise
    feats = rng.standard_normal((n, k))
    shift = np.where(labels == 1, config.feature_separation / 2.0, -config.feature_separation / 2.0)
    feats[:, :num_informative] += shift[:, None]
    # float32 storage precision so save/load round-trips exactly
    feats = feats.astype(np.float32).astype(np.float64)

    class_ids = [np.flatnonzero(labels == 0), np.flatnonzero(labels == 1)]
    edges_per_relation = []
    for rel in config.relations:
        deg = rel.mean_degree
        src = np.repeat(np.arange(n, dtype=np.int64), deg)
        within = _coin(rng, rel.homophily, n * deg)
        raw_pick = rng.integers(0, 2**62, size=n * deg)
        dst = np.empty(n * deg, dtype=np.int64)
        for cls in (0, 1):
            same_pool, other_pool = class_ids[cls], class_ids[1 - cls]
            mask_cls = labels[src] == cls
            use_same = mask_cls & within
            use_other = mask_cls & ~within
            if same_pool.size:
                dst[use_same] = same_pool[raw_pick[use_same] % same_pool.size]
            else:
                dst[use_same] = src[use_same]  # degenerate: drops as self-edge
            if other_pool.size:
                dst[use_other] = other_pool[raw_pick[use_other] % other_pool.size]
            else:
                dst[use_other] = src[use_other]
        edges_per_relation.append(np.stack([src, dst], axis=1))

    return build_graph(edges_per_relation, feats, labels)


def save_dataset(
    graph: MultiRelationGraph, directory: str | Path, relation_names: list[str] | None = None
) -> DatasetManifest:
    """Write the dataset directory format; returns the manifest."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    names = relation_names or [f"relation_{r}" for r in range(graph.num_relations)]
    if len(names) != graph.num_relations:
        raise ValueError("relation_names length mismatch")

    edge_files = []
    for r in range(graph.num_relations):
        fname = f"edges_r{r}.csv"
        edge_files.append(fname)
        edges = graph.edge_array(r)
        with open(directory / fname, "w", encoding="utf-8", newline="\n") as fh:
            for s, d in edges:
                fh.write(f"{s},{d}\n")

    with open(directory / "labels.csv", "w", encoding="utf-8", newline="\n") as fh:
        for i, y in enumerate(graph.labels):
            fh.write(f"{i},{y}\n")

    (directory / "features.bin").write_bytes(
        graph.features.astype("<f4").tobytes(order="C")
    )

    manifest = DatasetManifest(
        num_nodes=graph.num_nodes,
        num_relations=graph.num_relations,
        feature_dim=graph.feature_dim,
        relation_names=names,
        files={"features": "features.bin", "labels": "labels.csv", "edges": edge_files},
    )
    with open(directory / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest.as_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def read_manifest(directory: str | Path) -> DatasetManifest:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise ValueError(f"missing manifest.json in {directory}")
    raw = json.loads(path.read_text(encoding="utf-8"))
    required = {"num_nodes", "num_relations", "feature_dim", "relation_names", "files"}
    missing = required - set(raw)
    if missing:
        raise ValueError(f"manifest missing keys: {sorted(missing)}")
    return DatasetManifest(
        num_nodes=int(raw["num_nodes"]),
        num_relations=int(raw["num_relations"]),
        feature_dim=int(raw["feature_dim"]),
        relation_names=list(raw["relation_names"]),
        files=raw["files"],
    )


def _read_edge_csv(path: Path) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"{path.name}:{lineno}: malformed edge row {line!r}")
            rows.append((int(parts[0]), int(parts[1])))
    return np.array(rows, dtype=np.int64).reshape(-1, 2)


def load_dataset(directory: str | Path) -> MultiRelationGraph:
    """Load the directory format back into an immutable graph."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    n, k = manifest.num_nodes, manifest.feature_dim

    feat_path = directory / manifest.files["features"]
    if not feat_path.exists():
        raise ValueError(f"missing feature file {feat_path.name}")
    blob = feat_path.read_bytes()
    if len(blob) != 4 * n * k:
        raise ValueError(
            f"feature row count mismatch: expected {n}x{k} float32 "
            f"({4 * n * k} bytes), found {len(blob)} bytes"
        )
    features = np.frombuffer(blob, dtype="<f4").reshape(n, k).astype(np.float64)

    label_path = directory / manifest.files["labels"]
    if not label_path.exists():
        raise ValueError(f"missing label file {label_path.name}")
    labels = np.full(n, -1, dtype=np.int64)
    with open(label_path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 2:
                raise ValueError(f"labels.csv:{lineno}: malformed row {line!r}")
            node, lab = int(parts[0]), int(parts[1])
            if not 0 <= node < n:
                raise ValueError(f"labels.csv:{lineno}: node id {node} out of range")
            labels[node] = lab
    if (labels < 0).any():
        raise ValueError("label row count mismatch: not every node labeled")

    edge_lists = []
    for fname in manifest.files["edges"]:
        path = directory / fname
        if not path.exists():
            raise ValueError(f"missing edge file {fname}")
        edge_lists.append(_read_edge_csv(path))
    if len(edge_lists) != manifest.num_relations:
        raise ValueError("edge file count does not match num_relations")

    return build_graph(edge_lists, features, labels)


def dataset_checksums(directory: str | Path) -> dict[str, str]:
    """sha256 of every file the manifest references, plus the manifest itself."""
    directory = Path(directory)
    manifest = read_manifest(directory)
    names = ["manifest.json", manifest.files["features"], manifest.files["labels"]]
    names += list(manifest.files["edges"])
    return {
        name: hashlib.sha256((directory / name).read_bytes()).hexdigest()
        for name in names
    }


def convert_csv_dump(
    features_csv: str | Path,
    labels_csv: str | Path,
    edge_csvs: list[str | Path],
    out_directory: str | Path,
    relation_names: list[str] | None = None,
) -> DatasetManifest:
    """Converter contract: raw CSV dumps in, dataset directory out.

    features_csv rows are "node_id,v0,v1,..."; labels_csv rows are
    "node_id,label"; each edge csv holds "src,dst" rows for one relation.
    Node ids must be contiguous 0..n-1.
    """
    feat_rows: dict[int, list[float]] = {}
    with open(features_csv, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 2:
                raise ValueError(f"features:{lineno}: malformed row")
            feat_rows[int(parts[0])] = [float(v) for v in parts[1:]]
    n = len(feat_rows)
    if sorted(feat_rows) != list(range(n)):
        raise ValueError("feature node ids must be contiguous 0..n-1")
    features = np.array([feat_rows[i] for i in range(n)], dtype=np.float64)

    labels = np.full(n, -1, dtype=np.int64)
    with open(labels_csv, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            node, lab = line.split(",")
            labels[int(node)] = int(lab)
    if (labels < 0).any():
        raise ValueError("labels missing for some nodes")

    edge_lists = [_read_edge_csv(Path(p)) for p in edge_csvs]
    graph = build_graph(edge_lists, features, labels)
    return save_dataset(graph, out_directory, relation_names)
