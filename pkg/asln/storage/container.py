"""Binary dump of processes, sample batches and encoder weights.

Layout (little-endian throughout)::

    b"ASLN1"  magic
    uint32    number of sections
    per section:
        4 bytes  tag (b"PROC", b"BTCH", b"WPCA", b"WICA")
        uint32   header length
        header   UTF-8 JSON: dims, seed, nonlinearity tag and the shapes of
                 the arrays that follow, in order
        float64  array payloads, C order
"""

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core.encoders import IcaEncoder, PcaEncoder
from ..core.generative import GenerativeProcess, Nonlinearity, SampleBatch, SourceDistribution
from ..errors import ContainerFormatError

MAGIC = b"ASLN1"
TAGS = (b"PROC", b"BTCH", b"WPCA", b"WICA")
_FLOAT = np.dtype("<f8")


@dataclass
class Section:
    """One tagged block: JSON metadata plus named float64 arrays."""
    tag: bytes
    meta: Dict[str, Any] = field(default_factory=dict)
    arrays: Dict[str, np.ndarray] = field(default_factory=dict)


def write_container(path, sections: Sequence[Section]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'wb') as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", len(sections)))
        for section in sections:
            if section.tag not in TAGS:
                raise ContainerFormatError(f"Unknown section tag {section.tag!r}")
            header = dict(section.meta)
            header["arrays"] = [[name, list(np.shape(arr))] for name, arr in section.arrays.items()]
            encoded = json.dumps(header, sort_keys=True).encode("utf-8")
            f.write(section.tag)
            f.write(struct.pack("<I", len(encoded)))
            f.write(encoded)
            for arr in section.arrays.values():
                f.write(np.ascontiguousarray(arr, dtype=_FLOAT).tobytes())
    return path


def _take(buffer: memoryview, offset: int, size: int) -> Tuple[memoryview, int]:
    if offset + size > len(buffer):
        raise ContainerFormatError("Container is truncated")
    return buffer[offset:offset + size], offset + size


def read_container(path) -> List[Section]:
    """Parse every section of a container file."""
    data = memoryview(Path(path).read_bytes())
    head, offset = _take(data, 0, len(MAGIC))
    if bytes(head) != MAGIC:
        raise ContainerFormatError(f"Not an asln container: bad magic {bytes(head)!r}")
    raw, offset = _take(data, offset, 4)
    (count,) = struct.unpack("<I", raw)
    sections = []
    for _ in range(count):
        tag, offset = _take(data, offset, 4)
        tag = bytes(tag)
        if tag not in TAGS:
            raise ContainerFormatError(f"Unknown section tag {tag!r}")
        raw, offset = _take(data, offset, 4)
        (length,) = struct.unpack("<I", raw)
        raw, offset = _take(data, offset, length)
        try:
            meta = json.loads(bytes(raw).decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ContainerFormatError(f"Corrupt section header: {e}") from e
        arrays = {}
        for name, shape in meta.pop("arrays", []):
            count_items = int(np.prod(shape)) if shape else 1
            raw, offset = _take(data, offset, count_items * _FLOAT.itemsize)
            arrays[name] = np.frombuffer(raw, dtype=_FLOAT).reshape(shape).astype(np.float64)
        sections.append(Section(tag=tag, meta=meta, arrays=arrays))
    if offset != len(data):
        raise ContainerFormatError("Trailing bytes after the last section")
    return sections


def _find(sections: List[Section], tag: bytes) -> Optional[Section]:
    for section in sections:
        if section.tag == tag:
            return section
    return None


def process_section(process: GenerativeProcess) -> Section:
    return Section(
        tag=b"PROC",
        meta={
            "n_sources": process.n_sources,
            "n_bases": process.n_bases,
            "n_inputs": process.n_inputs,
            "seed": process.seed,
            "nonlinearity": process.nonlinearity.kind,
            "source_dist": process.source_dist.kind,
        },
        arrays={"A": process.A, "a": process.a, "B": process.B},
    )


def batch_section(batch: SampleBatch, seed: Optional[int] = None) -> Section:
    return Section(
        tag=b"BTCH",
        meta={"n_samples": batch.n_samples, "seed": seed},
        arrays={"S": batch.S, "F": batch.F, "X": batch.X, "input_mean": batch.input_mean},
    )


def save_process(path, process: GenerativeProcess, batch: Optional[SampleBatch] = None,
                 batch_seed: Optional[int] = None) -> Path:
    """Dump a process and, optionally, one of its batches."""
    sections = [process_section(process)]
    if batch is not None:
        sections.append(batch_section(batch, batch_seed))
    return write_container(path, sections)


def load_process(path) -> Tuple[GenerativeProcess, Optional[SampleBatch]]:
    sections = read_container(path)
    proc = _find(sections, b"PROC")
    if proc is None:
        raise ContainerFormatError("Container holds no PROC section")
    meta = proc.meta
    process = GenerativeProcess(
        n_sources=int(meta["n_sources"]), n_bases=int(meta["n_bases"]),
        n_inputs=int(meta["n_inputs"]),
        A=proc.arrays["A"], a=proc.arrays["a"], B=proc.arrays["B"],
        nonlinearity=Nonlinearity(meta["nonlinearity"]),
        source_dist=SourceDistribution(meta["source_dist"]),
        seed=int(meta["seed"]),
    )
    batch = None
    btch = _find(sections, b"BTCH")
    if btch is not None:
        batch = SampleBatch(S=btch.arrays["S"], F=btch.arrays["F"], X=btch.arrays["X"],
                            input_mean=btch.arrays["input_mean"])
    return process, batch


def save_encoders(path, pca: PcaEncoder, ica: Optional[IcaEncoder] = None) -> Path:
    """Checkpoint cascade weights as WPCA / WICA sections."""
    sections = [Section(
        tag=b"WPCA",
        meta={"k": pca.n_components},
        arrays={"components": pca.components, "eigenvalues": pca.eigenvalues,
                "whitening": pca.whitening, "input_mean": pca.input_mean},
    )]
    if ica is not None:
        sections.append(Section(tag=b"WICA", meta={"g_kind": ica.g_kind}, arrays={"W_ica": ica.W_ica}))
    return write_container(path, sections)


def load_encoders(path) -> Tuple[PcaEncoder, Optional[IcaEncoder]]:
    sections = read_container(path)
    wpca = _find(sections, b"WPCA")
    if wpca is None:
        raise ContainerFormatError("Container holds no WPCA section")
    pca = PcaEncoder(**wpca.arrays)
    wica = _find(sections, b"WICA")
    ica = IcaEncoder(W_ica=wica.arrays["W_ica"], g_kind=wica.meta["g_kind"]) if wica else None
    return pca, ica
