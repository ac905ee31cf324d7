"""Dataset container and report files.

Binary dataset layout (little-endian), magic ``EEGP``, version 1::

    "EEGP" | u32 version | u32 n_subjects | f32 fs | u32 n_channels
    | u32 n_samples | u32 n_classes
    then per subject:
    u32 subject_id | u32 n_trials | u32 labels[n_trials]
    | f32 data[n_trials][n_channels][n_samples]  (row-major)

A companion JSON file at ``<path>.json`` carries the dataset name and the
channel/class names. Reports are flat CSV or JSON rows.
"""

from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from .errors import ConfigError, FormatError
from .signal_core import Dataset, Trial

__all__ = ["save_dataset", "load_dataset", "write_report"]

_MAGIC = b"EEGP"
_VERSION = 1

REPORT_COLUMNS = (
    "repeat",
    "poison_subject",
    "test_subject",
    "acc",
    "asr",
    "config_fingerprint",
)


def save_dataset(dataset, path):
    """Write a dataset to ``path`` plus a ``<path>.json`` metadata sidecar."""
    path = Path(path)
    subjects = []
    seen = set()
    for t in dataset.trials:  # order of first appearance
        if t.subject not in seen:
            seen.add(t.subject)
            subjects.append(t.subject)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(
            struct.pack(
                "<IIfIII",
                _VERSION,
                len(subjects),
                dataset.fs,
                dataset.n_channels,
                dataset.n_samples,
                len(dataset.class_names),
            )
        )
        for subject in subjects:
            trials = [t for t in dataset.trials if t.subject == subject]
            fh.write(struct.pack("<II", subject, len(trials)))
            labels = np.array([t.label for t in trials], dtype="<u4")
            fh.write(labels.tobytes())
            data = np.stack([t.data for t in trials]).astype("<f4")
            fh.write(data.tobytes())
    meta = {
        "name": dataset.name,
        "channel_names": list(dataset.channel_names),
        "class_names": list(dataset.class_names),
    }
    path.with_name(path.name + ".json").write_text(json.dumps(meta, indent=2))


def _read_exact(fh, n, what):
    off = fh.tell()
    buf = fh.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated file while reading {what}", offset=off)
    return buf


def load_dataset(path):
    """Read a dataset written by :func:`save_dataset`."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = _read_exact(fh, 4, "magic")
        if magic != _MAGIC:
            raise FormatError(f"bad magic {magic!r}, expected {_MAGIC!r}", offset=0)
        header = _read_exact(fh, 24, "header")
        version, n_subjects, fs, n_channels, n_samples, n_classes = struct.unpack(
            "<IIfIII", header
        )
        if version != _VERSION:
            raise FormatError(f"unsupported version {version}", offset=4)
        if n_channels < 1 or n_samples < 1 or n_classes < 1:
            raise FormatError("header declares empty dimensions", offset=4)
        trials = []
        for _ in range(n_subjects):
            subject, n_trials = struct.unpack(
                "<II", _read_exact(fh, 8, "subject header")
            )
            labels = np.frombuffer(
                _read_exact(fh, 4 * n_trials, "labels"), dtype="<u4"
            )
            if np.any(labels >= n_classes):
                raise FormatError(
                    f"label out of range for {n_classes} classes",
                    offset=fh.tell() - 4 * n_trials,
                )
            n_values = n_trials * n_channels * n_samples
            data = np.frombuffer(
                _read_exact(fh, 4 * n_values, "trial data"), dtype="<f4"
            ).reshape(n_trials, n_channels, n_samples)
            for i in range(n_trials):
                trials.append(
                    Trial(data=data[i], fs=float(fs), label=int(labels[i]),
                          subject=int(subject))
                )
        trailing = fh.read(1)
        if trailing:
            raise FormatError(
                "file longer than header-declared contents", offset=fh.tell() - 1
            )
    meta_path = path.with_name(path.name + ".json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
        name = meta.get("name", path.stem)
        channel_names = tuple(meta.get("channel_names", ()))
        class_names = tuple(meta.get("class_names", ()))
    else:
        name, channel_names, class_names = path.stem, (), ()
    if len(channel_names) != n_channels:
        channel_names = tuple(f"ch{i:02d}" for i in range(n_channels))
    if len(class_names) != n_classes:
        class_names = tuple(f"class{i}" for i in range(n_classes))
    return Dataset(
        trials=tuple(trials),
        channel_names=channel_names,
        class_names=class_names,
        name=name,
    )


def _row_dict(row):
    return {
        "repeat": row.repeat,
        "poison_subject": row.poison_subject,
        "test_subject": row.test_subject,
        "acc": row.acc,
        "asr": row.asr,
        "config_fingerprint": row.fingerprint,
    }


def write_report(rows, path, format="csv"):
    """Write result rows as CSV or a single JSON array, full precision."""
    rows = list(rows)
    if not rows:
        raise ConfigError("refusing to write an empty report")
    if format == "csv":
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            for row in rows:
                d = _row_dict(row)
                writer.writerow(
                    [d["repeat"], d["poison_subject"], d["test_subject"],
                     repr(d["acc"]), repr(d["asr"]), d["config_fingerprint"]]
                )
    elif format == "json":
        with open(path, "w") as fh:
            json.dump([_row_dict(r) for r in rows], fh, indent=2)
            fh.write("\n")
    else:
        raise ConfigError(f"unknown report format {format!r}")
