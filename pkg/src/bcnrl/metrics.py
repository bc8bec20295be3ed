"""Tiny fixed-column metrics table with byte-stable CSV output."""

from __future__ import annotations

import csv
import math

from .errors import ConfigError


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (bool,)):
        return str(value)
    f = float(value)
    if math.isfinite(f) and f == int(f) and abs(f) < 1e15 \
            and not isinstance(value, float):
        return str(int(f))
    return repr(f)  # shortest round-trip repr keeps reruns byte-identical


class MetricsLog:
    def __init__(self, columns):
        self.columns = tuple(columns)
        self.rows = []

    def append(self, **kw):
        if set(kw) != set(self.columns):
            raise ConfigError(
                f"metrics row keys {sorted(kw)} != columns {sorted(self.columns)}")
        self.rows.append({c: kw[c] for c in self.columns})

    def __len__(self):
        return len(self.rows)

    def column(self, name):
        return [row[name] for row in self.rows]

    def last(self, name):
        return self.rows[-1][name] if self.rows else math.nan

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(self.columns)
            for row in self.rows:
                writer.writerow([_fmt(row[c]) for c in self.columns])

    @classmethod
    def read_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            log = cls(header)
            for raw in reader:
                row = {}
                for c, cell in zip(header, raw):
                    try:
                        row[c] = float(cell)
                    except ValueError:
                        row[c] = cell
                log.rows.append(row)
        return log
