"""Binary field-agreement vectors for all File A x File B record pairs.

Nominal fields agree on exact equality; string fields agree when the
normalized Levenshtein similarity reaches the field's threshold (inclusive,
so a threshold of 1.0 still accepts exact matches).
"""

from __future__ import annotations

import csv

import numpy as np

from ._kernels import lev_threshold_matrix

__all__ = ["levenshtein_similarity", "ComparisonStore", "build_comparisons"]


def levenshtein_similarity(a: str, b: str) -> float:
    """Normalized Levenshtein similarity: 1 - editdistance / max length.

    Operates on Unicode scalar values.  Returns 1.0 when both strings are
    empty and 0.0 when exactly one is.
    """
    la, lb = len(a), len(b)
    if la == 0 and lb == 0:
        return 1.0
    if la == 0 or lb == 0:
        return 0.0
    prev = list(range(lb + 1))
    for p in range(1, la + 1):
        curr = [p] + [0] * lb
        ca = a[p - 1]
        for q in range(1, lb + 1):
            cost = 0 if ca == b[q - 1] else 1
            curr[q] = min(prev[q - 1] + cost, prev[q] + 1, curr[q - 1] + 1)
        prev = curr
    return 1.0 - prev[lb] / max(la, lb)


class ComparisonStore:
    """Dense n_A x n_B x F binary agreement tensor."""

    def __init__(self, bits: np.ndarray):
        if bits.ndim != 3:
            raise ValueError("bits must have shape (n_a, n_b, f_count)")
        if not np.isin(bits, (0, 1)).all():
            raise ValueError("agreement entries must be 0 or 1")
        self.bits = np.ascontiguousarray(bits, dtype=np.uint8)
        self.n_a, self.n_b, self.f_count = bits.shape
        self._patterns_t = None
        self._totals = None

    def patterns_t(self) -> np.ndarray:
        """(n_b, n_a) matrix of field-agreement bit patterns (bit f = field f).

        Patterns index the 2**F lookup table used to rebuild the pairwise
        log likelihood ratio whenever the mixture parameters change.
        """
        if self._patterns_t is None:
            if self.f_count > 16:
                raise ValueError("pattern packing supports at most 16 fields")
            weights = (1 << np.arange(self.f_count)).astype(np.uint16)
            packed = np.tensordot(self.bits, weights, axes=([2], [0]))
            self._patterns_t = np.ascontiguousarray(packed.T.astype(np.uint16))
        return self._patterns_t

    def field_totals(self) -> np.ndarray:
        """Per-field agreement counts over all n_A * n_B pairs."""
        if self._totals is None:
            self._totals = self.bits.sum(axis=(0, 1), dtype=np.int64)
        return self._totals

    def dump_csv(self, path):
        """Audit dump: one row (i, j, gamma_1..gamma_F) per pair."""
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["i", "j"] + [f"gamma_{f + 1}" for f in range(self.f_count)])
            for i in range(self.n_a):
                for j in range(self.n_b):
                    writer.writerow([i, j] + list(self.bits[i, j]))


def _encode_strings(values):
    """Pad Unicode code points into a (n, maxlen) int32 matrix plus lengths."""
    lens = np.array([len(v) for v in values], dtype=np.int64)
    width = max(1, int(lens.max()) if len(lens) else 1)
    codes = np.zeros((len(values), width), dtype=np.int32)
    for r, v in enumerate(values):
        for c, ch in enumerate(v):
            codes[r, c] = ord(ch)
    return codes, lens


def _string_agreement(values_a, values_b, threshold) -> np.ndarray:
    """Thresholded similarity over unique value pairs, broadcast back to rows."""
    uniq_a, inv_a = np.unique(np.asarray(values_a, dtype=object), return_inverse=True)
    uniq_b, inv_b = np.unique(np.asarray(values_b, dtype=object), return_inverse=True)
    codes_a, lens_a = _encode_strings(list(uniq_a))
    codes_b, lens_b = _encode_strings(list(uniq_b))
    match = np.zeros((len(uniq_a), len(uniq_b)), dtype=np.uint8)
    lev_threshold_matrix(codes_a, lens_a, codes_b, lens_b, float(threshold), match)
    return match[np.ix_(inv_a, inv_b)]


def _nominal_agreement(values_a, values_b) -> np.ndarray:
    pool = np.unique(np.asarray(list(values_a) + list(values_b), dtype=object))
    codes = {v: c for c, v in enumerate(pool)}
    ca = np.array([codes[v] for v in values_a], dtype=np.int64)
    cb = np.array([codes[v] for v in values_b], dtype=np.int64)
    return (ca[:, None] == cb[None, :]).astype(np.uint8)


def build_comparisons(file_a, file_b, schema) -> ComparisonStore:
    """Populate the full agreement tensor for every (i, j) pair.

    Deterministic and order-independent per pair; the batch string path is
    checked against levenshtein_similarity in the test suite.
    """
    f_count = len(schema)
    for rec in file_a:
        if len(rec.link_fields) != f_count:
            raise ValueError(f"File A row {rec.row_id}: expected {f_count} link fields")
    for rec in file_b:
        if len(rec.link_fields) != f_count:
            raise ValueError(f"File B row {rec.row_id}: expected {f_count} link fields")
    n_a, n_b = len(file_a), len(file_b)
    bits = np.empty((n_a, n_b, f_count), dtype=np.uint8)
    for f, spec in enumerate(schema):
        values_a = [rec.link_fields[f] for rec in file_a]
        values_b = [rec.link_fields[f] for rec in file_b]
        if spec.kind == "string":
            bits[:, :, f] = _string_agreement(values_a, values_b, spec.string_threshold)
        else:
            bits[:, :, f] = _nominal_agreement(values_a, values_b)
    return ComparisonStore(bits)
