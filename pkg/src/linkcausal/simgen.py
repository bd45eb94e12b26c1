"""Synthetic two-file populations with perturbed identifiers.

Each synthetic individual gets four linking fields (first name, last name,
birth date MMDD, birth year), two standard-normal covariates, a treatment
drawn from a logistic propensity, and an outcome from one of two schemes:

  L (linear):     y = 1 + 2 e(x) + 4 w + eps
  N (nonlinear):  y = 5 - 1.5 e(x) + exp(-0.8 + 2.6 e(x)) w + eps

Overlapping individuals appear in both files; their File B copies carry
independently perturbed identifiers (single-character typos on names,
adjacent-digit swaps on the date fields).  Non-overlap File A records keep
only the outcome, non-overlap File B records keep only covariates and
treatment, mirroring how such files arise in practice.
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass, field, replace

import numpy as np

from .records import CovariateRecord, LinkFieldSpec, OutcomeRecord

__all__ = [
    "SimConfig",
    "TruthBundle",
    "sim_schema",
    "true_propensity",
    "scheme_means",
    "generate_population",
    "perturb_identifiers",
    "inject_missing_outcomes",
]

_LETTERS = "abcdefghijklmnopqrstuvwxyz"
_DAYS_IN_MONTH = [31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31]


@dataclass(frozen=True)
class SimConfig:
    """Knobs for one synthetic population."""

    n_a: int = 1000
    n_b: int = 1000
    overlap: float | int = 0.9  # fraction of min(n_a, n_b) if float, count if int
    scheme: str = "L"
    alpha: tuple[float, ...] = (1.0, 1.5, -1.0)
    noise_sd: float = 1.0
    missing_frac: float = 0.0
    typo_prob: float = 0.22
    digit_swap_prob: float = 0.18
    name_zipf: float = 1.2  # skew of name-pool frequencies; real ones are skewed
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in ("L", "N"):
            raise ValueError("scheme must be L or N")
        if not (0.0 <= self.missing_frac < 1.0):
            raise ValueError("missing_frac must be in [0, 1)")
        for name in ("typo_prob", "digit_swap_prob"):
            if not (0.0 <= getattr(self, name) <= 1.0):
                raise ValueError(f"{name} must be in [0, 1]")
        if self.n_overlap > min(self.n_a, self.n_b):
            raise ValueError("overlap cannot exceed min(n_a, n_b)")

    @property
    def n_overlap(self) -> int:
        if isinstance(self.overlap, int):
            return self.overlap
        return int(round(self.overlap * min(self.n_a, self.n_b)))


@dataclass
class TruthBundle:
    """Generated files plus the ground-truth link structure."""

    file_a: list
    file_b: list
    true_links: dict[int, int]  # File B row j -> File A row i
    atel0: float | None = None
    config: SimConfig | None = field(default=None, repr=False)


def sim_schema() -> tuple[LinkFieldSpec, ...]:
    """Linking-field schema of the generated files."""
    return (
        LinkFieldSpec("first_name", "string", 0.95),
        LinkFieldSpec("last_name", "string", 0.95),
        LinkFieldSpec("birth_date", "nominal"),
        LinkFieldSpec("birth_year", "nominal"),
    )


def _load_pool(name: str) -> list[str]:
    text = importlib.resources.files("linkcausal.data").joinpath(name).read_text()
    return [line for line in text.splitlines() if line]


def _zipf_weights(n: int, exponent: float) -> np.ndarray:
    w = 1.0 / np.arange(2, n + 2, dtype=np.float64) ** exponent
    return w / w.sum()


def true_propensity(x: np.ndarray, alpha) -> np.ndarray:
    """Treatment probability exp(a0 + a'x) / (1 + exp(a0 + a'x))."""
    alpha = np.asarray(alpha, dtype=np.float64)
    lin = alpha[0] + np.atleast_2d(x) @ alpha[1:]
    return 1.0 / (1.0 + np.exp(-lin))


def scheme_means(scheme: str, e: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """True (m1, m2) evaluated at propensity values e."""
    e = np.asarray(e, dtype=np.float64)
    if scheme == "L":
        return 1.0 + 2.0 * e, np.full_like(e, 4.0)
    if scheme == "N":
        return 5.0 - 1.5 * e, np.exp(-0.8 + 2.6 * e)
    raise ValueError("scheme must be L or N")


def perturb_identifiers(fields, kinds, typo_prob, digit_swap_prob,
                        rng: np.random.Generator):
    """Independently perturb one record's linking fields.

    String fields receive a single substitution/insertion/deletion with
    probability typo_prob; digit fields receive one adjacent-digit swap with
    probability digit_swap_prob.  All probabilities 0 is the identity.
    """
    out = []
    for value, kind in zip(fields, kinds):
        if kind == "string":
            if rng.random() < typo_prob and value:
                value = _apply_typo(value, rng)
        elif kind == "digits":
            if rng.random() < digit_swap_prob and len(value) >= 2:
                p = int(rng.integers(len(value) - 1))
                value = value[:p] + value[p + 1] + value[p] + value[p + 2:]
        else:
            raise ValueError(f"unknown field kind {kind!r}")
        out.append(value)
    return tuple(out)


def _apply_typo(value: str, rng: np.random.Generator) -> str:
    op = int(rng.integers(3))
    if op == 0:  # substitution with a guaranteed different character
        p = int(rng.integers(len(value)))
        old = value[p]
        ch = old
        while ch == old:
            ch = _LETTERS[int(rng.integers(26))]
        return value[:p] + ch + value[p + 1:]
    if op == 1:  # insertion
        p = int(rng.integers(len(value) + 1))
        return value[:p] + _LETTERS[int(rng.integers(26))] + value[p:]
    p = int(rng.integers(len(value)))  # deletion
    return value[:p] + value[p + 1:]


def _draw_identifiers(n: int, rng: np.random.Generator, name_zipf: float):
    """Unique (first, last, birth_date, birth_year) quadruples."""
    firsts = _load_pool("first_names.txt")
    lasts = _load_pool("last_names.txt")
    if n > len(firsts) * len(lasts):
        raise ValueError(f"name pools cannot supply {n} unique individuals")
    wf = _zipf_weights(len(firsts), name_zipf)
    wl = _zipf_weights(len(lasts), name_zipf)
    seen = set()
    quads = []
    attempts = 0
    while len(quads) < n:
        attempts += 1
        if attempts > 200:
            raise ValueError("name pools exhausted while drawing unique identifiers")
        need = n - len(quads)
        fi = rng.choice(len(firsts), size=need, p=wf)
        li = rng.choice(len(lasts), size=need, p=wl)
        months = rng.integers(1, 13, size=need)
        days = np.array([int(rng.integers(1, _DAYS_IN_MONTH[m - 1] + 1)) for m in months])
        years = rng.integers(1940, 2001, size=need)
        for k in range(need):
            quad = (
                firsts[fi[k]],
                lasts[li[k]],
                f"{months[k]:02d}{days[k]:02d}",
                str(years[k]),
            )
            if quad not in seen:
                seen.add(quad)
                quads.append(quad)
    return quads


def generate_population(config: SimConfig,
                        rng: np.random.Generator | None = None) -> TruthBundle:
    """Build File A / File B record lists plus the true link map."""
    rng = np.random.default_rng(config.seed) if rng is None else rng
    n_a, n_b, n_over = config.n_a, config.n_b, config.n_overlap
    n_total = n_a + n_b - n_over
    p = len(config.alpha) - 1

    quads = _draw_identifiers(n_total, rng, config.name_zipf)
    x = rng.standard_normal((n_total, p))
    e = true_propensity(x, config.alpha)
    w = (rng.random(n_total) < e).astype(np.int64)
    m1, m2 = scheme_means(config.scheme, e)
    y = m1 + m2 * w + rng.normal(0.0, config.noise_sd, size=n_total)

    # individuals [0, n_over) live in both files; then A-only; then B-only
    a_individuals = list(range(n_over)) + list(range(n_over, n_a))
    b_individuals = list(range(n_over)) + list(range(n_a, n_total))
    perm_a = rng.permutation(n_a)
    perm_b = rng.permutation(n_b)

    kinds = ("string", "string", "digits", "digits")
    file_a = [None] * n_a
    pos_a = {}
    for slot, ind in enumerate(a_individuals):
        row = int(perm_a[slot])
        pos_a[ind] = row
        file_a[row] = OutcomeRecord(row_id=row, link_fields=quads[ind], y=float(y[ind]))

    file_b = [None] * n_b
    true_links = {}
    for slot, ind in enumerate(b_individuals):
        row = int(perm_b[slot])
        fields = quads[ind]
        if ind < n_over:  # the duplicated copy gets the identifier errors
            fields = perturb_identifiers(fields, kinds, config.typo_prob,
                                         config.digit_swap_prob, rng)
            true_links[row] = pos_a[ind]
        file_b[row] = CovariateRecord(row_id=row, link_fields=fields,
                                      x=tuple(float(v) for v in x[ind]),
                                      w=int(w[ind]))

    bundle = TruthBundle(file_a=file_a, file_b=file_b, true_links=true_links,
                         config=config)
    if config.missing_frac > 0:
        bundle.file_a = inject_missing_outcomes(bundle.file_a,
                                                config.missing_frac, rng)
    return bundle


def inject_missing_outcomes(file_a, missing_frac: float,
                            rng: np.random.Generator) -> list:
    """Blank exactly round(missing_frac * n_A) outcomes, MCAR."""
    if not (0.0 <= missing_frac < 1.0):
        raise ValueError("missing_frac must be in [0, 1)")
    n_blank = int(round(missing_frac * len(file_a)))
    chosen = set(rng.choice(len(file_a), size=n_blank, replace=False).tolist())
    return [
        replace(rec, y=None) if rec.row_id in chosen else rec
        for rec in file_a
    ]
