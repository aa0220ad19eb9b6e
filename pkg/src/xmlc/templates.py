"""Configuration-name parsing.

Runs are named by underscore-joined tokens, e.g.
``mafs2_s8_lp_u_jm2_bm18ti_pct0_ps5_thr16``: an optimization measure,
a fold, model flags, and numeric modifiers whose suffixes index into
the level tables below.  Unrecognized tokens are kept verbatim so a
name never silently loses information; a few historical tokens (fb, je
and friends) parse but activate nothing here.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .inference import InstantiateConfig
from .sgm import BackgroundKind, ModelFlags, PruningConfig, SmoothingConfig
from .weighting import WeightingConfig, WeightingScheme

MEASURES = ("mafs", "mafs2", "mafs3", "mifs", "mjac", "ndcg5")

# Level tables for numeric token suffixes.  The historical generator
# scripts tuned these ranges by hand; the values here are the shipped
# defaults and any searchable parameter can override them.
JM_LEVELS = (0.5, 0.9, 0.98, 0.99, 0.995, 0.998, 0.999)
KDP_LEVELS = (1.0, 10.0, 50.0, 100.0, 250.0, 500.0, 1000.0, 2500.0)
IW_LEVELS = (1.0, 2.0, 4.0)
MC_LEVELS = (0.0, 2.0, 3.0, 5.0, 10.0)
MLC_LEVELS = (0, 2, 3, 5, 10)
PCT_LEVELS = (0.0, 0.25, 0.5, 1.0, 2.0)
PCI_LEVELS = (0.0, 0.25, 0.5, 0.75, 1.0, 1.5, 2.0, 2.5)
CS_LEVELS = (0.25, 0.5, 0.75)
PS_DENOMINATOR = 8
TF_LEVELS = (0.5, 0.75, 1.0, 1.25, 1.5, 2.0)

# BM-style schemes: the number picks the length-normalization slope,
# the trailing letter a (length_exponent, idf_exponent) pair.
BM_TI_B = {15: 0.0, 16: 0.3, 18: 0.75, 20: 1.0}
BM_TI_LETTER = {"": (1.0, 1.0), "b": (1.0, 0.75), "c": (1.0, 0.5), "d": (1.5, 1.0)}
BM25C_VARIANTS = {1: (1.2, 0.75), 2: (2.0, 0.9)}

_BM_TI = re.compile(r"^bm(\d+)ti([a-z]?)$")
_BM25C = re.compile(r"^bm25c(\d+)$")
_TIX = re.compile(r"^(tiX|tXiX)(\d+)$")
_LEVELED = re.compile(r"^(jm|kdp|iw|mc|mlc|pct|pci|ps|s|thr|fb|cs)(\d+|X)$")


@dataclass(frozen=True)
class TemplateConfig:
    """Parsed run configuration.  ``tokens`` holds the canonical token
    sequence (engine marker and file suffix stripped); unrecognized
    tokens are preserved in ``unknown`` in input order."""

    name: str
    tokens: tuple[str, ...]
    measure: str
    measure_variant: str = ""
    fold: int | None = None
    lp: bool = False
    kd: bool = False
    nobo: bool = False
    background: BackgroundKind | None = None
    jm_level: int | None = None
    kdp_level: int | None = None
    scheme_kind: str | None = None
    scheme_number: int | None = None
    scheme_variant: str = ""
    mc_level: int | None = None
    mlc_level: int | None = None
    pct_level: int | None = None
    pci_level: int | None = None
    ps_level: int | None = None
    ps_search: bool = False
    iw_level: int | None = None
    cs: bool = False
    cs_level: int | None = None
    fb: bool = False
    fb_level: int | None = None
    je: bool = False
    thr: int | None = None
    unknown: tuple[str, ...] = ()

    def canonical_name(self) -> str:
        return "_".join(self.tokens)

    @property
    def workers(self) -> int:
        return self.thr if self.thr is not None else 1

    @property
    def jm_lambda(self) -> float:
        if self.jm_level is None:
            return SmoothingConfig().jm_lambda
        return JM_LEVELS[self.jm_level]

    @property
    def dirichlet_mu(self) -> float:
        if self.kdp_level is None:
            return SmoothingConfig().dirichlet_mu
        return KDP_LEVELS[self.kdp_level]

    @property
    def prior_scale(self) -> float:
        if self.ps_search or self.ps_level is None:
            return 1.0
        return self.ps_level / PS_DENOMINATOR

    def model_flags(self) -> ModelFlags:
        bm25_kernel = self.kd and self.nobo and self.scheme_kind == "bm25c"
        return ModelFlags(kd=self.kd, nobo=self.nobo, bm25_kernel=bm25_kernel, lp=self.lp)

    def smoothing_config(self) -> SmoothingConfig:
        gamma = 0.0
        if self.cs and self.cs_level is not None:
            gamma = CS_LEVELS[self.cs_level]
        return SmoothingConfig(
            jm_lambda=self.jm_lambda,
            dirichlet_mu=self.dirichlet_mu,
            background_kind=self.background or BackgroundKind.UNIFORM,
            hierarchy_mix=gamma,
        )

    def pruning_config(self) -> PruningConfig:
        return PruningConfig(
            min_count=MC_LEVELS[self.mc_level] if self.mc_level is not None else 0.0,
            min_label_count=MLC_LEVELS[self.mlc_level] if self.mlc_level is not None else 0,
            precomputed_prune=PCT_LEVELS[self.pct_level] if self.pct_level is not None else 0.0,
            online_prune=PCI_LEVELS[self.pci_level] if self.pci_level is not None else 0.0,
        )

    def weighting_config(self) -> WeightingConfig:
        if self.scheme_kind == "bm_ti":
            e, a = BM_TI_LETTER[self.scheme_variant]
            return WeightingConfig(
                scheme=WeightingScheme.BM18TI,
                k1=1.2,
                b=BM_TI_B[self.scheme_number],
                length_exponent=e,
                idf_exponent=a,
            )
        if self.scheme_kind == "bm25c":
            k1, b = BM25C_VARIANTS[self.scheme_number]
            return WeightingConfig(scheme=WeightingScheme.BM25C, k1=k1, b=b)
        if self.scheme_kind in ("tiX", "tXiX"):
            return WeightingConfig(
                scheme=WeightingScheme.TIX,
                tf_exponent=TF_LEVELS[self.scheme_number],
                idf_exponent=1.0,
            )
        # No scheme token: raw counts.
        return WeightingConfig(scheme=WeightingScheme.TIX)

    def instantiate_config(self) -> InstantiateConfig:
        weight = IW_LEVELS[self.iw_level] if self.iw_level is not None else 1.0
        return InstantiateConfig(instantiate_weight=weight)

    def search_parameters(self) -> tuple[str, ...]:
        """Names freed for random search by X-suffixed tokens."""
        names = []
        if self.ps_search:
            names.append("prior_scale")
        if self.scheme_kind == "tXiX":
            names.extend(["tf_exponent", "idf_exponent"])
        return tuple(names)


def _match_measure(token: str) -> tuple[str, str] | None:
    """(measure, variant letter) for a leading measure token."""
    for m in sorted(MEASURES, key=len, reverse=True):
        if token == m:
            return m, ""
        if token.startswith(m) and len(token) == len(m) + 1 and token[-1].isalpha():
            return m, token[-1]
    return None


def _level(token: str, value: str, table_len: int) -> int:
    idx = int(value)
    if idx >= table_len:
        raise ValueError(f"token {token!r}: level {idx} out of range")
    return idx


class _Builder:
    def __init__(self):
        self.fields: dict = {}
        self.unknown: list[str] = []

    def set(self, key: str, value, token: str):
        if key in self.fields:
            raise ValueError(f"conflicting token {token!r}: {key} already set")
        self.fields[key] = value


_FLAG_KEYS = {"lp": "lp", "kd": "kd", "nobo": "nobo", "je": "je", "fb": "fb", "cs": "cs"}
_LEVEL_TABLES = {
    "jm": ("jm_level", len(JM_LEVELS)),
    "kdp": ("kdp_level", len(KDP_LEVELS)),
    "iw": ("iw_level", len(IW_LEVELS)),
    "mc": ("mc_level", len(MC_LEVELS)),
    "mlc": ("mlc_level", len(MLC_LEVELS)),
    "pct": ("pct_level", len(PCT_LEVELS)),
    "pci": ("pci_level", len(PCI_LEVELS)),
    "ps": ("ps_level", PS_DENOMINATOR + 1),
    "s": ("fold", 10),
    "cs": ("cs_level", len(CS_LEVELS)),
}


def _consume(b: _Builder, token: str) -> None:
    if token in _FLAG_KEYS:
        b.set(_FLAG_KEYS[token], True, token)
        return
    if token == "u":
        b.set("background", BackgroundKind.UNIFORM, token)
        return
    if token == "uc1":
        b.set("background", BackgroundKind.UNIFORM_COLLECTION, token)
        return

    mt = _BM25C.match(token)
    if mt:
        variant = int(mt.group(1))
        if variant not in BM25C_VARIANTS:
            b.unknown.append(token)
            return
        b.set("scheme_kind", "bm25c", token)
        b.fields["scheme_number"] = variant
        return
    mt = _BM_TI.match(token)
    if mt:
        number, letter = int(mt.group(1)), mt.group(2)
        if number not in BM_TI_B or letter not in BM_TI_LETTER:
            b.unknown.append(token)
            return
        b.set("scheme_kind", "bm_ti", token)
        b.fields["scheme_number"] = number
        b.fields["scheme_variant"] = letter
        return
    mt = _TIX.match(token)
    if mt:
        idx = int(mt.group(2))
        if idx >= len(TF_LEVELS):
            b.unknown.append(token)
            return
        b.set("scheme_kind", mt.group(1), token)
        b.fields["scheme_number"] = idx
        return

    mt = _LEVELED.match(token)
    if mt:
        prefix, value = mt.groups()
        if value == "X":
            if prefix != "ps":
                raise ValueError(f"token {token!r}: only ps accepts an X level")
            b.set("ps_search", True, token)
        elif prefix == "thr":
            workers = int(value)
            if workers < 1:
                raise ValueError(f"token {token!r}: thread count must be >= 1")
            b.set("thr", workers, token)
        elif prefix == "fb":
            b.fields.setdefault("fb", True)
            b.set("fb_level", int(value), token)
        else:
            key, table_len = _LEVEL_TABLES[prefix]
            if prefix == "cs":
                b.fields.setdefault("cs", True)
            b.set(key, _level(token, value, table_len), token)
        return

    b.unknown.append(token)


def parse_template_name(name: str) -> TemplateConfig:
    """Parse an underscore-joined configuration name.

    A leading engine marker ``mnb`` and a trailing ``.template`` suffix
    are accepted and dropped from the canonical form.
    """
    stripped = name.strip()
    if stripped.endswith(".template"):
        stripped = stripped[: -len(".template")]
    tokens = [t for t in stripped.split("_") if t]
    if tokens and tokens[0] == "mnb":
        tokens = tokens[1:]
    if not tokens:
        raise ValueError("empty template name")

    matched = _match_measure(tokens[0])
    if matched is None:
        raise ValueError(f"template {name!r} does not start with a measure token")
    measure, measure_variant = matched

    b = _Builder()
    for token in tokens[1:]:
        if _match_measure(token) is not None:
            raise ValueError(f"conflicting token {token!r}: measure already set")
        _consume(b, token)

    if "ps_search" in b.fields and "ps_level" in b.fields:
        raise ValueError("conflicting tokens: both psN and psX given")
    if b.fields.get("nobo") and not b.fields.get("kd"):
        raise ValueError("nobo requires kd")

    return TemplateConfig(
        name=stripped,
        tokens=tuple(tokens),
        measure=measure,
        measure_variant=measure_variant,
        unknown=tuple(b.unknown),
        **{k: v for k, v in b.fields.items() if k != "unknown"},
    )
