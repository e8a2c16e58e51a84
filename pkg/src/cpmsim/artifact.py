"""Plain-text model artifact: one file holding a pooled CPM and its
development imputation model, consumed by the ``predict`` CLI subcommand.

Floats are written with ``repr`` so a read-back reproduces the exact
values. The format is line oriented with a versioned header, two
sections, and ``key: value`` entries; vectors are space separated and
matrix rows are joined with ``;``.
"""

from __future__ import annotations

from pathlib import Path
from typing import Union

import numpy as np

from .cpm import CpmSpec, PooledCpm
from .glm import LinearFit
from .imputation import ImputationModel

__all__ = ["ARTIFACT_HEADER", "write_model_artifact", "read_model_artifact"]

ARTIFACT_HEADER = "cpmsim-model v1"


def _vector(values: np.ndarray) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(values, dtype=float))

def _matrix(values: np.ndarray) -> str:
    return " ; ".join(_vector(row) for row in np.asarray(values, dtype=float))

def _parse_vector(text: str) -> np.ndarray:
    return np.array([float(tok) for tok in text.split()])

def _parse_matrix(text: str) -> np.ndarray:
    return np.vstack([_parse_vector(row) for row in text.split(";")])


def write_model_artifact(
    path: Union[str, Path],
    cpm: PooledCpm,
    spec: CpmSpec,
    imputation: ImputationModel,
) -> None:
    """Serialize the fitted CPM and imputation model to ``path``."""
    inner = imputation.inner
    lines = [
        ARTIFACT_HEADER,
        "[cpm]",
        f"variant: {spec.variant}",
        f"m: {cpm.m}",
        f"any_nonconverged: {int(cpm.any_nonconverged)}",
        f"columns: {' '.join(cpm.roster)}",
        f"coefficients: {_vector(cpm.coefficients)}",
        f"within_variance: {_vector(cpm.within_variance)}",
        f"between_variance: {_vector(cpm.between_variance)}",
        f"total_variance: {_vector(cpm.total_variance)}",
        "[imputation]",
        f"uses_outcome: {int(imputation.uses_outcome)}",
        f"columns: {' '.join(inner.predictor_roster)}",
        f"coefficients: {_vector(inner.coefficients)}",
        f"residual_variance: {repr(float(inner.residual_variance))}",
        f"n_obs: {inner.n_obs}",
        f"gram_inverse: {_matrix(inner.gram_inverse)}",
    ]
    Path(path).write_text("\n".join(lines) + "\n")


def _split_sections(text: str) -> dict[str, dict[str, str]]:
    lines = [line.strip() for line in text.splitlines() if line.strip()]
    if not lines or lines[0] != ARTIFACT_HEADER:
        raise ValueError(
            f"not a model artifact: expected header {ARTIFACT_HEADER!r}"
        )
    sections: dict[str, dict[str, str]] = {}
    current = None
    for line in lines[1:]:
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1]
            sections[current] = {}
        else:
            if current is None:
                raise ValueError(f"entry outside any section: {line!r}")
            key, _, value = line.partition(":")
            sections[current][key.strip()] = value.strip()
    return sections


def read_model_artifact(
    path: Union[str, Path],
) -> tuple[PooledCpm, CpmSpec, ImputationModel]:
    """Load a model artifact written by :func:`write_model_artifact`."""
    sections = _split_sections(Path(path).read_text())
    try:
        cpm_sec = sections["cpm"]
        imp_sec = sections["imputation"]
        spec = CpmSpec(variant=cpm_sec["variant"])
        cpm = PooledCpm(
            coefficients=_parse_vector(cpm_sec["coefficients"]),
            within_variance=_parse_vector(cpm_sec["within_variance"]),
            between_variance=_parse_vector(cpm_sec["between_variance"]),
            total_variance=_parse_vector(cpm_sec["total_variance"]),
            m=int(cpm_sec["m"]),
            any_nonconverged=bool(int(cpm_sec["any_nonconverged"])),
            roster=tuple(cpm_sec["columns"].split()),
        )
        inner = LinearFit(
            coefficients=_parse_vector(imp_sec["coefficients"]),
            residual_variance=float(imp_sec["residual_variance"]),
            gram_inverse=_parse_matrix(imp_sec["gram_inverse"]),
            n_obs=int(imp_sec["n_obs"]),
            predictor_roster=tuple(imp_sec["columns"].split()),
        )
        imputation = ImputationModel(
            inner=inner, uses_outcome=bool(int(imp_sec["uses_outcome"]))
        )
    except KeyError as missing:
        raise ValueError(f"model artifact is missing entry {missing}") from None
    if cpm.roster != spec.columns:
        raise ValueError(
            f"artifact roster {cpm.roster} does not match variant {spec.variant!r}"
        )
    return cpm, spec, imputation
