"""Eigenvalue spectra with a dominant/bulk split, and per-direction noise profiles.

Everything downstream works in the eigenbasis, so a problem instance is fully
described by the eigenvalues, the split index k, and the per-direction noise
variances kappa_i^2. No dense matrix is ever materialized.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

__all__ = [
    "Spectrum",
    "NoiseProfile",
    "AssumptionCheck",
    "AssumptionReport",
    "build_spectrum",
    "isotropic_noise",
    "check_asymptotic_assumptions",
    "problem_to_json",
    "problem_from_json",
    "write_problem_json",
    "read_spectrum_json",
    "read_noise_json",
    "write_eigenvalues_csv",
]

BLOCK_MOMENT_POWERS = (2, 3, 4, 6, 8)


@dataclass(frozen=True, eq=False)
class Spectrum:
    """Ordered positive eigenvalues with a split index k (1-based count of dominant modes).

    Invariants checked at construction: lambda_1 >= ... >= lambda_d > 0 with a
    strict gap lambda_k > lambda_{k+1}.
    """

    lambdas: np.ndarray
    k: int

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        if lam.ndim != 1 or lam.size < 2:
            raise ParameterError("need at least two eigenvalues in a 1-d array")
        if not (1 <= self.k <= lam.size - 1):
            raise ParameterError(f"split index k={self.k} outside [1, {lam.size - 1}]")
        if not np.all(np.isfinite(lam)):
            raise ParameterError("eigenvalues must be finite")
        if lam[-1] <= 0:
            raise ParameterError("eigenvalues must be strictly positive")
        if np.any(np.diff(lam) > 0):
            raise ParameterError("eigenvalues must be non-increasing")
        if not lam[self.k - 1] > lam[self.k]:
            raise ParameterError("need a strict gap at the split: lambda_k > lambda_{k+1}")
        lam = lam.copy()
        lam.flags.writeable = False
        object.__setattr__(self, "lambdas", lam)

    @property
    def d(self) -> int:
        return self.lambdas.size

    @property
    def dominant(self) -> np.ndarray:
        return self.lambdas[: self.k]

    @property
    def bulk(self) -> np.ndarray:
        return self.lambdas[self.k :]

    @property
    def gap1(self) -> float:
        return float(self.lambdas[self.k - 1] - self.lambdas[self.k])

    @property
    def gap2(self) -> float:
        return float(self.lambdas[self.k - 1] ** 2 - self.lambdas[self.k] ** 2)

    @property
    def gap_ratio(self) -> float:
        """m = lambda_k / lambda_{k+1} > 1."""
        return float(self.lambdas[self.k - 1] / self.lambdas[self.k])

    @property
    def rho(self) -> float:
        """Block proportion k / (d - k)."""
        return self.k / (self.d - self.k)

    @property
    def psi_dominant(self) -> float:
        return float(np.sum(self.dominant**2))

    @property
    def psi_bulk(self) -> float:
        return float(np.sum(self.bulk**2))

    @property
    def lambda_max(self) -> float:
        return float(self.lambdas[0])

    @property
    def lambda_min(self) -> float:
        return float(self.lambdas[-1])


@dataclass(frozen=True, eq=False)
class NoiseProfile:
    """Per-eigendirection noise variances kappa_i^2 with covariance spectral bounds.

    s_min/s_max default to min/max of kappa2, which is exact for a covariance
    that is diagonal in the eigenbasis. An all-zero profile is allowed (it
    models noiseless runs); operations that require positive noise raise.
    """

    kappa2: np.ndarray
    s_min: float = None  # type: ignore[assignment]
    s_max: float = None  # type: ignore[assignment]

    def __post_init__(self):
        k2 = np.asarray(self.kappa2, dtype=float)
        if k2.ndim != 1 or k2.size == 0:
            raise ParameterError("kappa2 must be a non-empty 1-d array")
        if not np.all(np.isfinite(k2)) or np.any(k2 < 0):
            raise ParameterError("kappa2 entries must be finite and >= 0")
        s_min = float(np.min(k2)) if self.s_min is None else float(self.s_min)
        s_max = float(np.max(k2)) if self.s_max is None else float(self.s_max)
        if s_min > np.min(k2) or s_max < np.max(k2) or s_min > s_max:
            raise ParameterError("need s_min <= min kappa2 <= max kappa2 <= s_max")
        k2 = k2.copy()
        k2.flags.writeable = False
        object.__setattr__(self, "kappa2", k2)
        object.__setattr__(self, "s_min", s_min)
        object.__setattr__(self, "s_max", s_max)

    @property
    def d(self) -> int:
        return self.kappa2.size

    @property
    def trace(self) -> float:
        return float(np.sum(self.kappa2))

    def block_energies(self, spec: Spectrum) -> tuple[float, float]:
        """(e_D, e_B): lambda^2-weighted noise energy per block."""
        if spec.d != self.d:
            raise ParameterError("spectrum and noise dimensions differ")
        w = spec.lambdas**2 * self.kappa2
        return float(np.sum(w[: spec.k])), float(np.sum(w[spec.k :]))


def build_spectrum(
    d: int,
    k: int,
    m: float,
    bulk_range: tuple[float, float],
    top_spread: float = 0.0,
    seed: int = 0,
) -> Spectrum:
    """Draw a spectrum with an exact gap ratio lambda_k / lambda_{k+1} = m.

    Bulk eigenvalues are uniform on `bulk_range`; lambda_k is pinned to
    m * max(bulk); the remaining k-1 dominant eigenvalues are uniform on
    [lambda_k, lambda_k * (1 + top_spread)]. Deterministic given `seed`.
    """
    lo, hi = bulk_range
    if d < 2 or not (1 <= k <= d - 1):
        raise ParameterError(f"invalid dimensions d={d}, k={k}")
    if not m > 1:
        raise ParameterError("gap ratio m must exceed 1")
    if not (0 < lo <= hi):
        raise ParameterError("bulk_range must satisfy 0 < lo <= hi")
    if top_spread < 0:
        raise ParameterError("top_spread must be >= 0")
    rng = np.random.default_rng(seed)
    bulk = np.sort(rng.uniform(lo, hi, size=d - k))[::-1]
    lam_split = m * bulk[0]
    top = np.sort(rng.uniform(lam_split, lam_split * (1 + top_spread), size=k - 1))[::-1]
    lambdas = np.concatenate([top, [lam_split], bulk])
    return Spectrum(lambdas=lambdas, k=k)


def isotropic_noise(d: int, sigma2: float) -> NoiseProfile:
    """Noise with kappa_i^2 = sigma2 in every direction."""
    if not sigma2 > 0:
        raise ParameterError("sigma2 must be > 0")
    return NoiseProfile(kappa2=np.full(d, float(sigma2)))


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    ok: bool
    value: float


@dataclass(frozen=True)
class AssumptionReport:
    """Report-only diagnostics for the asymptotic regime conditions."""

    rho: float
    dominant_moments: dict
    bulk_moments: dict
    mean_square_coords: list
    noise_trace: float
    checks: list = field(default_factory=list)

    @property
    def all_ok(self) -> bool:
        return all(c.ok for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "rho": self.rho,
            "dominant_moments": {str(p): v for p, v in self.dominant_moments.items()},
            "bulk_moments": {str(p): v for p, v in self.bulk_moments.items()},
            "mean_square_coords": list(self.mean_square_coords),
            "noise_trace": self.noise_trace,
            "checks": [{"name": c.name, "ok": c.ok, "value": c.value} for c in self.checks],
        }


def check_asymptotic_assumptions(spec: Spectrum, noise: NoiseProfile, states) -> AssumptionReport:
    """Evaluate block proportion, block spectral moments, state boundedness and
    noise trace, flagging each with pass/warn. Never raises on a violation."""
    states = list(states)
    if not states:
        raise ParameterError("need at least one state")
    if noise.d != spec.d:
        raise ParameterError("spectrum and noise dimensions differ")
    checks = []

    def note(name, value, ok):
        checks.append(AssumptionCheck(name=name, ok=bool(ok), value=float(value)))

    rho = spec.rho
    note("rho = k/(d-k) in (0, inf)", rho, 0 < rho < math.inf)

    dom, blk = {}, {}
    for p in BLOCK_MOMENT_POWERS:
        dv = float(np.mean(spec.dominant**p))
        bv = float(np.mean(spec.bulk**p))
        dom[p] = dv
        blk[p] = bv
        note(f"dominant moment p={p} in (0, inf)", dv, 0 < dv < math.inf)
        note(f"bulk moment p={p} in [0, inf)", bv, 0 <= bv < math.inf)

    msq = []
    for st in states:
        c = np.asarray(st.c, dtype=float)
        if c.size != spec.d:
            raise ParameterError("state dimension differs from spectrum")
        v = float(np.mean(c**2))
        msq.append(v)
        note(f"state t={st.t}: (1/d) sum c_i^2 finite", v, math.isfinite(v))

    note("Tr(Sigma) in (0, +inf)", noise.trace, 0 < noise.trace < math.inf)
    return AssumptionReport(
        rho=rho,
        dominant_moments=dom,
        bulk_moments=blk,
        mean_square_coords=msq,
        noise_trace=noise.trace,
        checks=checks,
    )


def problem_to_json(spec: Spectrum, noise: NoiseProfile) -> dict:
    """Document with keys lambdas, k, kappa2 (plus s_min/s_max when not the defaults)."""
    if noise.d != spec.d:
        raise ParameterError("spectrum and noise dimensions differ")
    doc = {"lambdas": spec.lambdas.tolist(), "k": spec.k, "kappa2": noise.kappa2.tolist()}
    if noise.s_min != float(np.min(noise.kappa2)):
        doc["s_min"] = noise.s_min
    if noise.s_max != float(np.max(noise.kappa2)):
        doc["s_max"] = noise.s_max
    return doc


def problem_from_json(doc: dict) -> tuple[Spectrum, NoiseProfile]:
    return read_spectrum_json(doc), read_noise_json(doc)


def read_spectrum_json(doc: dict) -> Spectrum:
    try:
        return Spectrum(lambdas=np.asarray(doc["lambdas"], dtype=float), k=int(doc["k"]))
    except KeyError as exc:
        raise ParameterError(f"spectrum document missing key {exc}") from exc


def read_noise_json(doc: dict) -> NoiseProfile:
    try:
        kappa2 = np.asarray(doc["kappa2"], dtype=float)
    except KeyError as exc:
        raise ParameterError(f"noise document missing key {exc}") from exc
    return NoiseProfile(kappa2=kappa2, s_min=doc.get("s_min"), s_max=doc.get("s_max"))


def write_problem_json(path, spec: Spectrum, noise: NoiseProfile) -> None:
    with open(path, "w") as fh:
        json.dump(problem_to_json(spec, noise), fh)
        fh.write("\n")


def write_eigenvalues_csv(path, spec: Spectrum) -> None:
    """Columns index,lambda,block with block in {D, B}."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "lambda", "block"])
        for i, lam in enumerate(spec.lambdas, start=1):
            writer.writerow([i, repr(float(lam)), "D" if i <= spec.k else "B"])
