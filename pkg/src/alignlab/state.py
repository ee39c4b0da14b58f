"""Iterates in the eigenbasis and their per-block statistics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, ParameterError
from .spectrum import NoiseProfile, Spectrum

__all__ = [
    "State",
    "BlockStats",
    "alignment",
    "block_stats",
    "loss",
    "random_init",
    "rescale_to_alignment",
    "write_state_csv",
    "state_to_json",
    "state_from_json",
]


@dataclass(frozen=True, eq=False)
class State:
    """Eigenbasis coordinates c_i of the iterate at time step t."""

    c: np.ndarray
    t: int = 0

    def __post_init__(self):
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 1 or c.size == 0:
            raise ParameterError("c must be a non-empty 1-d array")
        if not np.all(np.isfinite(c)):
            raise ParameterError("state coordinates must be finite")
        if self.t < 0:
            raise ParameterError("time index must be >= 0")
        c = c.copy()
        c.flags.writeable = False
        object.__setattr__(self, "c", c)

    @property
    def d(self) -> int:
        return self.c.size

    @property
    def norm2(self) -> float:
        """Squared Euclidean norm of the iterate."""
        return float(np.dot(self.c, self.c))


@dataclass(frozen=True)
class BlockStats:
    """All block-wise weighted energies of one state, plus the alignment.

    s_* are lambda^2-weighted, tau_* lambda^3, u_* lambda^4; e_* are the noise
    energies sum lambda^2 kappa^2 and n_loss_* are sum lambda kappa^2. theta is
    s_d / s with the zero-state convention theta = 0.
    """

    s_d: float
    s_b: float
    s: float
    tau_d: float
    tau_b: float
    u_d: float
    u_b: float
    e_d: float
    e_b: float
    n_loss_d: float
    n_loss_b: float
    theta: float

    @property
    def mu_d(self) -> float:
        """Third-over-second moment of the dominant block (a convex combination
        of its eigenvalues)."""
        return self.tau_d / self.s_d

    @property
    def mu_b(self) -> float:
        return self.tau_b / self.s_b

    def block(self, block: str) -> tuple[float, float, float, float, float]:
        """(s, tau, u, e, n_loss) for block 'D' or 'B'."""
        if block == "D":
            return (self.s_d, self.tau_d, self.u_d, self.e_d, self.n_loss_d)
        if block == "B":
            return (self.s_b, self.tau_b, self.u_b, self.e_b, self.n_loss_b)
        raise ParameterError(f"block must be 'D' or 'B', got {block!r}")


def _check_dims(state: State, spec: Spectrum, noise: NoiseProfile | None = None) -> None:
    if state.d != spec.d:
        raise ParameterError(f"state dimension {state.d} != spectrum dimension {spec.d}")
    if noise is not None and noise.d != spec.d:
        raise ParameterError(f"noise dimension {noise.d} != spectrum dimension {spec.d}")


def alignment(state: State, spec: Spectrum) -> float:
    """Fraction of the squared gradient norm carried by the dominant block."""
    _check_dims(state, spec)
    w = (spec.lambdas * state.c) ** 2
    total = float(np.sum(w))
    if total == 0.0:
        return 0.0
    return float(np.sum(w[: spec.k]) / total)


def block_stats(state: State, spec: Spectrum, noise: NoiseProfile) -> BlockStats:
    _check_dims(state, spec, noise)
    k = spec.k
    lam = spec.lambdas
    c2 = state.c**2
    lam2c2 = lam**2 * c2
    s_d = float(np.sum(lam2c2[:k]))
    s_b = float(np.sum(lam2c2[k:]))
    s = s_d + s_b
    lam3c2 = lam**3 * c2
    lam4c2 = lam**4 * c2
    e = lam**2 * noise.kappa2
    n = lam * noise.kappa2
    return BlockStats(
        s_d=s_d,
        s_b=s_b,
        s=s,
        tau_d=float(np.sum(lam3c2[:k])),
        tau_b=float(np.sum(lam3c2[k:])),
        u_d=float(np.sum(lam4c2[:k])),
        u_b=float(np.sum(lam4c2[k:])),
        e_d=float(np.sum(e[:k])),
        e_b=float(np.sum(e[k:])),
        n_loss_d=float(np.sum(n[:k])),
        n_loss_b=float(np.sum(n[k:])),
        theta=(s_d / s) if s > 0 else 0.0,
    )


def loss(state: State, spec: Spectrum) -> float:
    """Quadratic loss (1/2) sum lambda_i c_i^2."""
    _check_dims(state, spec)
    return float(0.5 * np.sum(spec.lambdas * state.c**2))


def random_init(d: int, scale: float, seed: int) -> State:
    """i.i.d. Gaussian coordinates with standard deviation `scale`, at t = 0."""
    if not scale > 0:
        raise ParameterError("scale must be > 0")
    rng = np.random.default_rng(seed)
    return State(c=rng.standard_normal(d) * scale, t=0)


def rescale_to_alignment(state: State, spec: Spectrum, theta: float, which: str = "dominant") -> State:
    """Rescale one block of coordinates so the alignment equals `theta` exactly.

    `which` chooses the rescaled block; the target must lie in (0, 1) and both
    blocks of the input state must carry energy.
    """
    _check_dims(state, spec)
    if not 0 < theta < 1:
        raise ConstructionError(f"target alignment {theta} outside (0, 1)")
    w = (spec.lambdas * state.c) ** 2
    s_d = float(np.sum(w[: spec.k]))
    s_b = float(np.sum(w[spec.k :]))
    if s_d == 0.0 or s_b == 0.0:
        raise ConstructionError("both blocks must be nonzero to rescale to a target alignment")
    c = state.c.copy()
    if which == "dominant":
        c[: spec.k] *= np.sqrt(theta / (1 - theta) * s_b / s_d)
    elif which == "bulk":
        c[spec.k :] *= np.sqrt((1 - theta) / theta * s_d / s_b)
    else:
        raise ParameterError(f"which must be 'dominant' or 'bulk', got {which!r}")
    return State(c=c, t=state.t)


def write_state_csv(path, state: State) -> None:
    """Columns index,c."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["index", "c"])
        for i, ci in enumerate(state.c, start=1):
            writer.writerow([i, repr(float(ci))])


def state_to_json(state: State) -> dict:
    return {"c": state.c.tolist(), "t": state.t}


def state_from_json(doc: dict) -> State:
    try:
        return State(c=np.asarray(doc["c"], dtype=float), t=int(doc.get("t", 0)))
    except KeyError as exc:
        raise ParameterError(f"state document missing key {exc}") from exc
