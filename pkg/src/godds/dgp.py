"""Discrete populations, sampling-scheme tilts, and data draws.

A :class:`DiscreteDGP` is a finite-support joint law of (X, A, Y) for the
target population. Tilting it to a design outcome rate ``omega`` yields a
:class:`QLaw`, the law actually sampled under outcome-dependent (case-control
style) collection: the outcome marginal moves to ``omega`` while the
conditional law of (X, A) given Y is preserved cell by cell.

Tilt arithmetic runs in exact rational arithmetic before rounding to float64,
so stored QLaw fields are correctly rounded values of the exact tilt.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

import numpy as np

from ._rng import make_rng

RANDOM_SAMPLING = "random"
OUTCOME_DEPENDENT = "outcome_dependent"

DEFAULT_EPS = 0.01
_MASS_TOL = 1e-12
_MIN_STRATUM_MASS = 1e-12

CSV_FLOAT_FORMAT = "%.17g"


def _as_prob_array(values: Sequence[float], name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a nonempty 1-d sequence")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    return arr


def _check_interior(arr: np.ndarray, eps: float, name: str) -> None:
    if np.any(arr <= eps) or np.any(arr >= 1.0 - eps):
        bad = arr[(arr <= eps) | (arr >= 1.0 - eps)]
        raise ValueError(f"{name} must lie in ({eps}, {1 - eps}); offending values {bad.tolist()}")


@dataclass(frozen=True)
class DiscreteDGP:
    """Finite-support target population.

    Per stratum x: mass ``p_x``, treatment probability ``pi1`` = P(A=1|X=x),
    and outcome risks ``nu1`` = P(Y=1|X=x,A=1), ``nu0`` = P(Y=1|X=x,A=0).
    ``features`` maps each stratum to the numeric covariate vector regression
    models see; the default is one-hot coding of the stratum label.
    """

    labels: tuple[str, ...]
    p_x: np.ndarray
    pi1: np.ndarray
    nu1: np.ndarray
    nu0: np.ndarray
    features: np.ndarray
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        k = len(self.labels)
        for name in ("p_x", "pi1", "nu1", "nu0"):
            arr = getattr(self, name)
            if arr.shape != (k,):
                raise ValueError(f"{name} must have shape ({k},), got {arr.shape}")
        if len(set(self.labels)) != k:
            raise ValueError("stratum labels must be unique")
        if np.any(self.p_x < _MIN_STRATUM_MASS):
            raise ValueError(f"degenerate stratum mass below {_MIN_STRATUM_MASS}")
        if abs(float(self.p_x.sum()) - 1.0) > _MASS_TOL:
            raise ValueError(f"stratum masses must sum to 1, got {self.p_x.sum()!r}")
        _check_interior(self.pi1, self.eps, "pi1")
        _check_interior(self.nu1, self.eps, "nu1")
        _check_interior(self.nu0, self.eps, "nu0")
        if self.features.shape[0] != k or self.features.ndim != 2:
            raise ValueError(f"features must have shape ({k}, d)")
        for arr in (self.p_x, self.pi1, self.nu1, self.nu0, self.features):
            arr.setflags(write=False)

    @property
    def n_strata(self) -> int:
        return len(self.labels)

    @property
    def rho(self) -> float:
        """Target outcome rate P(Y=1)."""
        eta = self.pi1 * self.nu1 + (1.0 - self.pi1) * self.nu0
        return float(np.dot(self.p_x, eta))

    def index_of(self, stratum: str | int) -> int:
        if isinstance(stratum, str):
            try:
                return self.labels.index(stratum)
            except ValueError:
                raise KeyError(f"unknown stratum {stratum!r}") from None
        idx = int(stratum)
        if not 0 <= idx < self.n_strata:
            raise KeyError(f"stratum index {idx} out of range")
        return idx

    def joint_cells(self) -> dict[tuple[int, int, int], float]:
        """Joint masses P(X=x, A=a, Y=y) keyed by (stratum index, a, y)."""
        cells: dict[tuple[int, int, int], float] = {}
        for k in range(self.n_strata):
            for a, pia, risk in ((1, self.pi1[k], self.nu1[k]), (0, 1.0 - self.pi1[k], self.nu0[k])):
                cells[(k, a, 1)] = float(self.p_x[k] * pia * risk)
                cells[(k, a, 0)] = float(self.p_x[k] * pia * (1.0 - risk))
        return cells


@dataclass(frozen=True)
class QLaw:
    """Sampled-population law after tilting the outcome marginal to ``omega``.

    Fields mirror :class:`DiscreteDGP` but describe the sampled law Q:
    ``q_x`` = Q(X=x), ``pi1`` = Q(A=1|X=x), ``mu1``/``mu0`` = Q(Y=1|X=x,A=a).
    ``omega`` is Q(Y=1); ``rho`` records the target rate P(Y=1) of the source.
    """

    labels: tuple[str, ...]
    q_x: np.ndarray
    pi1: np.ndarray
    mu1: np.ndarray
    mu0: np.ndarray
    features: np.ndarray
    omega: float
    rho: float
    eps: float = DEFAULT_EPS

    def __post_init__(self):
        if abs(float(self.q_x.sum()) - 1.0) > _MASS_TOL:
            raise ValueError(f"Q masses must sum to 1, got {self.q_x.sum()!r}")
        if not 0.0 < self.omega < 1.0 or not 0.0 < self.rho < 1.0:
            raise ValueError("omega and rho must lie in (0, 1)")
        for arr in (self.q_x, self.pi1, self.mu1, self.mu0, self.features):
            arr.setflags(write=False)

    @property
    def n_strata(self) -> int:
        return len(self.labels)

    @property
    def eta(self) -> np.ndarray:
        """Q(Y=1|X=x) composed from the per-arm pieces."""
        return self.pi1 * self.mu1 + (1.0 - self.pi1) * self.mu0

    def index_of(self, stratum: str | int) -> int:
        if isinstance(stratum, str):
            try:
                return self.labels.index(stratum)
            except ValueError:
                raise KeyError(f"unknown stratum {stratum!r}") from None
        idx = int(stratum)
        if not 0 <= idx < self.n_strata:
            raise KeyError(f"stratum index {idx} out of range")
        return idx

    def joint_cells(self) -> dict[tuple[int, int, int], float]:
        """Joint masses Q(X=x, A=a, Y=y) keyed by (stratum index, a, y)."""
        cells: dict[tuple[int, int, int], float] = {}
        for k in range(self.n_strata):
            for a, pia, risk in ((1, self.pi1[k], self.mu1[k]), (0, 1.0 - self.pi1[k], self.mu0[k])):
                cells[(k, a, 1)] = float(self.q_x[k] * pia * risk)
                cells[(k, a, 0)] = float(self.q_x[k] * pia * (1.0 - risk))
        return cells


@dataclass(frozen=True)
class Dataset:
    """Immutable sample of (x, a, y) rows plus sampling metadata."""

    y: np.ndarray
    a: np.ndarray
    x: np.ndarray
    scheme: str
    omega_design: float | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.y.ndim != 1 or self.a.shape != self.y.shape:
            raise ValueError("y and a must be aligned 1-d arrays")
        if self.x.ndim != 2 or self.x.shape[0] != self.y.shape[0]:
            raise ValueError("x must be (n, d) aligned with y")
        if not np.isin(self.y, (0, 1)).all() or not np.isin(self.a, (0, 1)).all():
            raise ValueError("y and a must be strictly binary")
        if self.scheme not in (RANDOM_SAMPLING, OUTCOME_DEPENDENT):
            raise ValueError(f"unknown sampling scheme {self.scheme!r}")
        for arr in (self.y, self.a, self.x):
            arr.setflags(write=False)

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def d(self) -> int:
        return int(self.x.shape[1])


def make_dgp(
    labels: Sequence[str],
    p_x: Sequence[float],
    pi1: Sequence[float],
    nu1: Sequence[float],
    nu0: Sequence[float],
    features: Sequence[Sequence[float]] | None = None,
    eps: float = DEFAULT_EPS,
) -> DiscreteDGP:
    """Validate and assemble a :class:`DiscreteDGP` (one-hot features by default)."""
    labels = tuple(str(s) for s in labels)
    k = len(labels)
    if features is None:
        feats = np.eye(k, dtype=np.float64)
    else:
        feats = np.asarray(features, dtype=np.float64)
        if feats.ndim == 1:
            feats = feats.reshape(k, -1)
    return DiscreteDGP(
        labels=labels,
        p_x=_as_prob_array(p_x, "p_x"),
        pi1=_as_prob_array(pi1, "pi1"),
        nu1=_as_prob_array(nu1, "nu1"),
        nu0=_as_prob_array(nu0, "nu0"),
        features=feats,
        eps=eps,
    )


def worked_example() -> DiscreteDGP:
    """Two-stratum population with constant conditional odds ratio 1/45.

    Risks: stratum "Female" has (1/6, 9/10) under treatment/control, stratum
    "Male" has (1/26, 9/14); both strata have mass 1/2. The treatment
    probability is not part of the published table; it is set to the symmetric
    default 1/2 in each stratum.
    """
    return make_dgp(
        labels=("Female", "Male"),
        p_x=(0.5, 0.5),
        pi1=(0.5, 0.5),
        nu1=(1.0 / 6.0, 1.0 / 26.0),
        nu0=(9.0 / 10.0, 9.0 / 14.0),
    )


def random_dgp(
    rng: np.random.Generator,
    n_strata: int | None = None,
    lo: float = 0.05,
    hi: float = 0.95,
    min_mass: float = 0.05,
) -> DiscreteDGP:
    """Draw a valid random population for property tests.

    Stratum count defaults to uniform on {3, ..., 6}; all probabilities are
    uniform on [lo, hi] and masses are bounded below by ``min_mass``.
    """
    if n_strata is None:
        n_strata = int(rng.integers(3, 7))
    raw = rng.uniform(min_mass, 1.0, size=n_strata)
    p = raw / raw.sum()
    # mix toward uniform until every mass clears the floor
    while p.min() < min_mass:
        p = 0.5 * p + 0.5 / n_strata
    return make_dgp(
        labels=tuple(f"s{i}" for i in range(n_strata)),
        p_x=p,
        pi1=rng.uniform(lo, hi, size=n_strata),
        nu1=rng.uniform(lo, hi, size=n_strata),
        nu0=rng.uniform(lo, hi, size=n_strata),
    )


def _frac(x: float) -> Fraction:
    return Fraction(float(x))


def tilt_to_outcome_rate(dgp: DiscreteDGP, omega: float, rho_implied: float | None = None) -> QLaw:
    """Tilt the target law so the sampled outcome marginal equals ``omega``.

    Masses with Y=1 are scaled by omega/rho and masses with Y=0 by
    (1-omega)/(1-rho), which leaves every conditional (X, A) | Y cell
    untouched. Arithmetic is exact (rationals) before the float64 rounding of
    the stored fields.
    """
    if not dgp.eps < omega < 1.0 - dgp.eps:
        raise ValueError(f"omega must lie in ({dgp.eps}, {1 - dgp.eps}), got {omega}")
    p = [_frac(v) for v in dgp.p_x]
    pi1 = [_frac(v) for v in dgp.pi1]
    nu1 = [_frac(v) for v in dgp.nu1]
    nu0 = [_frac(v) for v in dgp.nu0]
    rho = sum(pk * (pik * n1k + (1 - pik) * n0k) for pk, pik, n1k, n0k in zip(p, pi1, nu1, nu0))
    if rho <= 0 or rho >= 1:
        raise ValueError("target law has degenerate outcome rate")
    if rho_implied is not None and abs(float(rho) - float(rho_implied)) > 1e-9:
        raise ValueError(f"rho_implied {rho_implied} does not match the law's outcome rate {float(rho)}")
    om = _frac(omega)
    t1, t0 = om / rho, (1 - om) / (1 - rho)

    q_x, pi1_q, mu1_q, mu0_q = [], [], [], []
    for pk, pik, n1k, n0k in zip(p, pi1, nu1, nu0):
        cells = {}
        for a, pia, nua in ((1, pik, n1k), (0, 1 - pik, n0k)):
            cells[(a, 1)] = pk * pia * nua * t1
            cells[(a, 0)] = pk * pia * (1 - nua) * t0
        qx = sum(cells.values())
        qa1 = cells[(1, 1)] + cells[(1, 0)]
        qa0 = cells[(0, 1)] + cells[(0, 0)]
        q_x.append(float(qx))
        pi1_q.append(float(qa1 / qx))
        mu1_q.append(float(cells[(1, 1)] / qa1))
        mu0_q.append(float(cells[(0, 1)] / qa0))

    return QLaw(
        labels=dgp.labels,
        q_x=np.array(q_x),
        pi1=np.array(pi1_q),
        mu1=np.array(mu1_q),
        mu0=np.array(mu0_q),
        features=np.array(dgp.features, copy=True),
        omega=float(omega),
        rho=float(rho),
        eps=dgp.eps,
    )


def _rows_from_cells(
    dgp: DiscreteDGP, cell_index: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decode flat cell index c = 4*k + 2*a + y into row arrays."""
    k = cell_index // 4
    a = (cell_index % 4) // 2
    y = cell_index % 2
    x = dgp.features[k]
    return y.astype(np.int8), a.astype(np.int8), np.ascontiguousarray(x, dtype=np.float64)


def _cell_masses(dgp: DiscreteDGP) -> np.ndarray:
    """Joint masses ordered by flat index 4*k + 2*a + y."""
    cells = dgp.joint_cells()
    k = dgp.n_strata
    out = np.empty(4 * k)
    for (ki, a, y), mass in cells.items():
        out[4 * ki + 2 * a + y] = mass
    return out


def draw_random_sample(dgp: DiscreteDGP, n: int, seed: int) -> Dataset:
    """Draw n iid rows from the target law."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    rng = make_rng(seed, 0)
    masses = _cell_masses(dgp)
    idx = rng.choice(masses.size, size=n, p=masses / masses.sum())
    y, a, x = _rows_from_cells(dgp, idx)
    return Dataset(y=y, a=a, x=x, scheme=RANDOM_SAMPLING, omega_design=None, seed=int(seed))


def draw_outcome_dependent(dgp: DiscreteDGP, n: int, omega: float, seed: int) -> Dataset:
    """Draw n rows by Y ~ Bernoulli(omega), then (X, A) from the target law given Y."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    if not 0.0 < omega < 1.0:
        raise ValueError(f"omega must lie in (0, 1), got {omega}")
    masses = _cell_masses(dgp)
    k = dgp.n_strata
    flat = np.arange(4 * k)
    mass_y1 = np.where(flat % 2 == 1, masses, 0.0)
    mass_y0 = np.where(flat % 2 == 0, masses, 0.0)
    if mass_y1.sum() <= 0.0 or mass_y0.sum() <= 0.0:
        raise ValueError("target law puts zero mass on a needed outcome class")

    rng = make_rng(seed, 1)
    y_draw = rng.random(n) < omega
    idx = np.empty(n, dtype=np.int64)
    n1 = int(y_draw.sum())
    if n1:
        idx[y_draw] = rng.choice(flat, size=n1, p=mass_y1 / mass_y1.sum())
    if n - n1:
        idx[~y_draw] = rng.choice(flat, size=n - n1, p=mass_y0 / mass_y0.sum())
    y, a, x = _rows_from_cells(dgp, idx)
    return Dataset(
        y=y, a=a, x=x, scheme=OUTCOME_DEPENDENT, omega_design=float(omega), seed=int(seed)
    )


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------

def write_dataset_csv(dataset: Dataset, path: str | Path) -> None:
    """Write rows as ``y,a,x1,...,xd`` with round-trip-exact floats."""
    path = Path(path)
    header = "y,a," + ",".join(f"x{i + 1}" for i in range(dataset.d))
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for i in range(dataset.n):
            xs = ",".join(CSV_FLOAT_FORMAT % v for v in dataset.x[i])
            fh.write(f"{int(dataset.y[i])},{int(dataset.a[i])},{xs}\n")


def read_dataset_csv(
    path: str | Path,
    scheme: str = OUTCOME_DEPENDENT,
    omega_design: float | None = None,
) -> Dataset:
    """Parse a ``y,a,x1,...,xd`` file, reporting the offending row on error."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip() != ""]
    if not lines:
        raise ValueError(f"{path}: empty file")
    header = [c.strip() for c in lines[0].split(",")]
    if len(header) < 2 or header[0] != "y" or header[1] != "a":
        raise ValueError(f"{path}: header must start with 'y,a', got {lines[0]!r}")
    expected = ["y", "a"] + [f"x{i + 1}" for i in range(len(header) - 2)]
    if header != expected:
        raise ValueError(f"{path}: malformed header {lines[0]!r}")
    d = len(header) - 2
    if len(lines) == 1:
        raise ValueError(f"{path}: empty dataset (header only)")

    n = len(lines) - 1
    y = np.empty(n, dtype=np.int8)
    a = np.empty(n, dtype=np.int8)
    x = np.empty((n, d), dtype=np.float64)
    for i, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != len(header):
            raise ValueError(f"{path}: row {i} has {len(parts)} fields, expected {len(header)}")
        for j, (col, raw) in enumerate(zip(header, parts)):
            if j < 2:
                if raw not in ("0", "1"):
                    raise ValueError(f"{path}: row {i} column {col!r} must be 0 or 1, got {raw!r}")
                (y if j == 0 else a)[i - 2] = int(raw)
            else:
                try:
                    x[i - 2, j - 2] = float(raw)
                except ValueError:
                    raise ValueError(
                        f"{path}: row {i} column {col!r} is not numeric: {raw!r}"
                    ) from None
    return Dataset(y=y, a=a, x=x, scheme=scheme, omega_design=omega_design, seed=None)


def _config_number(value) -> float:
    """Accept JSON numbers or exact 'p/q' fraction strings."""
    if isinstance(value, str):
        return float(Fraction(value))
    return float(value)


def read_dgp_config(path: str | Path) -> DiscreteDGP:
    """Load a population definition from a JSON config.

    Schema: ``{"strata": [{"x": label, "p_x": m, "pi1": p, "nu1": r1,
    "nu0": r0, "features": [...]?}, ...], "eps": e?}``. Probability values
    may be written as strings like ``"1/6"`` for exactness.
    """
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict) or "strata" not in doc:
        raise ValueError(f"{path}: config must be an object with a 'strata' list")
    strata = doc["strata"]
    if not strata:
        raise ValueError(f"{path}: no strata defined")
    labels, p_x, pi1, nu1, nu0 = [], [], [], [], []
    feats = []
    for i, st in enumerate(strata):
        missing = {"x", "p_x", "pi1", "nu1", "nu0"} - set(st)
        if missing:
            raise ValueError(f"{path}: stratum {i} missing keys {sorted(missing)}")
        labels.append(str(st["x"]))
        p_x.append(_config_number(st["p_x"]))
        pi1.append(_config_number(st["pi1"]))
        nu1.append(_config_number(st["nu1"]))
        nu0.append(_config_number(st["nu0"]))
        feats.append([float(v) for v in st["features"]] if "features" in st else None)
    if any(f is not None for f in feats):
        if any(f is None for f in feats):
            raise ValueError(f"{path}: either all strata or none must define features")
        features = np.asarray(feats, dtype=np.float64)
    else:
        features = None
    eps = float(doc.get("eps", DEFAULT_EPS))
    return make_dgp(labels, p_x, pi1, nu1, nu0, features=features, eps=eps)


def write_dgp_config(dgp: DiscreteDGP, path: str | Path) -> None:
    path = Path(path)
    doc = {
        "eps": dgp.eps,
        "strata": [
            {
                "x": dgp.labels[k],
                "p_x": float(dgp.p_x[k]),
                "pi1": float(dgp.pi1[k]),
                "nu1": float(dgp.nu1[k]),
                "nu0": float(dgp.nu0[k]),
                "features": [float(v) for v in dgp.features[k]],
            }
            for k in range(dgp.n_strata)
        ],
    }
    with path.open("w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
