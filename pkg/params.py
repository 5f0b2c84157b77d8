"""
Parameter space of the two-inequality system, derived scales, and the
three-region split of the (x, y) plane.
"""
import enum
import json
import logging
import math
import os
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from errors import InvalidParamsError, RatioOutOfBandError

logger = logging.getLogger(__name__)

# 39/37 is the exponent ceiling of the whole argument.
C_CEILING = 39.0 / 37.0

DEFAULT_LAMBDA_CUT = 0.1
DEFAULT_ETA = 0.01
DEFAULT_LOG_POWER = 201

CONFIG_ENV_VAR = "FIVEPRIME_CONFIG"
CONFIG_FILE_NAME = "fiveprime_config.json"


@dataclass(frozen=True)
class SystemParams:
    c: float
    d: float
    alpha: float
    beta: float
    N1: float
    N2: float
    lambda_cut: float = DEFAULT_LAMBDA_CUT
    eta: float = DEFAULT_ETA
    log_power: int = DEFAULT_LOG_POWER
    # prime support bound; None means N1^(1/c)
    X: Optional[float] = None

    @property
    def support_X(self) -> float:
        return float(self.X) if self.X is not None else self.N1 ** (1.0 / self.c)

    def failures(self) -> List[str]:
        """Every violated invariant, as readable strings (empty when valid)."""
        problems = []
        if not 1.0 < self.d < self.c < C_CEILING:
            problems.append(f"need 1 < d < c < 39/37, got c={self.c!r}, d={self.d!r}")
        band = ratio_ceiling(self.c, self.d) if self.c > 0 else math.nan
        if not 1.0 < self.alpha < self.beta < band:
            problems.append(
                f"need 1 < alpha < beta < 5^(1-d/c)={band:.6g}, "
                f"got alpha={self.alpha!r}, beta={self.beta!r}"
            )
        if self.N1 > 0 and self.N2 > 0 and self.c > 0:
            ratio = self.N2 / self.N1 ** (self.d / self.c)
            if not self.alpha <= ratio <= self.beta:
                problems.append(f"N2/N1^(d/c)={ratio:.9g} outside [alpha, beta]")
        else:
            problems.append(f"need N1, N2 > 0, got N1={self.N1!r}, N2={self.N2!r}")
        if not 0.0 < self.lambda_cut < 1.0:
            problems.append(f"need 0 < lambda_cut < 1, got {self.lambda_cut!r}")
        if not self.eta > 0.0:
            problems.append(f"need eta > 0, got {self.eta!r}")
        if int(self.log_power) != self.log_power or self.log_power < 0:
            problems.append(f"log_power must be a non-negative integer, got {self.log_power!r}")
        if self.X is not None:
            if not self.X > 1.0:
                problems.append(f"need X > 1, got X={self.X!r}")
            elif self.N1 > 0 and self.c > 0 and 0.0 < self.lambda_cut < 1.0:
                low, high = 5.0 * (self.lambda_cut * self.X) ** self.c, 5.0 * self.X ** self.c
                if not low <= self.N1 <= high:
                    problems.append(
                        f"N1={self.N1:.9g} outside [{low:.9g}, {high:.9g}], "
                        f"the range of five c-th powers in ({self.lambda_cut * self.X:g}, {self.X:g}]"
                    )
        return problems

    def validate(self) -> "SystemParams":
        problems = self.failures()
        if problems:
            raise InvalidParamsError(problems)
        return self

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "SystemParams":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise InvalidParamsError([f"unknown config keys: {', '.join(unknown)}"])
        missing = sorted(f.name for f in fields(cls) if f.name in ("c", "d", "alpha", "beta", "N1", "N2") and f.name not in data)
        if missing:
            raise InvalidParamsError([f"missing config keys: {', '.join(missing)}"])
        return cls(**data)

    @classmethod
    def for_experiment(
        cls,
        c: float,
        d: float,
        X: float,
        ratio: float,
        lambda_cut: float = DEFAULT_LAMBDA_CUT,
        eta: float = DEFAULT_ETA,
        log_power: int = 0,
    ) -> "SystemParams":
        """Admissible parameters around targets from pick_targets.

        alpha and beta are placed halfway between the ratio and the ends
        of the admissible band. A ratio below the attainable floor is
        allowed but logged: such an instance has no solutions.
        """
        N1, N2 = pick_targets(c, d, X, ratio, lambda_cut)
        floor, _ = attainable_ratio_band(c, d, N1, X, lambda_cut)
        if ratio < floor:
            logger.warning(
                f"ratio {ratio:.6g} is below {floor:.6g}, the least N2/N1^(d/c) reachable by five primes "
                f"in ({lambda_cut * X:g}, {X:g}]; counts will be empty"
            )
        ceiling = ratio_ceiling(c, d)
        params = cls(
            c=c,
            d=d,
            alpha=(1.0 + ratio) / 2.0,
            beta=(ratio + ceiling) / 2.0,
            N1=N1,
            N2=N2,
            lambda_cut=lambda_cut,
            eta=eta,
            log_power=log_power,
            X=float(X),
        )
        return params.validate()


@dataclass(frozen=True)
class DerivedScales:
    X: float
    eps1: float
    eps2: float
    K1: float
    K2: float
    tau1: float
    tau2: float

    @property
    def log_X(self) -> float:
        return math.log(self.X)


class RegionLabel(enum.Enum):
    OMEGA1 = "Omega1"
    OMEGA2 = "Omega2"
    OMEGA3 = "Omega3"

    @property
    def code(self) -> int:
        return _REGION_CODES[self]


_REGION_CODES = {RegionLabel.OMEGA1: 1, RegionLabel.OMEGA2: 2, RegionLabel.OMEGA3: 3}


def ratio_ceiling(c: float, d: float) -> float:
    """Upper end 5^(1-d/c) of the admissible ratio band."""
    return 5.0 ** (1.0 - d / c)


def _power_of_log(log_X: float, power: int) -> float:
    # (log X)^power overflows a double long before X does.
    if power == 0:
        return 1.0
    exponent = power * math.log(log_X)
    return math.exp(exponent) if exponent < 709.0 else math.inf


def _window(X: float, e: float, log_power: int) -> float:
    log_X = math.log(X)
    factor = _power_of_log(log_X, log_power)
    return X ** (-(C_CEILING - e)) * factor


def derive_scales(
    params: SystemParams,
    eps1: Optional[float] = None,
    eps2: Optional[float] = None,
) -> DerivedScales:
    """Compute X, the windows, the K-box and the tau-box for params.

    eps1/eps2 override the log-power formula; desk-scale experiments run
    with log_power=0 and explicit windows.
    """
    params.validate()
    X = params.support_X
    if X <= 1.0:
        raise InvalidParamsError([f"X must exceed 1, got {X!r}"])
    log_X = math.log(X)

    e1 = _window(X, params.c, params.log_power) if eps1 is None else float(eps1)
    e2 = _window(X, params.d, params.log_power) if eps2 is None else float(eps2)
    if e1 < 0 or e2 < 0:
        raise InvalidParamsError([f"windows must be non-negative, got eps1={e1!r}, eps2={e2!r}"])

    K1 = log_X / e1 if e1 > 0 else math.inf
    K2 = log_X / e2 if e2 > 0 else math.inf
    tau1 = X ** (0.75 - params.c - params.eta)
    tau2 = X ** (0.75 - params.d - params.eta)

    scales = DerivedScales(X=X, eps1=e1, eps2=e2, K1=K1, K2=K2, tau1=tau1, tau2=tau2)

    if e1 <= 1.0 and e2 <= 1.0:
        if not (tau1 < K1 and tau2 < K2):
            raise InvalidParamsError(
                [f"tau-box not inside K-box: tau1={tau1:.6g}, K1={K1:.6g}, tau2={tau2:.6g}, K2={K2:.6g}"]
            )
    else:
        logger.warning(
            f"windows exceed 1 (eps1={e1:.3g}, eps2={e2:.3g}); the intermediate region may be empty"
        )
    return scales


def classify_region(scales: DerivedScales, x: float, y: float) -> RegionLabel:
    """Omega1 inside the open tau-box, Omega3 outside the closed K-box, Omega2 between.

    Compares against the box edges directly, so K = 0 (overflowed windows)
    and K = inf (zero windows) are both handled.
    """
    ax, ay = abs(x), abs(y)
    if ax < scales.tau1 and ay < scales.tau2:
        return RegionLabel.OMEGA1
    if ax > scales.K1 or ay > scales.K2:
        return RegionLabel.OMEGA3
    return RegionLabel.OMEGA2


def classify_regions(scales: DerivedScales, x: Any, y: Any) -> np.ndarray:
    """Vectorized classify_region; returns region codes 1, 2, 3 (broadcast shape)."""
    ax = np.abs(np.asarray(x, dtype=float))
    ay = np.abs(np.asarray(y, dtype=float))
    inner = (ax < scales.tau1) & (ay < scales.tau2)
    outer = (ax > scales.K1) | (ay > scales.K2)
    codes = np.full(np.broadcast(ax, ay).shape, 2, dtype=np.int8)
    codes[outer] = 3
    codes[inner] = 1
    return codes


def pick_targets(
    c: float, d: float, X: float, ratio: float, lambda_cut: float = DEFAULT_LAMBDA_CUT
) -> Tuple[float, float]:
    """Mid-range targets (N1, N2) for primes in (lambda_cut*X, X]."""
    ceiling = ratio_ceiling(c, d)
    if not 1.0 < ratio < ceiling:
        raise RatioOutOfBandError([f"ratio {ratio!r} outside (1, {ceiling:.6g})"])
    N1 = mid_range_N1(c, X, lambda_cut)
    N2 = ratio * N1 ** (d / c)
    return N1, N2


def mid_range_N1(c: float, X: float, lambda_cut: float = DEFAULT_LAMBDA_CUT) -> float:
    return 5.0 * (1.0 + lambda_cut) / 2.0 * X ** c


def mid_band_ratio(c: float, d: float, X: float, lambda_cut: float = DEFAULT_LAMBDA_CUT) -> float:
    """Midpoint of the attainable ratio band at the mid-range N1."""
    floor, ceiling = attainable_ratio_band(c, d, mid_range_N1(c, X, lambda_cut), X, lambda_cut)
    return (floor + ceiling) / 2.0


def attainable_ratio_band(
    c: float, d: float, N1: float, X: float, lambda_cut: float = DEFAULT_LAMBDA_CUT
) -> Tuple[float, float]:
    """Least and greatest N2/N1^(d/c) for five reals in [lambda_cut*X, X] with c-th powers summing to N1.

    With u_i = p_i^c / N1 the ratio is sum u_i^(d/c) on the simplex sum u_i = 1
    cut by the box [(lambda_cut*X)^c/N1, X^c/N1]. The sum is concave, so its
    maximum is the centre 5^(1-d/c) and its minimum sits at a vertex with at
    most one coordinate strictly inside the box. Prime tuples inside the
    windows stay within this band up to the window widths.
    """
    q = d / c
    low = (lambda_cut * X) ** c / N1
    high = X ** c / N1
    if not 5.0 * low <= 1.0 <= 5.0 * high:
        raise InvalidParamsError(
            [f"N1={N1:.9g} is not a sum of five c-th powers in [{lambda_cut * X:g}, {X:g}]"]
        )
    floor = math.inf
    for top in range(5):
        rest = 1.0 - top * high - (4 - top) * low
        if low <= rest <= high:
            floor = min(floor, top * high ** q + (4 - top) * low ** q + rest ** q)
    return floor, ratio_ceiling(c, d)


def main_term(X: float, eps1: float, eps2: float, c: float, d: float) -> float:
    """eps1 * eps2 * X^(5-c-d)."""
    return eps1 * eps2 * X ** (5.0 - c - d)


DEFAULT_CONFIG: Dict[str, Any] = {
    "c": 1.03,
    "d": 1.01,
    "alpha": 1.005,
    "beta": 1.03,
    "lambda_cut": DEFAULT_LAMBDA_CUT,
    "eta": DEFAULT_ETA,
    "log_power": DEFAULT_LOG_POWER,
}


def load_params_config(config_path: Optional[str] = None) -> Dict[str, Any]:
    """Load the base config document.

    Order: FIVEPRIME_CONFIG env JSON, then config_path, then the
    fiveprime_config.json shipped next to this module, then defaults.
    The result may lack N1/N2; commands that pick targets fill them in.
    """
    config_json = os.getenv(CONFIG_ENV_VAR)
    if config_json:
        try:
            document = json.loads(config_json)
        except json.JSONDecodeError as e:
            raise InvalidParamsError([f"{CONFIG_ENV_VAR} is not valid JSON: {e}"])
        logger.info(f"Loaded parameters from {CONFIG_ENV_VAR}")
        return _merge_defaults(document)

    candidates = []
    if config_path:
        if not os.path.exists(config_path):
            raise InvalidParamsError([f"config file not found: {config_path}"])
        candidates.append(config_path)
    candidates.append(os.path.join(os.path.dirname(os.path.abspath(__file__)), CONFIG_FILE_NAME))

    for path in candidates:
        if os.path.exists(path):
            with open(path, "r") as f:
                try:
                    document = json.load(f)
                except json.JSONDecodeError as e:
                    raise InvalidParamsError([f"{path} is not valid JSON: {e}"])
            logger.info(f"Loaded parameters from {path}")
            return _merge_defaults(document)

    logger.info("Using default parameters")
    return dict(DEFAULT_CONFIG)


def _merge_defaults(document: Dict[str, Any]) -> Dict[str, Any]:
    if not isinstance(document, dict):
        raise InvalidParamsError(["config document must be a JSON object"])
    known = {f.name for f in fields(SystemParams)}
    unknown = sorted(set(document) - known)
    if unknown:
        raise InvalidParamsError([f"unknown config keys: {', '.join(unknown)}"])
    merged = dict(DEFAULT_CONFIG)
    merged.update(document)
    return merged


def override(params: SystemParams, **changes: Union[float, int, None]) -> SystemParams:
    """Copy of params with the non-None changes applied."""
    return replace(params, **{k: v for k, v in changes.items() if v is not None})
