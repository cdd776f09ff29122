"""Maximum-likelihood fitting of degree samples and structure selection.

Closed-form estimators for the exponential, normal, and Poisson
families, and a discrete (zeta-normalized) power law fitted by
one-dimensional likelihood maximization, with an optional
Kolmogorov-Smirnov scan for the tail start. Standard errors come from
the observed Fisher information; each fit carries its variance-
covariance matrix and log-likelihood so selection rules can be swapped.

All operations are pure functions of immutable samples and are safe for
data-parallel execution across windows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence, Union

from .graph import DegreeSample

FAMILIES = ("exponential", "normal", "poisson", "power-law")
RULES = ("min-se", "aic", "max-loglik")

ALPHA_MIN = 1.0 + 1e-9
ALPHA_MAX = 20.0
ALPHA_TOL = 1e-8

_LN_2PI = math.log(2.0 * math.pi)

# B_{2m} for m = 1..10; enough Euler-Maclaurin pairs to push the
# truncation error of the zeta tail well below 1e-13 once the head
# covers a + k >= ~15.
_BERNOULLI_2M = (
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
)


class FitError(ValueError):
    """The sample cannot support the requested fit."""


SampleLike = Union[DegreeSample, Sequence[float], Iterable[float]]


def _values(sample: SampleLike) -> tuple:
    if isinstance(sample, DegreeSample):
        return sample.degrees
    return tuple(sample)


def _require_integers(xs: tuple, context: str) -> tuple[int, ...]:
    out = []
    for x in xs:
        if isinstance(x, bool) or float(x) != int(x):
            raise FitError(f"{context} requires integer values, got {x!r}")
        out.append(int(x))
    return tuple(out)


@dataclass(frozen=True)
class FitResult:
    """One family fitted to one sample.

    ``params``/``se`` preserve estimation order; ``vcov`` rows follow the
    order of ``se`` (parameters estimated without a standard error, like
    a scanned tail start, carry no row). ``n`` is the effective sample
    size the family actually used.
    """

    family: str
    params: Mapping[str, float]
    se: Mapping[str, float]
    vcov: tuple[tuple[float, ...], ...]
    log_likelihood: float
    n: int

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        k = len(self.vcov)
        if k != len(self.se) or any(len(row) != k for row in self.vcov):
            raise ValueError("vcov shape does not match the se vector")

    def to_json_dict(self) -> dict:
        k = len(self.vcov)
        return {
            "family": self.family,
            "params": dict(self.params),
            "se": dict(self.se),
            "vcov": {"dim": [k, k], "data": [v for row in self.vcov for v in row]},
            "loglik": self.log_likelihood,
            "n": self.n,
        }

    @classmethod
    def from_json_dict(cls, obj: Mapping) -> "FitResult":
        dim = obj["vcov"]["dim"]
        data = obj["vcov"]["data"]
        rows = tuple(
            tuple(data[i * dim[1]:(i + 1) * dim[1]]) for i in range(dim[0]))
        return cls(obj["family"], dict(obj["params"]), dict(obj["se"]),
                   rows, obj["loglik"], obj["n"])


@dataclass(frozen=True)
class StructureClass:
    """Outcome of comparing all fitted families under one rule."""

    chosen: str
    rule: str
    all_fits: tuple[FitResult, ...]

    def __post_init__(self):
        if self.chosen not in {fit.family for fit in self.all_fits}:
            raise ValueError("chosen family is not among the fits")


# --- Hurwitz zeta -----------------------------------------------------------

def _zeta_core(s: float, a: float, order: int) -> tuple[float, float, float]:
    """zeta(s, a) and its first/second s-derivatives by head summation
    plus an Euler-Maclaurin tail starting at x = a + N.

    Derivative terms follow from differentiating each tail component in
    s: the integral x^(1-s)/(s-1), the half term x^(-s)/2, and the
    Bernoulli corrections c_m * P_m(s) * x^-(s+2m-1) with
    P_m(s) = prod(s+i, i=0..2m-2).
    """
    if not s > 1.0:
        raise ValueError(f"hurwitz_zeta requires s > 1, got {s!r}")
    if not a > 0.0:
        raise ValueError(f"hurwitz_zeta requires a > 0, got {a!r}")

    target = max(15.0, 1.5 * s)
    head_terms = max(0, math.ceil(target - a))

    h0 = h1 = h2 = 0.0
    if order == 0:
        for k in range(head_terms):
            h0 += (a + k) ** (-s)
    else:
        for k in range(head_terms):
            base = a + k
            term = base ** (-s)
            lnb = math.log(base)
            h0 += term
            h1 += lnb * term
            h2 += lnb * lnb * term

    x = a + head_terms
    u = math.log(x)
    xs = x ** (-s)
    g = 1.0 / (s - 1.0)

    z0 = h0 + x * xs * g + 0.5 * xs
    z1 = z2 = 0.0
    if order >= 1:
        z1 = -h1 - x * xs * (u * g + g * g) - 0.5 * u * xs
    if order >= 2:
        z2 = h2 + x * xs * (u * u * g + 2.0 * u * g * g + 2.0 * g ** 3) \
            + 0.5 * u * u * xs

    p = 1.0          # prod(s+i)
    q1 = q2 = 0.0    # sum 1/(s+i), sum 1/(s+i)^2
    fact = 1.0
    next_i = 0       # p currently covers i < next_i
    for m, b2m in enumerate(_BERNOULLI_2M, start=1):
        while next_i <= 2 * m - 2:
            p *= s + next_i
            q1 += 1.0 / (s + next_i)
            q2 += 1.0 / (s + next_i) ** 2
            next_i += 1
        fact = math.factorial(2 * m)
        c = b2m / fact
        e = x ** (-(s + 2 * m - 1))
        z0 += c * p * e
        if order >= 1:
            z1 += c * p * e * (q1 - u)
        if order >= 2:
            z2 += c * p * e * ((q1 - u) ** 2 - q2)
    return z0, z1, z2


def hurwitz_zeta(s: float, a: float = 1.0) -> float:
    """zeta(s, a) = sum_{k>=0} (a+k)^(-s), for s > 1."""
    return _zeta_core(s, a, order=0)[0]


def hurwitz_zeta_derivatives(s: float, a: float = 1.0) -> tuple[float, float, float]:
    """(zeta, d zeta/ds, d^2 zeta/ds^2) at (s, a), for s > 1."""
    return _zeta_core(s, a, order=2)


# --- Log-likelihood ---------------------------------------------------------

def log_likelihood(family: str, params: Mapping[str, float],
                   sample: SampleLike) -> float:
    """Exact log-density sum of the sample under the given family.

    The power law is evaluated on its tail only (values >= x_min);
    support violations for the other families raise FitError.
    """
    xs = _values(sample)
    n = len(xs)
    if n == 0:
        raise FitError("empty sample")
    if family == "exponential":
        lam = params["lambda"]
        if lam <= 0:
            raise FitError("exponential rate must be positive")
        if any(x < 0 for x in xs):
            raise FitError("exponential support is [0, inf)")
        return n * math.log(lam) - lam * math.fsum(xs)
    if family == "normal":
        mu = params["mu"]
        sigma = params["sigma"]
        if sigma <= 0:
            raise FitError("normal sigma must be positive")
        ss = math.fsum((x - mu) ** 2 for x in xs)
        return -0.5 * n * _LN_2PI - n * math.log(sigma) - ss / (2.0 * sigma * sigma)
    if family == "poisson":
        lam = params["lambda"]
        if lam < 0:
            raise FitError("poisson rate must be non-negative")
        ints = _require_integers(xs, "poisson")
        if any(x < 0 for x in ints):
            raise FitError("poisson support is the non-negative integers")
        if lam == 0.0:
            if any(ints):
                raise FitError("poisson(0) puts no mass on positive values")
            return 0.0
        return math.fsum(
            x * math.log(lam) - lam - math.lgamma(x + 1) for x in ints)
    if family == "power-law":
        alpha = params["alpha"]
        x_min = int(params["x_min"])
        if alpha <= 1:
            raise FitError("power-law exponent must exceed 1")
        if x_min < 1:
            raise FitError("x_min must be a positive integer")
        ints = _require_integers(xs, "power-law")
        tail = [x for x in ints if x >= x_min]
        if not tail:
            raise FitError("no values at or above x_min")
        z = hurwitz_zeta(alpha, float(x_min))
        return (-alpha * math.fsum(math.log(x) for x in tail)
                - len(tail) * math.log(z))
    raise ValueError(f"unknown family {family!r}")


# --- Closed-form fits -------------------------------------------------------

def fit_exponential(sample: SampleLike) -> FitResult:
    """MLE rate 1/mean; SE = rate/sqrt(n); vcov = rate^2/n."""
    xs = _values(sample)
    n = len(xs)
    if n < 2:
        raise FitError("sample smaller than 2")
    if any(x < 0 for x in xs):
        raise FitError("exponential support is [0, inf)")
    mean = math.fsum(xs) / n
    if mean <= 0:
        raise FitError("all-zero sample has no exponential MLE")
    lam = 1.0 / mean
    se = lam / math.sqrt(n)
    params = {"lambda": lam}
    return FitResult("exponential", params, {"lambda": se},
                     ((lam * lam / n,),),
                     log_likelihood("exponential", params, xs), n)


def fit_normal(sample: SampleLike) -> FitResult:
    """MLE mean and sigma (denominator n); vcov = diag(s^2/n, s^2/2n)."""
    xs = _values(sample)
    n = len(xs)
    if n < 2:
        raise FitError("sample smaller than 2")
    mu = math.fsum(xs) / n
    var = math.fsum((x - mu) ** 2 for x in xs) / n
    if var == 0.0:
        raise FitError("constant sample: singular Fisher information")
    sigma = math.sqrt(var)
    params = {"mu": mu, "sigma": sigma}
    se = {"mu": sigma / math.sqrt(n), "sigma": sigma / math.sqrt(2.0 * n)}
    vcov = ((var / n, 0.0), (0.0, var / (2.0 * n)))
    return FitResult("normal", params, se, vcov,
                     log_likelihood("normal", params, xs), n)


def fit_poisson(sample: SampleLike) -> FitResult:
    """MLE rate = mean; SE = sqrt(rate/n); vcov = rate/n."""
    xs = _values(sample)
    n = len(xs)
    if n < 1:
        raise FitError("empty sample")
    ints = _require_integers(xs, "poisson")
    if any(x < 0 for x in ints):
        raise FitError("poisson support is the non-negative integers")
    lam = math.fsum(ints) / n
    params = {"lambda": lam}
    se = {"lambda": math.sqrt(lam / n)}
    return FitResult("poisson", params, se, ((lam / n,),),
                     log_likelihood("poisson", params, ints), n)


# --- Discrete power law -----------------------------------------------------

def _golden_max_alpha(neg_sum_log: float, n_tail: int, x_min: int) -> float:
    """Maximize l(alpha) = -alpha*sum(ln x) - n*ln zeta(alpha, x_min) on
    (1, ALPHA_MAX]. l is strictly concave (its second derivative is -n
    times the zeta-distribution variance of ln X), so golden-section
    search converges to the global maximum."""
    a_lo, a_hi = ALPHA_MIN, ALPHA_MAX
    inv_phi = (math.sqrt(5.0) - 1.0) / 2.0

    def ll(alpha: float) -> float:
        return (neg_sum_log * alpha
                - n_tail * math.log(hurwitz_zeta(alpha, float(x_min))))

    c = a_hi - inv_phi * (a_hi - a_lo)
    d = a_lo + inv_phi * (a_hi - a_lo)
    fc, fd = ll(c), ll(d)
    while a_hi - a_lo > ALPHA_TOL:
        if fc >= fd:
            a_hi, d, fd = d, c, fc
            c = a_hi - inv_phi * (a_hi - a_lo)
            fc = ll(c)
        else:
            a_lo, c, fc = c, d, fd
            d = a_lo + inv_phi * (a_hi - a_lo)
            fd = ll(d)
    return 0.5 * (a_lo + a_hi)


def _tail_ks_distance(counts: dict[int, int], n_tail: int, alpha: float,
                      x_min: int) -> float:
    """Max |empirical - fitted| tail CDF over observed tail values. The
    fitted CDF at v is 1 - zeta(alpha, v+1)/zeta(alpha, x_min)."""
    z0 = hurwitz_zeta(alpha, float(x_min))
    cum = 0
    worst = 0.0
    for v in sorted(counts):
        cum += counts[v]
        emp = cum / n_tail
        fit = 1.0 - hurwitz_zeta(alpha, float(v + 1)) / z0
        worst = max(worst, abs(emp - fit))
    return worst


def _fit_powerlaw_at(ints: tuple[int, ...], x_min: int):
    tail = [x for x in ints if x >= x_min]
    n_tail = len(tail)
    if n_tail < 2:
        raise FitError("tail smaller than 2 points")
    if all(x == x_min for x in tail):
        raise FitError("degenerate tail: all values equal x_min, "
                       "likelihood increases without bound")
    neg_sum_log = -math.fsum(math.log(x) for x in tail)
    alpha = _golden_max_alpha(neg_sum_log, n_tail, x_min)
    counts: dict[int, int] = {}
    for x in tail:
        counts[x] = counts.get(x, 0) + 1
    ks = _tail_ks_distance(counts, n_tail, alpha, x_min)
    return alpha, n_tail, ks


def fit_powerlaw(sample: SampleLike, x_min: int | None = None) -> FitResult:
    """Discrete power law p(x) = x^(-alpha) / zeta(alpha, x_min) on the
    tail {x >= x_min}.

    With ``x_min`` given, alpha alone is estimated. Otherwise every
    distinct positive sample value is tried as the tail start and the
    one minimizing the Kolmogorov-Smirnov distance between fitted and
    empirical tail CDFs wins (ties go to the smallest).

    SE(alpha) comes from the observed Fisher information
    n * (z''/z - (z'/z)^2) evaluated at the estimate; the scanned tail
    start carries no standard error.
    """
    xs = _values(sample)
    if not xs:
        raise FitError("empty sample")
    ints = _require_integers(xs, "power-law")
    if any(x < 0 for x in ints):
        raise FitError("negative degree in sample")

    if x_min is not None:
        if x_min < 1 or float(x_min) != int(x_min):
            raise FitError("x_min must be a positive integer")
        x_min = int(x_min)
        alpha, n_tail, _ = _fit_powerlaw_at(ints, x_min)
    else:
        distinct = sorted({x for x in ints if x >= 1})
        best: tuple[float, int, float] | None = None  # (ks, x_min, alpha)
        for candidate in distinct:
            remaining = [v for v in distinct if v >= candidate]
            if len(remaining) < 2:
                break  # larger candidates only shrink the tail further
            try:
                alpha_c, _, ks_c = _fit_powerlaw_at(ints, candidate)
            except FitError:
                continue
            if best is None or ks_c < best[0]:
                best = (ks_c, candidate, alpha_c)
        if best is None:
            raise FitError("no x_min candidate leaves a fittable tail")
        _, x_min, alpha = best
        n_tail = sum(1 for x in ints if x >= x_min)

    z, z1, z2 = hurwitz_zeta_derivatives(alpha, float(x_min))
    info = z2 / z - (z1 / z) ** 2  # variance of ln X under the fitted law
    se = 1.0 / math.sqrt(n_tail * info)
    params = {"x_min": x_min, "alpha": alpha}
    return FitResult("power-law", params, {"alpha": se}, ((se * se,),),
                     log_likelihood("power-law", params, ints), n_tail)


# --- Selection --------------------------------------------------------------

_FIT_FUNCTIONS = {
    "exponential": fit_exponential,
    "normal": fit_normal,
    "poisson": fit_poisson,
    "power-law": fit_powerlaw,
}


def fit_family(family: str, sample: SampleLike) -> FitResult:
    """Dispatch to the fitter for one family name."""
    try:
        fitter = _FIT_FUNCTIONS[family]
    except KeyError:
        raise ValueError(f"unknown family {family!r}") from None
    return fitter(sample)


def select_structure(fits: Iterable[FitResult], rule: str = "min-se") -> StructureClass:
    """Pick the family a degree sample most plausibly follows.

    min-se: smallest sum of parameter standard errors (the scale-mixing
    is deliberate; it is the comparison the reports are defined by).
    aic: smallest 2k - 2*loglik with k the number of parameters carrying
    a standard error. max-loglik: largest log-likelihood. Ties break by
    family order: exponential < normal < poisson < power-law, so the
    outcome never depends on the order of ``fits``.
    """
    fits = tuple(fits)
    if not fits:
        raise ValueError("empty fit list")
    if rule not in RULES:
        raise ValueError(f"unknown rule {rule!r}; expected one of {RULES}")

    def key(fit: FitResult) -> tuple[float, int]:
        rank = FAMILIES.index(fit.family)
        if rule == "min-se":
            return (math.fsum(fit.se.values()), rank)
        if rule == "aic":
            return (2.0 * len(fit.se) - 2.0 * fit.log_likelihood, rank)
        return (-fit.log_likelihood, rank)

    chosen = min(fits, key=key).family
    return StructureClass(chosen, rule, fits)
