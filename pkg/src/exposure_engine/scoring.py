"""Likelihood scoring: exponent formula, prospect-theory weighting, legacy product.

The central score is

    raw = E^a * M^b / (max(T, eps)^c * max(U, eps)^d)

with tunable positive exponents and a small denominator floor, reported
alongside the display transform bounded = raw / (1 + raw) in [0, 1).

Perceived risk applies the cumulative-prospect-theory value function with the
standard probability weighting

    pi(p) = p^g / (p^g + (1 - p)^g)^(1/g)

whose default g = 0.61 overweights small probabilities and underweights large
ones. The losses branch uses |x|^beta: the textbook form, since a negative
base with fractional exponent is undefined.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from .errors import DocumentSyntaxError, DomainError, RangeError, SchemaError
from .metrics import VariableScores


@dataclass(frozen=True)
class CptParams:
    alpha: float = 0.88
    beta: float = 0.88
    loss_aversion: float = 2.25
    gamma_weight: float = 0.61

    def __post_init__(self):
        if not 0.0 < self.alpha <= 1.0 or not 0.0 < self.beta <= 1.0:
            raise DomainError("CPT alpha and beta must lie in (0, 1]")
        if self.loss_aversion < 1.0:
            raise DomainError("loss aversion must be >= 1")
        if not 0.0 < self.gamma_weight <= 1.0:
            raise DomainError("gamma must lie in (0, 1]")


@dataclass(frozen=True)
class LikelihoodParams:
    exp_e: float = 1.0
    exp_m: float = 1.0
    exp_t: float = 1.0
    exp_u: float = 1.0
    floor_epsilon: float = 0.01

    def __post_init__(self):
        for name in ("exp_e", "exp_m", "exp_t", "exp_u"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive")
        if not 0.0 < self.floor_epsilon <= 0.1:
            raise DomainError("floor_epsilon must lie in (0, 0.1]")


@dataclass(frozen=True)
class Contributions:
    e_factor: float
    m_factor: float
    t_factor: float
    u_factor: float


@dataclass(frozen=True)
class LikelihoodResult:
    raw: float
    bounded: float
    contributions: Contributions


@dataclass(frozen=True)
class IsunfFactors:
    impact: float
    stability: float
    uniqueness: float
    network: float
    factors: float

    def __post_init__(self):
        for name, value in self.__dict__.items():
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1]")


@dataclass(frozen=True)
class RiskValue:
    perceived: float
    objective_impact: float
    weighted_probability: float


def probability_weight(p: float, gamma_weight: float) -> float:
    """pi(p) = p^g / (p^g + (1-p)^g)^(1/g), exact at the endpoints."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must lie in [0, 1], got {p!r}")
    if not 0.0 < gamma_weight <= 1.0:
        raise DomainError(f"gamma must lie in (0, 1], got {gamma_weight!r}")
    if p == 0.0:
        return 0.0
    if p == 1.0:
        return 1.0
    pg = p**gamma_weight
    qg = (1.0 - p) ** gamma_weight
    return pg / (pg + qg) ** (1.0 / gamma_weight)


def prospect_value(x: float, p: float, params: CptParams = CptParams()) -> RiskValue:
    """Perceived value of impact ``x`` at probability ``p``.

    Gains: pi(p) * x^alpha. Losses: -lambda * pi(p) * |x|^beta.
    """
    weighted = probability_weight(p, params.gamma_weight)
    if x >= 0:
        perceived = weighted * x**params.alpha
    else:
        perceived = -params.loss_aversion * weighted * abs(x) ** params.beta
    return RiskValue(perceived=perceived, objective_impact=x, weighted_probability=weighted)


def likelihood(scores: VariableScores, params: LikelihoodParams = LikelihoodParams()) -> LikelihoodResult:
    """Exponent-formula likelihood with floored denominator.

    raw is exactly 0 when E or M is 0; bounded = raw / (1 + raw).
    """
    e_factor = scores.E**params.exp_e
    m_factor = scores.M**params.exp_m
    t_factor = max(scores.T, params.floor_epsilon) ** params.exp_t
    u_factor = max(scores.U, params.floor_epsilon) ** params.exp_u
    raw = e_factor * m_factor / (t_factor * u_factor)
    return LikelihoodResult(
        raw=raw,
        bounded=raw / (1.0 + raw),
        contributions=Contributions(e_factor, m_factor, t_factor, u_factor),
    )


def isunf_likelihood(factors: IsunfFactors) -> float:
    """Legacy product scorer: impact x stability x uniqueness x network x factors."""
    return factors.impact * factors.stability * factors.uniqueness * factors.network * factors.factors


def risk_value(impact: float, likelihood_result: LikelihoodResult, params: CptParams = CptParams()) -> RiskValue:
    """Perceived risk of ``impact`` at the bounded likelihood."""
    return prospect_value(impact, likelihood_result.bounded, params)


def load_params(data: bytes) -> tuple[CptParams, LikelihoodParams]:
    """Parameter file: {"cpt": {...}, "likelihood": {...}}; defaults fill gaps."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        if isinstance(exc, json.JSONDecodeError):
            raise DocumentSyntaxError(f"malformed JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
        raise DocumentSyntaxError(f"parameter file is not UTF-8: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("parameter file must be a JSON object")
    unknown = set(doc) - {"cpt", "likelihood"}
    if unknown:
        raise SchemaError(f"parameter file: unknown fields {sorted(unknown)}")

    cpt_doc = doc.get("cpt", {})
    if not isinstance(cpt_doc, dict) or set(cpt_doc) - {"alpha", "beta", "lambda", "gamma"}:
        raise SchemaError("cpt section accepts alpha, beta, lambda, gamma")
    lik_doc = doc.get("likelihood", {})
    lik_fields = {"exp_e", "exp_m", "exp_t", "exp_u", "floor_epsilon"}
    if not isinstance(lik_doc, dict) or set(lik_doc) - lik_fields:
        raise SchemaError(f"likelihood section accepts {sorted(lik_fields)}")

    def number(section: dict, key: str, default: float) -> float:
        value = section.get(key, default)
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise RangeError(f"parameter {key} must be a number")
        return float(value)

    try:
        cpt = CptParams(
            alpha=number(cpt_doc, "alpha", 0.88),
            beta=number(cpt_doc, "beta", 0.88),
            loss_aversion=number(cpt_doc, "lambda", 2.25),
            gamma_weight=number(cpt_doc, "gamma", 0.61),
        )
        lik = LikelihoodParams(
            exp_e=number(lik_doc, "exp_e", 1.0),
            exp_m=number(lik_doc, "exp_m", 1.0),
            exp_t=number(lik_doc, "exp_t", 1.0),
            exp_u=number(lik_doc, "exp_u", 1.0),
            floor_epsilon=number(lik_doc, "floor_epsilon", 0.01),
        )
    except DomainError as exc:
        raise RangeError(str(exc)) from exc
    return cpt, lik
