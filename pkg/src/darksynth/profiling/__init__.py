"""Statistical profiling of signal-independent noise."""

from .gmm import GmmFit, fit_gmm
from .noise import DisentangledNoise, QqReport, disentangle, qq_compare, resample
from .tukey import TukeyLambdaFit, fit_tukey_lambda, ppcc, tukey_cdf, tukey_pdf, tukey_ppf


def fit_from_dict(d: dict):
    """Rebuild a persisted fit (``fit.json``)."""
    kind = d.get("model")
    if kind == "tukey":
        return TukeyLambdaFit.from_dict(d)
    if kind == "gmm":
        return GmmFit.from_dict(d)
    raise ValueError(f"unknown model {kind!r}")


__all__ = [
    "DisentangledNoise",
    "GmmFit",
    "QqReport",
    "TukeyLambdaFit",
    "disentangle",
    "fit_from_dict",
    "fit_gmm",
    "fit_tukey_lambda",
    "ppcc",
    "qq_compare",
    "resample",
    "tukey_cdf",
    "tukey_pdf",
    "tukey_ppf",
]
