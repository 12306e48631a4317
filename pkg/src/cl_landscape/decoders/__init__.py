from .base import DecodeOptions, DecodeResult
from .greedy import clompr, clompr_multi, trial_options
from .genetic import GeneticOptions, fitness, geneticl
from .optim import MinimizeResult, local_minimize, nnls, nnls_weights

__all__ = [
    "DecodeOptions",
    "DecodeResult",
    "GeneticOptions",
    "MinimizeResult",
    "clompr",
    "clompr_multi",
    "decode",
    "fitness",
    "geneticl",
    "local_minimize",
    "nnls",
    "nnls_weights",
    "trial_options",
]


def decode(name: str, z, freqs, opts: DecodeOptions, gopts: GeneticOptions | None = None) -> DecodeResult:
    """Dispatch by decoder name: ``clompr``, ``clomprx<T>`` or ``geneticl``."""
    from ..errors import ParameterError

    name = name.lower()
    if name == "clompr":
        return clompr(z, freqs, opts)
    if name.startswith("clomprx"):
        try:
            trials = int(name[len("clomprx"):])
        except ValueError:
            raise ParameterError(f"bad decoder name {name!r}") from None
        return clompr_multi(z, freqs, opts.replace(trials=trials))
    if name == "geneticl":
        return geneticl(z, freqs, opts, gopts)
    raise ParameterError(f"unknown decoder {name!r}; expected clompr, clomprx<T> or geneticl")
