"""Shared builders for tests."""

from syndcim.library import enumerate_configs
from syndcim.search import assemble
from syndcim.spec_model import MacroSpec


def base_designs(lib, H=16, W=16, mcr=1, precisions=None, freq=8e8, limit=None):
    from syndcim.spec_model import INT8

    spec = MacroSpec(H, W, mcr, tuple(precisions or (INT8,)), freq, freq)
    out = []
    for k, cfg in enumerate(enumerate_configs(spec, lib).configurations()):
        if limit is not None and k >= limit:
            break
        out.append(assemble(spec, lib, cfg))
    return out
