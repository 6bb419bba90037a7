"""Chains the stages: algebra -> polarization -> chart -> limit -> orbit family."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .liealg import base_point, build, polarization
from .orbit import chart, orbit_space
from .scaling import exact_limit


@dataclass
class PipelineState:
    spec: Any
    algebra: Any
    functional: Any
    polarization: Any
    chart: Any
    limit: Any = None
    family: Any = None


def run(spec, validate=True, samples=4000, seed=0, upto="family"):
    g = build(spec)
    f0 = base_point(g)
    h = polarization(g, f0)
    ch = chart(g, h, f0)
    st = PipelineState(spec, g, f0, h, ch)
    if upto == "chart":
        return st
    st.limit = exact_limit(ch, validate=validate, samples=samples, seed=seed)
    if upto == "limit":
        return st
    st.family = orbit_space(st.limit.gbar, st.limit)
    return st
