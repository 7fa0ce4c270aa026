from functools import lru_cache

from lossycacc.design import design
from lossycacc.model import VehicleParams


@lru_cache(maxsize=None)
def default_design():
    """Design for the default parameters; cached because synthesis takes seconds."""
    return design(VehicleParams())
