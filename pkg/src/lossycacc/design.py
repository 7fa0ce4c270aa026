"""End-to-end controller design for one platoon configuration."""

from __future__ import annotations

from dataclasses import dataclass

from lossycacc.lifting import LiftedModel, lift
from lossycacc.model import DiscreteModel, VehicleParams, discretize
from lossycacc.observer import ObserverGains, synthesize_uio
from lossycacc.stochastic import GainSet, dc_gain, expectation_matching_gains, f1_static_approx
from lossycacc.synthesis import NominalGains, min_gamma


@dataclass
class Design:
    model: DiscreteModel
    lifted: LiftedModel
    nominal: NominalGains
    gamma_star: float
    g: float
    observer: ObserverGains

    def gains_for(self, p: float) -> GainSet:
        """Switching gains for loss probability ``p`` with the static ``F1``."""
        F1 = f1_static_approx(self.nominal, self.g, p)
        return expectation_matching_gains(self.nominal, F1, p, g=self.g)


def design(params: VehicleParams, weights: tuple[float, float] = (0.1, 1.0), tol: float = 1e-3, gamma_hi: float = 100.0) -> Design:
    """Discretize, lift, minimize gamma, and build the observer."""
    model = discretize(params, weights)
    lifted = lift(model, params.d)
    gamma_star, nominal = min_gamma(lifted, tol=tol, gamma_hi=gamma_hi)
    g = dc_gain(nominal, lifted)
    return Design(model=model, lifted=lifted, nominal=nominal, gamma_star=gamma_star, g=g, observer=synthesize_uio(model))
