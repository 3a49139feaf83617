"""Classification of warped products.

The engine never proves anything about the fiber; fiber curvature bounds
enter as attestations and are only compared against what each route needs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

from .analysis import ConcavityReport, affine_residual, check_fK_concavity, pythagorean_residual
from .fiber import FiberSpace, RCDAttestation
from .warp import BaseSpace, WarpFunction

AFFINE_TOL = 1e-8

ROUTES = ("Thm1_sufficient", "Thm2_item3", "Thm2_item4", "Thm6_iff")


@dataclass(frozen=True)
class RCD:
    K: float
    N: float
    subject: str = "product"  # "product" or "fiber"

    def __str__(self):
        return f"RCD({self.K:g}, {self.N:g}) for the {self.subject}"


@dataclass
class Verdict:
    conclusion: Optional[RCD]
    route: str
    hypothesis_trace: list = field(default_factory=list)
    K_F: float = math.nan

    @property
    def inconclusive(self):
        return self.conclusion is None

    def to_dict(self):
        c = None
        if self.conclusion is not None:
            c = {"K": self.conclusion.K, "N": self.conclusion.N, "subject": self.conclusion.subject}
        return {
            "route": self.route,
            "conclusion": "Inconclusive" if c is None else c,
            "K_F": self.K_F,
            "hypothesis_trace": [{"hypothesis": h, "pass": ok} for h, ok in self.hypothesis_trace],
        }


def _fiber_hypothesis(att: Optional[RCDAttestation], K_req, N_req, slack=1e-12):
    name = f"fiber RCD({K_req:g}, {N_req:g}) attested"
    if att is None:
        return [(name, False)]
    return [
        (name, att.implies(K_req, N_req, slack)),
        ("fiber attestation verified", bool(att.verified)),
        ("fiber compact", bool(att.compact)),
        ("fiber geodesic", bool(att.geodesic)),
    ]


def _diameter_clause(N, K_F, fiber: Optional[FiberSpace]):
    """The clause diam_F <= pi sqrt((N-1)/K_F) for N = 1, K_F > 0, evaluated literally."""
    if not (N == 1 and K_F > 0):
        return []
    bound = math.pi * math.sqrt((N - 1) / K_F)
    ok = fiber is not None and fiber.diameter <= bound
    return [(f"diam_F <= pi*sqrt((N-1)/K_F) = {bound:g} (N=1, K_F>0)", ok)]


def is_fK_affine(B: BaseSpace, f: WarpFunction, K_F: float):
    if affine_residual(B, f) > AFFINE_TOL:
        return False
    if f.is_sampled:
        return True
    scale = max(1.0, abs(K_F))
    return pythagorean_residual(B, f, K_F) <= AFFINE_TOL * scale


def classify_rcd(
    B: BaseSpace,
    f: WarpFunction,
    N: float,
    fiber: Optional[FiberSpace] = None,
    attestation: Optional[RCDAttestation] = None,
    assume_product_rcd: bool = False,
    report: Optional[ConcavityReport] = None,
):
    """Apply the sufficiency, necessity and fK-affine rules.

    With ``assume_product_rcd`` the product is taken to satisfy
    RCD(KN, N+1) and the verdict states what follows for the fiber.
    Otherwise the verdict states RCD(KN, N+1) for the product when every
    hypothesis on the chosen route passes.
    """
    if attestation is None and fiber is not None:
        attestation = fiber.rcd
    rep = report if report is not None else check_fK_concavity(B, f)
    K, K_F = f.K, rep.K_F
    conc = ("f is fK-concave", rep.is_fK_concave)
    bnd = ("df/dn >= 0 on the boundary outside the zero set", rep.boundary_ok)

    if assume_product_rcd:
        trace = [(f"product RCD({K * N:g}, {N + 1:g}) attested", True),
                 (conc[0] + " (implied)", conc[1]), (bnd[0] + " (implied)", bnd[1])]
        ok = conc[1] and bnd[1]
        if K_F >= 0:
            route, out = "Thm2_item3", RCD(K_F * (N - 1), N, "fiber")
            trace += [(name + " (implied)", True) for name, _ in _diameter_clause(N, K_F, fiber)]
        else:
            route, out = "Thm2_item4", RCD(K_F * N, N + 1, "fiber")
        return Verdict(out if ok else None, route, trace, K_F)

    affine = is_fK_affine(B, f, K_F)
    if affine and rep.boundary_ok:
        route = "Thm6_iff"
        trace = [("f'' + K f = 0", True), bnd]
    else:
        route = "Thm1_sufficient"
        trace = [conc, bnd]
    # K_F is a lattice sup, so it carries the concavity tolerance
    slack = rep.tolerance * max(1.0, abs(K_F)) * max(1.0, N - 1)
    trace += _fiber_hypothesis(attestation, K_F * (N - 1), N, slack)
    trace += _diameter_clause(N, K_F, fiber)
    ok = all(p for _, p in trace)
    return Verdict(RCD(K * N, N + 1, "product") if ok else None, route, trace, K_F)
