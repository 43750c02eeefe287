"""Convergence-rate classification of error sequences.

The rules, applied in order to the usable prefix (values above the 1e-14
machine floor):

  quadratic:   the last three ratios e_{k+1}/e_k^2 agree within a factor of
               ten and the final ratio e_{k+1}/e_k has dropped below 1e-2;
  superlinear: the ratios e_{k+1}/e_k decrease monotonically over the tail
               window and at least halve across it, without the quadratic
               band;
  linear(rho): the tail ratios stay inside [rho/2, 2*rho] around their
               geometric mean rho in (0, 1);
  none:        anything else, including too few usable points.

A final error below 1e-12 whose squared-ratio breaks the band is dropped once
and the test retried: at that magnitude the stored error is dominated by the
floating-point floor, not by the contraction.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FLOOR = 1e-14
CONTAMINATION_LEVEL = 1e-12
QUAD_BAND = 10.0
QUAD_FINAL_RATIO = 1e-2


@dataclass(frozen=True)
class RateVerdict:
    classification: str  # "quadratic" | "superlinear" | "linear" | "none"
    rho: float | None = None
    constants: dict = field(default_factory=dict)
    iterations_used: int = 0
    reason: str = ""

    def to_dict(self):
        return {"classification": self.classification, "rho": self.rho,
                "constants": {k: float(v) for k, v in self.constants.items()},
                "iterations_used": self.iterations_used, "reason": self.reason}


def _usable_prefix(errors):
    out = []
    for e in errors:
        if not np.isfinite(e) or e <= FLOOR:
            break
        out.append(float(e))
    return out


def _try_quadratic(errs):
    r = [errs[i + 1] / errs[i] for i in range(len(errs) - 1)]
    q = [errs[i + 1] / errs[i] ** 2 for i in range(len(errs) - 1)]
    if len(q) < 3:
        return None
    tail = q[-3:]
    if min(tail) <= 0:
        return None
    if max(tail) / min(tail) <= QUAD_BAND and r[-1] < QUAD_FINAL_RATIO:
        c = float(np.exp(np.mean(np.log(tail))))
        return RateVerdict("quadratic", constants={"c_quad": c},
                           iterations_used=len(errs))
    return None


def classify_rate(errors) -> RateVerdict:
    """Classify a positive error sequence; deterministic in its input."""
    errors = [float(e) for e in errors]
    if len(errors) < 4:
        return RateVerdict("none", reason="fewer than 4 error values")
    errs = _usable_prefix(errors)
    if len(errs) < 4:
        return RateVerdict("none", reason="too few usable points above the floor",
                           iterations_used=len(errs))

    verdict = _try_quadratic(errs)
    if verdict is None and errs[-1] < CONTAMINATION_LEVEL and len(errs) >= 5:
        # The final stored error sits at the floating-point floor; its squared
        # ratio carries no rate information.
        verdict = _try_quadratic(errs[:-1])
    if verdict is not None:
        return verdict

    r = [errs[i + 1] / errs[i] for i in range(len(errs) - 1)]
    window = min(len(r), 4)
    tail = r[-window:]
    decreasing = all(tail[i + 1] < tail[i] for i in range(len(tail) - 1))
    if window >= 3 and decreasing and tail[-1] <= 0.5 * tail[0]:
        return RateVerdict("superlinear", constants={"final_ratio": tail[-1]},
                           iterations_used=len(errs))

    lin_tail = r[-min(len(r), 10):]
    rho = float(np.exp(np.mean(np.log(lin_tail)))) if min(lin_tail) > 0 else None
    if rho is not None and 0.0 < rho < 1.0 \
            and all(rho / 2 <= v <= 2 * rho for v in lin_tail):
        return RateVerdict("linear", rho=rho, constants={"rho": rho},
                           iterations_used=len(errs))
    return RateVerdict("none", reason="no stable ratio pattern",
                       iterations_used=len(errs))
