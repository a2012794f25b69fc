"""Kernel backend selection.

The hot oracles (rollout, constraint stacking, penalized cost/gradient) are
implemented twice: a Cython extension ``cnmpc._core`` built at install time
and a NumPy fallback ``cnmpc._core_np``. The compiled core is picked when
importable; set ``CNMPC_PURE_PYTHON=1`` to force the fallback, or call
:func:`set_backend` at runtime (used by the backend-comparison benchmark
and the equivalence tests).
"""

from __future__ import annotations

import os

from . import _core_np

_impl = _core_np
_name = "numpy"

if os.environ.get("CNMPC_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _core as _compiled

        _impl = _compiled
        _name = "cython"
    except ImportError:
        pass


def available_backends() -> dict:
    """Name -> implementation module, for everything importable here."""
    out = {"numpy": _core_np}
    try:
        from . import _core as _compiled

        out["cython"] = _compiled
    except ImportError:
        pass
    return out


def backend() -> str:
    return _name


def set_backend(name: str) -> None:
    global _impl, _name
    impls = available_backends()
    if name not in impls:
        raise ValueError(f"backend {name!r} not available (have {sorted(impls)})")
    _impl = impls[name]
    _name = name


def rollout(x0, u, dt, model):
    return _impl.rollout(x0, u, dt, model)


def constraint_values(states, u, prev_u, obstacles, r_safety, margin_z,
                      dphi_max, dtheta_max):
    return _impl.constraint_values(states, u, prev_u, obstacles, r_safety,
                                   margin_z, dphi_max, dtheta_max)


def penalized_value_grad(x0, u, prev_u, x_ref, u_ref, q_x, q_u, q_du,
                         obstacles, r_safety, margin_z, dphi_max, dtheta_max,
                         model, dt, c):
    return _impl.penalized_value_grad(x0, u, prev_u, x_ref, u_ref, q_x, q_u,
                                      q_du, obstacles, r_safety, margin_z,
                                      dphi_max, dtheta_max, model, dt, c)


constraint_count = _core_np.constraint_count
