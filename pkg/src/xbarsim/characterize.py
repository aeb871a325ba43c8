"""Error characterization of crossbar VMM under selectable non-idealities.

Errors are per-column percentages ``100 * (i_ideal - i_nonideal) / denom``
where ``denom`` is the ideal current, or the ADC full scale when the ideal
current is within 1e-3 of full scale of zero. Positive values mean
attenuation.

Three ways to get non-ideal currents are used here:

* ``exact_currents``: exact circuit response through the reduced port model,
  with each DAC entered as its Thevenin source (fast; used by the sweeps).
* ``oracle_currents``: the same circuit solved node by node (ground truth).
* ``fcm_currents``: the fast model pipeline, DAC output computed per row
  against a fixed load conductance and then one vector-matrix product.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from . import converters as cv
from . import fcm, oracle
from .params import CrossbarParams

MASKS = {
    "IDEAL": frozenset(),
    "WIRE": frozenset({"wire"}),
    "SENSE": frozenset({"sense"}),
    "DAC+DRIVER": frozenset({"dac", "driver"}),
    "WIRE+SENSE": frozenset({"wire", "sense"}),
    "ALL": frozenset({"wire", "sense", "dac", "driver"}),
}
STATES = ("all_Gmin", "all_Gmax")


@dataclass(frozen=True)
class Setup:
    """A tile together with its converters."""

    params: CrossbarParams = field(default_factory=CrossbarParams)
    dac: cv.DacConfig | None = None
    adc: cv.AdcConfig | None = None
    load_mode: str = "row_sum"

    def __post_init__(self):
        if self.dac is None:
            object.__setattr__(self, "dac", cv.DacConfig.for_params(self.params))
        if self.adc is None:
            object.__setattr__(self, "adc", cv.AdcConfig.for_params(self.params, bits=12))

    def resized(self, size: int) -> "Setup":
        p = self.params.replace(rows=size, cols=size)
        adc = cv.AdcConfig(bits=self.adc.bits, i_full_scale=p.v_read * p.G_max * size,
                           offset=self.adc.offset)
        return dataclasses.replace(self, params=p, adc=adc)

    def masked(self, mask) -> tuple[CrossbarParams, cv.DacConfig | None]:
        """Zero every parasitic not named in ``mask``.

        Returns the array parameters (driver folded out) and the DAC config,
        or ``None`` for an ideal voltage source.
        """
        mask = MASKS[mask] if isinstance(mask, str) else frozenset(mask)
        p = self.params
        arr = p.replace(r_row=p.r_row if "wire" in mask else 0.0,
                        r_col=p.r_col if "wire" in mask else 0.0,
                        R_sense=p.R_sense if "sense" in mask else 0.0,
                        R_driver=p.R_driver if "driver" in mask else 0.0)
        if "dac" in mask:
            dac = dataclasses.replace(self.dac, include_driver="driver" in mask,
                                      r_driver=arr.R_driver)
        else:
            dac = None
        return arr, dac

    @property
    def i_full_scale(self) -> float:
        return self.adc.i_full_scale


def error_percent(i_ideal, i_nonideal, i_full_scale: float) -> np.ndarray:
    i_ideal = np.asarray(i_ideal, dtype=np.float64)
    denom = np.where(np.abs(i_ideal) > 1e-3 * i_full_scale, i_ideal, i_full_scale)
    return 100.0 * (i_ideal - np.asarray(i_nonideal)) / denom


def ideal_currents(g, codes, setup: Setup) -> np.ndarray:
    return setup.dac.ideal_voltage(codes) @ np.asarray(g)


def _sources(codes, arr: CrossbarParams, dac, setup: Setup):
    """Open-circuit source voltage and series resistance per row."""
    if dac is None:
        v = setup.dac.ideal_voltage(codes)
        return v, np.full(v.shape, arr.R_driver)
    return cv.thevenin(codes, dac)


def exact_currents(g, codes, setup: Setup, mask="ALL", *, model=None) -> np.ndarray:
    """Exact sense currents; ``codes`` is (M,) or (batch, M).

    ``model`` may carry a precomputed ``(g_non_ideal, y_port)`` for the
    masked array so that input sweeps reuse one reduction.
    """
    arr, dac = setup.masked(mask)
    g_ni, y_port = fcm.port_model(g, arr) if model is None else model
    codes = np.asarray(codes)
    v_th, r_th = _sources(codes, arr, dac, setup)
    m = arr.rows
    # KCL at the ports: (I + diag(r_th) Y) Va = v_th
    a = np.eye(m) + r_th[..., :, None] * y_port
    va = np.linalg.solve(a, v_th[..., None])[..., 0]
    return va @ g_ni


def oracle_currents(g, codes, setup: Setup, mask="ALL") -> np.ndarray:
    arr, dac = setup.masked(mask)
    v_th, r_th = _sources(np.asarray(codes), arr, dac, setup)
    sys = oracle.assemble(arr, g, r_driver=r_th)
    return oracle.solve(sys, v_th).i_out


def fcm_currents(xbar: fcm.NonIdealCrossbar, codes, setup: Setup, mask="ALL",
                 load_mode: str | None = None) -> np.ndarray:
    _, dac = setup.masked(mask)
    if dac is None:
        arr = xbar.params
        v = setup.dac.ideal_voltage(codes)
        if arr.R_driver > 0:
            raise ValueError("a series driver without the DAC model is not representable in FCM")
    else:
        v = cv.dac_convert(codes, fcm.row_load(xbar, load_mode or setup.load_mode), dac)
    return fcm.evaluate(xbar, v)


def random_state(params: CrossbarParams, rng: np.random.Generator) -> np.ndarray:
    """Each device uniform over its programmable levels."""
    lv = rng.integers(0, params.levels, params.shape)
    return params.G_min + lv / (params.levels - 1) * (params.G_max - params.G_min)


def random_codes(dac: cv.DacConfig, shape, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, dac.max_code + 1, shape)


def uniform_state(params: CrossbarParams, state: str) -> np.ndarray:
    if state == "all_Gmin":
        return np.full(params.shape, params.G_min)
    if state == "all_Gmax":
        return np.full(params.shape, params.G_max)
    raise ValueError(f"unknown state {state!r}; expected one of {STATES}")


def column_error(g, codes, setup: Setup, mask="ALL") -> np.ndarray:
    i_id = ideal_currents(g, codes, setup)
    return error_percent(i_id, exact_currents(g, codes, setup, mask), setup.i_full_scale)


def sweep_dimension(setup: Setup, sizes=(8, 16, 32, 64), states=STATES,
                    masks=("WIRE", "SENSE", "DAC+DRIVER", "WIRE+SENSE", "ALL"),
                    code: int | None = None) -> list[dict]:
    """Last-column error per size, uniform state and non-ideality subset.

    Every row is driven with the same code (full scale by default).
    """
    rows = []
    for size in sizes:
        s = setup.resized(size)
        c = np.full(size, s.dac.max_code if code is None else code)
        for state in states:
            g = uniform_state(s.params, state)
            for mask in masks:
                eps = column_error(g, c, s, mask)
                rows.append({"size": size, "state": state, "mask": mask,
                             "error_last": float(eps[-1])})
    return rows


def _stats(eps: np.ndarray) -> dict:
    return {"max": eps.max(axis=0), "min": eps.min(axis=0), "avg": eps.mean(axis=0)}


def trial_rngs(seed: int, n: int) -> list[np.random.Generator]:
    """One independent generator per trial, fixed by (seed, trial index)."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n)]


def sweep_states(setup: Setup, size: int = 64, n_states: int = 1000, codes=None,
                 seed: int = 0, mask="ALL") -> dict:
    """Per-column error statistics over random device states at a fixed input."""
    s = setup.resized(size)
    rng = np.random.default_rng(seed)
    if codes is None:
        codes = random_codes(s.dac, size, rng)
    eps = np.empty((n_states, size))
    for k, r in enumerate(trial_rngs(seed + 1, n_states)):
        eps[k] = column_error(random_state(s.params, r), codes, s, mask)
    out = _stats(eps)
    out["sample"] = eps[0].copy()
    out["errors"] = eps
    out["codes"] = np.asarray(codes)
    return out


def sweep_inputs(setup: Setup, size: int = 64, n_inputs: int = 1000, g=None,
                 seed: int = 0, mask="ALL") -> dict:
    """Per-column error statistics over random inputs at a fixed device state."""
    s = setup.resized(size)
    rng = np.random.default_rng(seed)
    if g is None:
        g = random_state(s.params, rng)
    arr, _ = s.masked(mask)
    model = fcm.port_model(g, arr)
    codes = np.stack([random_codes(s.dac, size, r) for r in trial_rngs(seed + 1, n_inputs)])
    i_id = ideal_currents(g, codes, s)
    eps = error_percent(i_id, exact_currents(g, codes, s, mask, model=model), s.i_full_scale)
    out = _stats(eps)
    out["errors"] = eps
    out["state"] = g
    return out


def monte_carlo_variation(setup: Setup, size: int = 64, n_samples: int = 10_000,
                          cfg: cv.VariationConfig | None = None, g=None, codes=None,
                          seed: int = 0, mask="ALL") -> dict:
    """Per-column error statistics over conductance-variation samples.

    The nominal state and input are fixed; sample ``k`` draws its variation
    from its own seed spawned from ``cfg.seed``. The error is taken against
    the ideal output of the nominal (programmed) state.
    """
    cfg = cfg or cv.VariationConfig()
    s = setup.resized(size)
    rng = np.random.default_rng(seed)
    if g is None:
        g = random_state(s.params, rng)
    if codes is None:
        codes = random_codes(s.dac, size, rng)
    i_id = ideal_currents(g, codes, s)
    eps = np.empty((n_samples, size))
    for k, r in enumerate(trial_rngs(cfg.seed, n_samples)):
        gv = cv.apply_variation(g, cfg, s.params, rng=r)
        eps[k] = error_percent(i_id, exact_currents(gv, codes, s, mask), s.i_full_scale)
    out = _stats(eps)
    out["errors"] = eps
    return out


def fidelity_compare(setup: Setup, size: int = 64, trials: int = 40, seed: int = 0,
                     use_adc: bool = True) -> dict:
    """Deviation of FCM and of a constant-error model from the circuit oracle.

    Each trial draws a random state and input. The constant model's per-size
    error is the mean oracle error over the first half of the trials
    (calibration split); both models are scored on the second half. With
    ``use_adc`` every current passes through the ADC before the error is
    taken. Deviations are absolute differences of error percentages.
    """
    s = setup.resized(size)
    eps_o, eps_f, eps_f_alt = [], [], []
    alt_mode = "exact" if s.load_mode == "row_sum" else "row_sum"
    for r in trial_rngs(seed, trials):
        g = random_state(s.params, r)
        codes = random_codes(s.dac, size, r)
        arr, _ = s.masked("ALL")
        i_id = ideal_currents(g, codes, s)
        i_or = oracle_currents(g, codes, s, "ALL")
        xbar = fcm.build_nonideal(g, arr)
        i_f = fcm_currents(xbar, codes, s, "ALL")
        i_alt = fcm_currents(xbar, codes, s, "ALL", load_mode=alt_mode)
        if use_adc:
            i_or, i_f, i_alt = (cv.adc_reconstruct(cv.adc_convert(i, s.adc), s.adc)
                                for i in (i_or, i_f, i_alt))
        eps_o.append(error_percent(i_id, i_or, s.i_full_scale))
        eps_f.append(error_percent(i_id, i_f, s.i_full_scale))
        eps_f_alt.append(error_percent(i_id, i_alt, s.i_full_scale))
    eps_o, eps_f, eps_f_alt = map(np.array, (eps_o, eps_f, eps_f_alt))
    half = trials // 2
    k_n = float(eps_o[:half].mean())
    held = slice(half, trials)
    return {
        "size": size,
        "trials": trials,
        "baseline_k": k_n / 100.0,
        "fcm_max_dev": float(np.abs(eps_f[held] - eps_o[held]).max()),
        "baseline_max_dev": float(np.abs(k_n - eps_o[held]).max()),
        f"fcm_{alt_mode}_load_max_dev": float(np.abs(eps_f_alt[held] - eps_o[held]).max()),
        "oracle_mean_error": float(eps_o.mean()),
    }


def array_fidelity(params: CrossbarParams, trials: int = 10, seed: int = 0) -> float:
    """Largest FCM-vs-oracle error deviation (percent) with ideal converters."""
    setup = Setup(params=params)
    arr = params.replace(R_driver=0.0)
    worst = 0.0
    for r in trial_rngs(seed, trials):
        g = random_state(params, r)
        v = r.uniform(0, params.v_read, params.rows)
        i_id = v @ g
        i_or = oracle.solve(oracle.assemble(arr, g), v).i_out
        i_f = fcm.evaluate(fcm.build_nonideal(g, arr), v)
        dev = np.abs(error_percent(i_id, i_f, setup.i_full_scale)
                     - error_percent(i_id, i_or, setup.i_full_scale)).max()
        worst = max(worst, float(dev))
    return worst
