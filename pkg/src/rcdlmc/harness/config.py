"""Experiment configuration: YAML schema, presets and validation.

Schema (all keys optional unless marked)::

    preset:    example1 | example2 | example3_gaussian | example3_cosine
               | counterexample | custom            (default custom)
    scale:     desk | paper                          (preset size, default desk)
    algorithm: OLMC | ULMC | RCD_O | ... or a list  (required for custom)
    target:    {kind: gaussian | mixture | glm, d: int, params: {...}}
               (required for custom)
    h:         float     or   h_list: [float, ...]  (one of them required for custom)
    gamma:     float      underdamped friction scale, default 1/L
    tau:       int        SVRG epoch length, default d
    M:         int        steps, default ceil(20 / (rate h)) per h, where rate is
                          the relaxation rate of the sampler's dynamics
    N:         int        chains
    seed:      int
    phi:       x1_squared | first10_squared | mean_square
    selection: [p_1, ..., p_d]   coordinate probabilities, default uniform
    init:      {x_mean, x_std, v_mean, v_std}
    stride:    int        trace stride, default about M / 200
    out:       path       CSV output

Target ``params``: gaussian ``{center}``, mixture ``{offset}``, glm
``{noise_model, count, seed, x_true}``.
"""

from __future__ import annotations

import math
import re
from dataclasses import asdict, dataclass, field, replace

import yaml

from ..kernels import ALGORITHMS, InitSpec
from ..metrics import TEST_FUNCTIONS

__all__ = ["ConfigError", "ExperimentSpec", "PRESETS", "parse_config", "dump_config", "preset_spec"]

KEYS = {
    "preset", "scale", "algorithm", "target", "h", "h_list", "gamma", "tau", "M", "N",
    "seed", "phi", "selection", "init", "stride", "out",
}
TARGET_KEYS = {"kind", "d", "params"}
TARGET_PARAMS = {
    "gaussian": {"center"},
    "mixture": {"offset"},
    "glm": {"noise_model", "count", "seed", "x_true"},
}
INIT_KEYS = {"x_mean", "x_std", "v_mean", "v_std"}
DEFAULT_PARAMS = {
    "gaussian": {"center": 0.0},
    "mixture": {"offset": 2.0},
    "glm": {"noise_model": "gaussian", "count": 100, "seed": 0, "x_true": 1.0},
}

VR_SIX = ("RCD_O", "SVRG_O", "RCAD_O", "RCD_U", "SVRG_U", "RCAD_U")
DYADIC = (0.32, 0.16, 0.08, 0.04, 0.02)


class _Loader(yaml.SafeLoader):
    """Safe loader that also reads ``1e-4`` (no dot) as a float."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(
        r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
        |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
        |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
        |[-+]?\.(?:inf|Inf|INF)
        |\.(?:nan|NaN|NAN))$""",
        re.X,
    ),
    list("-+0123456789."),
)


class ConfigError(ValueError):
    """Invalid configuration; the message lists every problem found."""


@dataclass(frozen=True)
class ExperimentSpec:
    preset: str
    algorithms: tuple
    target: dict
    h_list: tuple
    N: int
    seed: int = 0
    phi: str = "x1_squared"
    gamma: float | None = None
    tau: int | None = None
    M: int | None = None
    selection: tuple | None = None
    init: InitSpec = field(default_factory=InitSpec)
    stride: int | None = None
    out: str | None = None
    scale: str = "desk"

    @property
    def d(self):
        return int(self.target["d"])

    def steps_for(self, h, mu=1.0):
        """``M`` if set, otherwise enough steps to reach ``m·h = 20/mu``.

        ``mu`` is the relaxation rate of the dynamics being run.
        """
        if self.M is not None:
            return self.M
        return int(math.ceil(20.0 / (mu * h) - 1e-9))

    def stride_for(self, M):
        if self.stride is not None:
            return self.stride
        return max(1, M // 200)


def _glm(noise, d, n_desk, n_full):
    return {
        "target": {"kind": "glm", "d": d, "params": {"noise_model": noise, "count": 100, "seed": 0, "x_true": 1.0}},
        "algorithm": list(VR_SIX),
        "phi": "first10_squared",
        "gamma": 1.0,
        "init": {"x_mean": 0.0, "x_std": 1.0, "v_mean": 0.0, "v_std": 1.0},
        "desk": {"N": n_desk, "h_list": [2e-4, 1e-4, 5e-5]},
        "paper": {"N": n_full, "h_list": [2e-4, 1e-4, 5e-5, 2.5e-5]},
    }


# preset -> shared keys plus per-scale overrides
PRESETS = {
    "example1": {
        "target": {"kind": "gaussian", "params": {"center": 0.0}},
        "algorithm": list(VR_SIX),
        "phi": "x1_squared",
        "init": {"x_mean": 0.5, "x_std": 1.0, "v_mean": 0.5, "v_std": 1.0},
        "desk": {"d": 50, "N": 200_000, "h_list": list(DYADIC)},
        "paper": {"d": 1000, "N": 500_000, "h_list": [h / 20 for h in DYADIC]},
    },
    "example2": {
        "target": {"kind": "mixture", "params": {"offset": 2.0}},
        "algorithm": list(VR_SIX),
        "phi": "x1_squared",
        "gamma": 1.0,
        "init": {"x_mean": 0.0, "x_std": 1.0, "v_mean": 0.0, "v_std": 1.0},
        "desk": {"d": 50, "N": 200_000, "h_list": list(DYADIC)},
        "paper": {"d": 1000, "N": 1_000_000, "h_list": [h / 20 for h in DYADIC]},
    },
    "example3_gaussian": _glm("gaussian", 100, 1000, 1_000_000),
    "example3_cosine": _glm("cosine_perturbed", 100, 1000, 1_000_000),
    "counterexample": {
        "target": {"kind": "gaussian", "params": {"center": 0.0}},
        "algorithm": ["RCD_U"],
        "phi": "mean_square",
        "gamma": 1.0,
        "init": {"x_mean": 0.125, "x_std": 1.0, "v_mean": 0.0, "v_std": 1.0},
        "desk": {"d": 40, "N": 4000, "h_list": [1e-3]},
        "paper": {"d": 2000, "N": 10_000, "h_list": [2e-10]},
    },
}
for _name in ("example3_gaussian", "example3_cosine"):
    for _scale in ("desk", "paper"):
        PRESETS[_name][_scale]["d"] = 100


def _preset_doc(name, scale):
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(PRESETS) + ['custom']}")
    if scale not in ("desk", "paper"):
        raise ConfigError(f"scale must be desk or paper, got {scale!r}")
    p = PRESETS[name]
    sc = p[scale]
    doc = {k: v for k, v in p.items() if k not in ("desk", "paper")}
    doc["target"] = {**doc["target"], "d": sc["d"], "params": dict(doc["target"]["params"])}
    doc["N"] = sc["N"]
    doc["h_list"] = list(sc["h_list"])
    doc["init"] = dict(doc["init"])
    return doc


def _num(errors, doc, key, kind, positive=False, minimum=None):
    if key not in doc or doc[key] is None:
        return None
    val = doc[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)) or (kind is int and not float(val).is_integer()):
        errors.append(f"{key}: expected {kind.__name__}, got {val!r}")
        return None
    val = kind(val)
    if positive and not val > 0:
        errors.append(f"{key}: must be positive, got {val!r}")
    if minimum is not None and val < minimum:
        errors.append(f"{key}: must be >= {minimum}, got {val!r}")
    return val


def parse_config(text):
    """Parse and validate a YAML experiment document.

    Unknown keys are rejected and every problem is reported in a single
    :class:`ConfigError`.  Defaults are filled in: preset values, ``tau = d``
    for SVRG and ``gamma = 1/L`` for underdamped runs on targets with a
    known gradient Lipschitz constant.
    """
    try:
        doc = yaml.load(text, Loader=_Loader) if isinstance(text, str) else text
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if doc is None:
        doc = {}
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping")
    return _from_doc(doc)


def preset_spec(name, scale="desk", **overrides):
    doc = {"preset": name, "scale": scale}
    doc.update({k: v for k, v in overrides.items() if v is not None})
    return _from_doc(doc)


def _from_doc(doc):
    errors = []
    unknown = sorted(set(doc) - KEYS)
    if unknown:
        errors.append(f"unknown keys: {', '.join(unknown)}")
    preset = doc.get("preset", "custom") or "custom"
    scale = doc.get("scale", "desk") or "desk"
    base = {}
    if preset != "custom":
        try:
            base = _preset_doc(preset, scale)
        except ConfigError as exc:
            errors.append(str(exc))
    merged = {**base, **{k: v for k, v in doc.items() if k in KEYS}}
    if "target" in doc and isinstance(doc["target"], dict) and "target" in base:
        t = {**base["target"], **doc["target"]}
        t["params"] = {**base["target"]["params"], **(doc["target"].get("params") or {})}
        merged["target"] = t
    if "init" in doc and isinstance(doc["init"], dict) and "init" in base:
        merged["init"] = {**base["init"], **doc["init"]}
    if "h" in doc and "h_list" in doc:
        errors.append("give either h or h_list, not both")
    elif "h" in doc:
        merged.pop("h_list", None)

    missing = [k for k in ("algorithm", "target", "N") if merged.get(k) is None]
    if merged.get("h") is None and merged.get("h_list") is None:
        missing.append("h or h_list")
    if missing:
        errors.append(f"missing required keys: {', '.join(missing)}")

    # algorithms
    algs = merged.get("algorithm")
    if isinstance(algs, str):
        algs = [algs]
    algorithms = ()
    if algs is not None:
        if not isinstance(algs, list) or not algs:
            errors.append("algorithm: expected a name or a nonempty list")
        else:
            bad = [a for a in algs if a not in ALGORITHMS]
            if bad:
                errors.append(f"algorithm: unknown {bad}; expected one of {list(ALGORITHMS)}")
            algorithms = tuple(str(a) for a in algs)

    # target
    target = None
    t = merged.get("target")
    if t is not None:
        if not isinstance(t, dict):
            errors.append("target: expected a mapping {kind, d, params}")
        else:
            extra = sorted(set(t) - TARGET_KEYS)
            if extra:
                errors.append(f"target: unknown keys {', '.join(extra)}")
            kind = t.get("kind")
            d = _num(errors, {"target.d": t.get("d")}, "target.d", int, minimum=1)
            if kind not in TARGET_PARAMS:
                errors.append(f"target.kind: expected one of {sorted(TARGET_PARAMS)}, got {kind!r}")
            elif t.get("d") is None:
                errors.append("target.d: missing")
            else:
                params = t.get("params") or {}
                if not isinstance(params, dict):
                    errors.append("target.params: expected a mapping")
                    params = {}
                extra = sorted(set(params) - TARGET_PARAMS[kind])
                if extra:
                    errors.append(f"target.params: unknown keys {', '.join(extra)} for kind {kind}")
                params = {**DEFAULT_PARAMS[kind], **params}
                if kind == "mixture":
                    _num(errors, {"target.params.offset": params["offset"]}, "target.params.offset", float, positive=True)
                if kind == "glm":
                    if params["noise_model"] not in ("gaussian", "cosine_perturbed"):
                        errors.append(f"target.params.noise_model: unknown {params['noise_model']!r}")
                    _num(errors, {"target.params.count": params["count"]}, "target.params.count", int, minimum=1)
                    _num(errors, {"target.params.seed": params["seed"]}, "target.params.seed", int, minimum=0)
                target = {"kind": kind, "d": d, "params": params}

    # step sizes
    h_list = ()
    if merged.get("h") is not None:
        h = _num(errors, merged, "h", float, positive=True)
        h_list = (h,) if h is not None else ()
    elif merged.get("h_list") is not None:
        hl = merged["h_list"]
        if not isinstance(hl, list) or not hl:
            errors.append("h_list: expected a nonempty list")
        else:
            vals = [_num(errors, {f"h_list[{i}]": v}, f"h_list[{i}]", float, positive=True) for i, v in enumerate(hl)]
            h_list = tuple(v for v in vals if v is not None)

    N = _num(errors, merged, "N", int, minimum=1)
    seed = _num(errors, merged, "seed", int, minimum=0)
    if seed is not None and seed >= 2**64:
        errors.append("seed: must be < 2**64")
    gamma = _num(errors, merged, "gamma", float, positive=True)
    tau = _num(errors, merged, "tau", int, minimum=1)
    M = _num(errors, merged, "M", int, minimum=0)
    stride = _num(errors, merged, "stride", int, minimum=1)

    phi = merged.get("phi", "x1_squared")
    if phi not in TEST_FUNCTIONS:
        errors.append(f"phi: expected one of {sorted(TEST_FUNCTIONS)}, got {phi!r}")

    init = InitSpec()
    ini = merged.get("init")
    if ini is not None:
        if not isinstance(ini, dict):
            errors.append("init: expected a mapping")
        else:
            extra = sorted(set(ini) - INIT_KEYS)
            if extra:
                errors.append(f"init: unknown keys {', '.join(extra)}")
            vals = {k: _num(errors, {f"init.{k}": ini[k]}, f"init.{k}", float) for k in INIT_KEYS & set(ini)}
            for k in ("x_std", "v_std"):
                if vals.get(k) is not None and vals[k] < 0:
                    errors.append(f"init.{k}: must be >= 0")
            init = InitSpec(**{k: v for k, v in vals.items() if v is not None})

    selection = None
    sel = merged.get("selection")
    if sel is not None:
        if not isinstance(sel, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in sel):
            errors.append("selection: expected a list of probabilities")
        else:
            selection = tuple(float(v) for v in sel)
            if target is not None and len(selection) != target["d"]:
                errors.append(f"selection: {len(selection)} entries for d={target['d']}")
            if any(not v > 0 for v in selection) or abs(math.fsum(selection) - 1.0) > 1e-12:
                errors.append("selection: entries must be positive and sum to 1")

    out = merged.get("out")
    if out is not None and not isinstance(out, str):
        errors.append("out: expected a path string")

    if errors:
        raise ConfigError("invalid config:\n  " + "\n  ".join(errors))

    if tau is None and any(ALGORITHMS[a][0] == "svrg" for a in algorithms):
        tau = target["d"]
    if gamma is None and any(ALGORITHMS[a][1] for a in algorithms):
        from .experiment import build_target

        L = build_target(target).lip_grad
        if L is None:
            raise ConfigError(f"invalid config:\n  gamma: required for underdamped runs on a {target['kind']} target")
        gamma = 1.0 / L

    return ExperimentSpec(
        preset=preset,
        algorithms=algorithms,
        target=target,
        h_list=h_list,
        N=N,
        seed=0 if seed is None else seed,
        phi=phi,
        gamma=gamma,
        tau=tau,
        M=M,
        selection=selection,
        init=init,
        stride=stride,
        out=out,
        scale=scale,
    )


def dump_config(spec):
    """YAML document that :func:`parse_config` maps back to ``spec``."""
    doc = {
        "preset": spec.preset,
        "scale": spec.scale,
        "algorithm": list(spec.algorithms),
        "target": {"kind": spec.target["kind"], "d": spec.target["d"], "params": dict(spec.target["params"])},
        "h_list": list(spec.h_list),
        "N": spec.N,
        "seed": spec.seed,
        "phi": spec.phi,
        "init": asdict(spec.init),
    }
    for key in ("gamma", "tau", "M", "stride", "out"):
        val = getattr(spec, key)
        if val is not None:
            doc[key] = val
    if spec.selection is not None:
        doc["selection"] = list(spec.selection)
    return yaml.safe_dump(doc, sort_keys=False)


def with_overrides(spec, **kw):
    return replace(spec, **kw)
