"""Run configuration: a flat ``key = value`` text file.

Unknown keys are rejected. Values are parsed according to the field type;
blank values and ``none`` mean "unset" for optional fields. Dimension pairs
are written ``64x64``, lists comma separated.
"""

from __future__ import annotations

import dataclasses
import os
import types
import typing
from dataclasses import dataclass, fields
from pathlib import Path

from ..errors import FormatError
from ..flow import FlowParams
from ..fusion import FusionKind, FusionMode
from ..prep import PrepConfig
from ..representations import ReprMethod, ReprParams
from ..snn.params import DoGParams, LayerConfig, StdpParams, ThresholdParams

DATA_ROOT_ENV = "SPIKEACT_DATA"

Dims = typing.Tuple[int, int]


@dataclass
class RunConfig:
    # representation and fusion
    method: str = "mg"
    fusion: str = "none"
    fusion_n: int | None = None  # defaults to the sample length
    # sequence preparation (None picks the per-method default)
    motion_threshold: float | None = None
    skip: int | None = None
    sample_len: int | None = None
    stride: int | None = None
    augment: tuple[str, ...] = ()
    noise_sigma: float = 0.05
    resize: Dims | None = None
    grid_tile: Dims | None = None
    # optical flow
    flow_levels: int = 3
    flow_scale: float = 0.5
    flow_window: int = 15
    flow_iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1
    flow_regularization: float = 5e-6
    # representations
    flow_clip: float = 8.0
    cc_theta: float = 30.0
    canny_sigma: float = 1.4
    canny_low: float = 0.1
    canny_high: float = 0.3
    # spiking layer
    use_dog: bool = True
    dog_sigma1: float = 1.0
    dog_sigma2: float = 4.0
    dog_size: int = 7
    n_kernels: int = 128
    kernel_size: int = 5
    padding: int = 2
    conv_stride: int = 1
    t_exposition: float = 1.0
    pool_window: int = 8
    eta_w: float = 0.1
    stdp_beta: float = 1.0
    tau_stdp: float = 0.1
    anneal: float = 0.95
    n_epoch: int = 100
    w_min: float = 0.0
    w_max: float = 1.0
    t_expected: float = 0.95
    eta_theta: float = 1.0
    theta_mean: float = 5.0
    theta_std: float = 1.0
    th_min: float = 1.0
    threshold_leak: float = 0.001
    snn_train_samples: int | None = None  # subsample of training frames, None uses all
    # classifier
    svm_c: float = 1.0
    svm_epochs: int = 50
    # run
    seed: int = 0
    protocol: str = "fixed"
    dataset: str | None = None
    manifest: str | None = None
    train_manifest: str | None = "train.txt"
    test_manifest: str | None = "test.txt"
    train_fraction: float = 1.0
    out: str = "run"
    cache_dir: str | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        m = ReprMethod(self.method)
        FusionKind(self.fusion)
        if self.protocol not in ("fixed", "kth", "loo"):
            raise ValueError(f"unknown protocol {self.protocol!r}")
        bad = set(self.augment) - {"flip", "noise"}
        if bad:
            raise ValueError(f"unknown augmentation(s): {sorted(bad)}")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError("train_fraction must be in (0, 1]")
        if m.is_grid and self.fusion != "none":
            raise ValueError("grid representations are single frames; use fusion = none")
        # building the parameter objects runs their own checks
        self.prep_config()
        self.flow_params()
        self.repr_params()
        self.layer_config()
        self.stdp_params()
        self.threshold_params()
        self.dog_params()
        self.fusion_mode()

    # -- parameter objects -------------------------------------------------

    def prep_config(self) -> PrepConfig:
        return PrepConfig.for_method(
            self.method,
            motion_threshold=self.motion_threshold,
            skip=self.skip,
            sample_len=self.sample_len,
            overlap_stride=self.stride,
        )

    def fusion_mode(self) -> FusionMode:
        n = self.fusion_n if self.fusion_n is not None else self.prep_config().sample_len
        if self.fusion != "none" and n != self.prep_config().sample_len:
            raise ValueError(f"fusion_n ({n}) must equal the sample length ({self.prep_config().sample_len})")
        return FusionMode(FusionKind(self.fusion), n)

    def flow_params(self) -> FlowParams:
        return FlowParams(self.flow_levels, self.flow_scale, self.flow_window, self.flow_iterations, self.poly_n, self.poly_sigma,
                          self.flow_regularization)

    def repr_params(self) -> ReprParams:
        return ReprParams(self.flow_clip, self.cc_theta, self.canny_sigma, self.canny_low, self.canny_high, self.grid_tile)

    def dog_params(self) -> DoGParams:
        return DoGParams(self.dog_sigma1, self.dog_sigma2, self.dog_size)

    def layer_config(self) -> LayerConfig:
        return LayerConfig(self.n_kernels, self.kernel_size, self.padding, self.conv_stride, self.t_exposition)

    def stdp_params(self) -> StdpParams:
        return StdpParams(self.eta_w, self.stdp_beta, self.tau_stdp, self.anneal, self.n_epoch, self.w_min, self.w_max)

    def threshold_params(self) -> ThresholdParams:
        return ThresholdParams(
            self.t_expected, self.eta_theta, self.theta_mean, self.theta_std, self.th_min, 1.0, self.threshold_leak
        )

    def dataset_root(self) -> Path | None:
        root = self.dataset or os.environ.get(DATA_ROOT_ENV)
        return Path(root) if root else None

    def resolved(self) -> "RunConfig":
        """Copy with per-method defaults and the dataset root filled in."""
        prep = self.prep_config()
        root = self.dataset_root()
        return dataclasses.replace(
            self,
            motion_threshold=prep.motion_threshold,
            skip=prep.skip,
            sample_len=prep.sample_len,
            stride=prep.overlap_stride,
            fusion_n=self.fusion_mode().n,
            dataset=str(root) if root else None,
        )

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # -- text form ---------------------------------------------------------

    def to_text(self) -> str:
        return "".join(f"{f.name} = {_format(getattr(self, f.name))}\n" for f in fields(self))

    @classmethod
    def from_dict(cls, values: dict[str, str]) -> "RunConfig":
        hints = typing.get_type_hints(cls)
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise FormatError(f"unknown config key(s): {', '.join(unknown)}")
        parsed = {}
        for k, v in values.items():
            try:
                parsed[k] = _parse(v, hints[k])
            except ValueError as e:
                raise FormatError(f"bad value for {k}: {v!r} ({e})") from None
        return cls(**parsed)

    @classmethod
    def from_text(cls, text: str) -> "RunConfig":
        return cls.from_dict(_parse_lines(text, "config"))


def load_config(path=None, overrides: dict[str, str] | None = None) -> RunConfig:
    """Read a config file (or start from defaults) and apply string overrides."""
    values = {}
    if path is not None:
        values.update(_read_pairs(Path(path)))
    values.update(overrides or {})
    return RunConfig.from_dict(values)


def _read_pairs(path: Path) -> dict[str, str]:
    try:
        text = path.read_text()
    except OSError as e:
        raise FormatError(f"cannot read config {path}: {e}") from None
    return _parse_lines(text, str(path))


def _parse_lines(text: str, where: str) -> dict[str, str]:
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{where}:{n}: expected key = value")
        k, _, v = line.partition("=")
        out[k.strip()] = v.strip()
    return out


def write_config(cfg: RunConfig, path) -> None:
    from .report import atomic_write_text

    atomic_write_text(path, cfg.to_text())


def _format(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        if len(v) == 2 and all(isinstance(x, int) for x in v):
            return f"{v[0]}x{v[1]}"
        return ",".join(str(x) for x in v)
    return str(v)


def _parse(text: str, tp):
    origin = typing.get_origin(tp)
    args = typing.get_args(tp)
    if origin in (typing.Union, types.UnionType):
        inner = [a for a in args if a is not type(None)]
        if text.lower() in ("", "none"):
            return None
        return _parse(text, inner[0])
    if tp is bool:
        low = text.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError("expected a boolean")
    if tp is int:
        return int(text)
    if tp is float:
        return float(text)
    if tp is str:
        return text
    if origin is tuple:
        if args == (int, int):
            parts = text.lower().replace(",", "x").split("x")
            if len(parts) != 2:
                raise ValueError("expected HxW")
            return int(parts[0]), int(parts[1])
        if text.lower() in ("", "none"):
            return ()
        return tuple(p.strip() for p in text.split(",") if p.strip())
    raise ValueError(f"unsupported field type {tp}")
