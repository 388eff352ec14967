"""Parameter sets of the convolutional spiking layer."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class DoGParams:
    sigma_center: float = 1.0
    sigma_surround: float = 4.0
    kernel_size: int = 7

    def __post_init__(self):
        if not 0 < self.sigma_center < self.sigma_surround:
            raise ValueError("need 0 < sigma_center < sigma_surround")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel_size must be odd and positive")


@dataclass(frozen=True)
class LayerConfig:
    n_kernels: int = 128
    kernel_size: int = 5
    padding: int = 2
    stride: int = 1
    t_exposition: float = 1.0

    def __post_init__(self):
        if self.n_kernels < 1 or self.kernel_size < 1 or self.stride < 1 or self.padding < 0:
            raise ValueError("invalid convolution geometry")
        if self.t_exposition <= 0:
            raise ValueError("t_exposition must be positive")


@dataclass(frozen=True)
class StdpParams:
    eta_w: float = 0.1
    beta: float = 1.0
    tau_stdp: float = 0.1
    alpha: float = 0.95
    n_epoch: int = 100
    w_min: float = 0.0
    w_max: float = 1.0

    def __post_init__(self):
        if self.eta_w <= 0:
            raise ValueError("eta_w must be positive")
        if not 0 < self.alpha <= 1:
            raise ValueError("alpha must lie in (0, 1]")
        if self.n_epoch < 0:
            raise ValueError("n_epoch must be >= 0")
        if not self.w_min < self.w_max:
            raise ValueError("w_min must be below w_max")


@dataclass(frozen=True)
class ThresholdParams:
    t_expected: float = 0.95
    eta_theta: float = 1.0
    theta_mean: float = 5.0
    theta_std: float = 1.0
    th_min: float = 1.0
    nu_inh: float = 1.0
    leak: float = 0.001  # non-winner decrease per sample, as a fraction of eta_theta

    def __post_init__(self):
        if self.eta_theta < 0 or self.leak < 0:
            raise ValueError("eta_theta and leak must be >= 0")
