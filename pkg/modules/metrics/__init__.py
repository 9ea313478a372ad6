from modules.metrics.errors import mse, nmse, psnr
from modules.metrics.report import (
    MetricRecord,
    MetricsReport,
    SummaryRow,
    mean_std,
)
from modules.metrics.schemas import MetricConfig
from modules.metrics.ssim import (
    ssim,
    ssim_loss,
    ssim_loss_and_grad,
    ssim_loss_node,
    ssim_map,
)

__all__ = [
    "MetricConfig",
    "MetricRecord",
    "MetricsReport",
    "SummaryRow",
    "mean_std",
    "mse",
    "nmse",
    "psnr",
    "ssim",
    "ssim_loss",
    "ssim_loss_and_grad",
    "ssim_loss_node",
    "ssim_map",
]
