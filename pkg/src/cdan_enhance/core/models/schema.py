from typing import List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator


class CdanConfig(BaseModel):
    encoder_channels: List[int] = [3, 64, 128, 256, 512]
    decoder_channels: List[int] = [512, 256, 128, 64, 32]
    dense_layers: int = Field(default=4, ge=1)
    growth_rate: int = Field(default=16, ge=1)
    dropout: float = Field(default=0.2, ge=0.0, lt=1.0)
    cbam_reduction: int = Field(default=16, ge=1)
    spatial_kernel: int = Field(default=7, ge=1)
    out_channels: int = Field(default=3, ge=1)
    pad_multiple: int = Field(default=8, ge=1)
    use_skips: bool = True
    use_attention: bool = True
    use_dense: bool = True

    @model_validator(mode="after")
    def check_schedule(self):
        enc, dec = self.encoder_channels, self.decoder_channels
        if len(enc) != 5 or len(dec) != 5:
            raise ValueError(
                f"encoder/decoder schedules need 5 entries, got {enc} and {dec}"
            )
        if any(c < 1 for c in enc + dec):
            raise ValueError(f"channel widths must be positive, got {enc} and {dec}")
        if dec[0] != enc[-1]:
            raise ValueError(
                f"decoder must start at the bottleneck width {enc[-1]}, got {dec[0]}"
            )
        if self.spatial_kernel % 2 == 0:
            raise ValueError(f"spatial_kernel must be odd, got {self.spatial_kernel}")
        return self

    @property
    def in_channels(self) -> int:
        return self.encoder_channels[0]

    @property
    def bottleneck_channels(self) -> int:
        return self.encoder_channels[-1]


LossType = Literal["l1", "l2", "perceptual", "composite"]


class LossConfig(BaseModel):
    loss_type: LossType = "composite"
    lambda_perceptual: float = Field(default=0.25, ge=0.0)
    feature_depth: int = Field(default=20, ge=1, le=37)
    vgg_weights: Optional[str] = None
    normalize_input: bool = False
    extractor_seed: int = 1234


class TrainConfig(BaseModel):
    epochs: int = Field(default=80, ge=1)
    batch_size: int = Field(default=16, ge=1)
    lr: float = Field(default=0.001, gt=0.0)
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    seed: int = 42
    checkpoint_every: int = Field(default=10, ge=1)
    log_interval: int = Field(default=10, ge=1)
    max_steps: Optional[int] = Field(default=None, ge=1)


class DataConfig(BaseModel):
    train_size: Optional[Tuple[int, int]] = (200, 200)
    prefetch_workers: int = Field(default=4, ge=1)

    @field_validator("train_size", mode="before")
    @classmethod
    def check_size(cls, value):
        # an empty list in TOML means native resolution
        if value is None or (isinstance(value, (list, tuple)) and not value):
            return None
        value = tuple(value)
        if len(value) != 2:
            raise ValueError(f"train_size needs [height, width], got {value}")
        if int(value[0]) < 1 or int(value[1]) < 1:
            raise ValueError(f"train_size must be positive, got {value}")
        return value


class EnhanceConfig(BaseModel):
    alpha_color: float = 1.35
    alpha_contrast: float = 1.12
    enabled: bool = True

    @field_validator("alpha_color", "alpha_contrast")
    @classmethod
    def check_finite(cls, value: float):
        if value != value or value in (float("inf"), float("-inf")):
            raise ValueError(f"alpha must be finite, got {value}")
        return value


class EvaluationConfig(BaseModel):
    workers: int = Field(default=4, ge=1)


class ImageMetric(BaseModel):
    filename: str
    psnr_db: float
    ssim: float


class MetricReport(BaseModel):
    entries: List[ImageMetric]
    mean_psnr: float
    mean_ssim: float
    infinite_psnr: int = 0


class LossRecord(BaseModel):
    step: int
    epoch: int
    mse: float
    perceptual: float
    composite: float


class CheckpointMeta(BaseModel):
    config: CdanConfig
    seed: int
    epoch: int = 0
    step: int = 0


class TrainSummary(BaseModel):
    checkpoint: str
    loss_csv: str
    steps: int
    final_loss: float


class EnhanceSummary(BaseModel):
    outputs: List[str]
