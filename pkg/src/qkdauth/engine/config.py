from __future__ import annotations

from dataclasses import dataclass, field

from ..channel import ChannelConfig
from .modes import Variant


@dataclass(frozen=True)
class ProtocolConfig:
    variant: Variant = Variant.P1
    digest_bits: int = 256
    qber_threshold: float = 0.11
    sample_fraction: float = 0.1
    margin_bits: int = 100
    slice_bits: int = 256
    cascade_passes: int = 4
    step8_margin_bits: int = 0
    channel: ChannelConfig = field(default_factory=ChannelConfig)

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant(self.variant))
        if self.digest_bits <= 0 or self.digest_bits % 8:
            raise ValueError("digest_bits must be a positive multiple of 8")
        if self.slice_bits <= 0 or self.slice_bits % 8:
            raise ValueError("slice_bits must be a positive multiple of 8")
        if not 0 < self.sample_fraction < 1:
            raise ValueError("sample_fraction must be in (0, 1)")
        if not 0 <= self.qber_threshold <= 0.5:
            raise ValueError("qber_threshold must be in [0, 0.5]")
        if self.margin_bits < 0 or self.step8_margin_bits < 0:
            raise ValueError("margins must be non-negative")
        if self.cascade_passes < 1:
            raise ValueError("cascade_passes must be >= 1")

    @property
    def otp_budget(self) -> int:
        """Key bits one symmetric-authenticated round consumes: two two-way phases."""
        return 4 * self.digest_bits

    def replace(self, **changes) -> ProtocolConfig:
        data = {f: getattr(self, f) for f in self.__dataclass_fields__}
        data.update(changes)
        return ProtocolConfig(**data)
