from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, model_validator

from ..utils.errors import InputError


class DomainKind(str, Enum):
    disc = "disc"
    annulus = "annulus"


class Chart(str, Enum):
    log_polar = "log_polar"
    polar_half_offset = "polar_half_offset"


class Circle(str, Enum):
    inner = "inner"
    outer = "outer"


class DomainSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: DomainKind
    r_outer: float
    r_inner: Optional[float] = None

    @model_validator(mode="after")
    def check_radii(self) -> "DomainSpec":
        if not self.r_outer > 0:
            raise InputError(f"r_outer must be positive, got {self.r_outer}")
        if self.kind == DomainKind.annulus:
            if self.r_inner is None or not 0 < self.r_inner < self.r_outer:
                raise InputError(
                    f"annulus needs 0 < r_inner < r_outer, got r_inner={self.r_inner}, r_outer={self.r_outer}"
                )
        elif self.r_inner is not None:
            raise InputError("disc domain takes no r_inner")
        return self

    @classmethod
    def annulus(cls, r_inner: float, r_outer: float) -> "DomainSpec":
        return cls(kind=DomainKind.annulus, r_inner=r_inner, r_outer=r_outer)

    @classmethod
    def disc(cls, r_outer: float) -> "DomainSpec":
        return cls(kind=DomainKind.disc, r_outer=r_outer)

    @classmethod
    def parse(cls, text: str) -> "DomainSpec":
        """Parse the command-line form 'annulus:R1:R2' or 'disc:R'"""
        parts = text.strip().split(":")
        try:
            if parts[0] == "annulus" and len(parts) == 3:
                return cls.annulus(float(parts[1]), float(parts[2]))
            if parts[0] == "disc" and len(parts) == 2:
                return cls.disc(float(parts[1]))
        except ValueError as e:
            raise InputError(f"invalid domain '{text}': {e}")
        raise InputError(f"invalid domain '{text}', expected annulus:R1:R2 or disc:R")

    @property
    def circles(self) -> list:
        if self.kind == DomainKind.annulus:
            return [Circle.inner, Circle.outer]
        return [Circle.outer]

    @property
    def chart(self) -> Chart:
        return Chart.log_polar if self.kind == DomainKind.annulus else Chart.polar_half_offset
