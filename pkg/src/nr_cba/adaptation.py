"""Utility model for choosing between the Type I and EType II codebooks."""
from __future__ import annotations

from dataclasses import dataclass
from enum import IntEnum

from .codebook import (
    CodebookConfig, DftBeamGrid, TypeIPmi, etype2_overhead_bits, overhead_tax, type1_overhead_bits,
)
from .errors import BaselineZero, ConfigError
from .link import LinkMetrics, select_etype2_pmi, select_type1_pmi

DEFAULT_LAMBDA = 1e-4


class CodebookChoice(IntEnum):
    TYPE1 = 0
    ETYPE2 = 1


@dataclass(frozen=True)
class UtilityConfig:
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigError("lambda must lie in [0, 1]", field="lambda")


@dataclass(frozen=True)
class UtilityReport:
    gain_type2: float
    tax_bits: int
    u0: float
    u1: float
    choice: CodebookChoice


def se_gain(se_choice: float, se_baseline: float, tol: float = 1e-12) -> float:
    """Relative SE gain over the Type I baseline."""
    if se_baseline <= tol:
        raise BaselineZero(f"baseline SE {se_baseline} is not positive")
    return se_choice / se_baseline - 1.0


def utility(choice: CodebookChoice | int, gain: float, tax_bits: float, cfg: UtilityConfig) -> float:
    if int(choice) == CodebookChoice.TYPE1:
        return 0.0
    return gain - cfg.lam * tax_bits


def decide(gain_type2: float, tax_bits: int, cfg: UtilityConfig) -> UtilityReport:
    u0 = utility(CodebookChoice.TYPE1, 0.0, 0, cfg)
    u1 = utility(CodebookChoice.ETYPE2, gain_type2, tax_bits, cfg)
    choice = CodebookChoice.ETYPE2 if u1 > u0 else CodebookChoice.TYPE1
    return UtilityReport(gain_type2=gain_type2, tax_bits=tax_bits, u0=u0, u1=u1, choice=choice)


@dataclass(frozen=True, eq=False)
class LabeledLink:
    """Both PMI searches on one realization plus the resulting utility decision."""
    report: UtilityReport
    pmi1: object
    pmi2: object
    link1: LinkMetrics
    link2: LinkMetrics

    @property
    def choice(self) -> CodebookChoice:
        return self.report.choice


def evaluate_link(h, grid: DftBeamGrid, cb_cfg: CodebookConfig, util_cfg: UtilityConfig,
                  noise_var: float) -> LabeledLink:
    pmi1, link1 = select_type1_pmi(h, grid, cb_cfg, noise_var)
    pmi2, link2 = select_etype2_pmi(h, grid, cb_cfg, noise_var)
    report = decide(se_gain(link2.se, link1.se), overhead_tax(cb_cfg, pmi1.rank, pmi2.rank), util_cfg)
    return LabeledLink(report=report, pmi1=pmi1, pmi2=pmi2, link1=link1, link2=link2)


def label_sample(h, grid: DftBeamGrid, cb_cfg: CodebookConfig, util_cfg: UtilityConfig,
                 noise_var: float) -> tuple[UtilityReport, CodebookChoice]:
    """Utility-argmax codebook label for one realization (ties go to Type I)."""
    labeled = evaluate_link(h, grid, cb_cfg, util_cfg, noise_var)
    return labeled.report, labeled.choice


def report_overhead(cb_cfg: CodebookConfig, pmi) -> int:
    """Feedback bits of a selected PMI."""
    if isinstance(pmi, TypeIPmi):
        return type1_overhead_bits(cb_cfg, pmi.rank).total_bits
    return etype2_overhead_bits(cb_cfg, pmi.rank).total_bits
