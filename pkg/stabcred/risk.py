"""
This module encodes the likelihood/consequence nomenclature used to quantify stablecoin credit risks, the
3x3 risk quantifying matrix that maps a rating to a color :class:`~stabcred.constants.Tier`, and the risk
register of :class:`RiskRegisterEntry` objects with their interim and enduring mitigations.

Register entries are data: :func:`default_register` ships the four built-in risks, and scenario files may
extend the register with entries of their own (see :meth:`RiskRegisterEntry.from_dict`).
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Tuple

from colorama import Fore, Style

from stabcred.constants import Likelihood, Consequence, Tier, CreditLayer
from stabcred.exceptions import InvalidEntry

lg = logging.getLogger(__name__)

Rating = Tuple[Likelihood, Consequence]

TIER_GRID: Dict[Rating, Tier] = {
    (Likelihood.LOW, Consequence.LOW): Tier.BLUE,
    (Likelihood.LOW, Consequence.MEDIUM): Tier.GREEN,
    (Likelihood.LOW, Consequence.HIGH): Tier.YELLOW,
    (Likelihood.MEDIUM, Consequence.LOW): Tier.GREEN,
    (Likelihood.MEDIUM, Consequence.MEDIUM): Tier.YELLOW,
    (Likelihood.MEDIUM, Consequence.HIGH): Tier.ORANGE,
    (Likelihood.HIGH, Consequence.LOW): Tier.YELLOW,
    (Likelihood.HIGH, Consequence.MEDIUM): Tier.ORANGE,
    (Likelihood.HIGH, Consequence.HIGH): Tier.RED,
}

TIER_COLORS = {
    Tier.BLUE: Fore.BLUE,
    Tier.GREEN: Fore.GREEN,
    Tier.YELLOW: Fore.YELLOW,
    Tier.ORANGE: Fore.LIGHTRED_EX,
    Tier.RED: Fore.RED,
}


@dataclass(frozen=True)
class RiskCell:
    """A cell of the risk quantifying matrix, e.g. ``C2`` / orange"""
    code: str
    tier: Tier

    def to_dict(self) -> Dict:
        return {"code": self.code, "tier": self.tier.name}

    def color_repr(self, color=True) -> str:
        if color:
            return f"{TIER_COLORS[self.tier]}{self.code} {self.tier.name.lower()}{Fore.RESET}"
        return f"{self.code} {self.tier.name.lower()}"


def score(likelihood: Likelihood, consequence: Consequence) -> RiskCell:
    """Score a (likelihood, consequence) rating on the risk quantifying matrix"""
    likelihood = Likelihood(likelihood)
    consequence = Consequence(consequence)
    return RiskCell(code=likelihood.letter + consequence.digit, tier=TIER_GRID[(likelihood, consequence)])


@dataclass(frozen=True)
class RiskRegisterEntry:
    """
    A named risk with its unmitigated and mitigated ratings.

    :param name: name of the risk, e.g. "Liquidation Risk"
    :param unmitigated: (likelihood, consequence) before mitigation
    :param interim_mitigations: mitigations that apply until enduring ones are in place
    :param enduring_mitigations: long term mitigations
    :param mitigated: (likelihood, consequence) after mitigation. Must not exceed `unmitigated` on either axis.
    :param layer: the layer of the credit spectrum that introduces the risk
    """
    name: str
    unmitigated: Rating
    interim_mitigations: Tuple[str, ...]
    enduring_mitigations: Tuple[str, ...]
    mitigated: Rating
    layer: CreditLayer = CreditLayer.OVERCOLLATERALIZED

    def __post_init__(self):
        object.__setattr__(self, "unmitigated", (Likelihood(self.unmitigated[0]), Consequence(self.unmitigated[1])))
        object.__setattr__(self, "mitigated", (Likelihood(self.mitigated[0]), Consequence(self.mitigated[1])))
        object.__setattr__(self, "interim_mitigations", tuple(self.interim_mitigations))
        object.__setattr__(self, "enduring_mitigations", tuple(self.enduring_mitigations))

    def is_valid(self) -> bool:
        return self.mitigated[0] <= self.unmitigated[0] and self.mitigated[1] <= self.unmitigated[1]

    def __validate__(self) -> None:
        if not self.is_valid():
            raise InvalidEntry(
                f"'{self.name}': mitigated rating {score(*self.mitigated).code} "
                f"exceeds unmitigated rating {score(*self.unmitigated).code}"
            )

    def to_dict(self) -> Dict:
        return {
            "name": self.name,
            "layer": self.layer.name,
            "unmitigated": {"likelihood": self.unmitigated[0].letter, "consequence": int(self.unmitigated[1])},
            "interim_mitigations": list(self.interim_mitigations),
            "enduring_mitigations": list(self.enduring_mitigations),
            "mitigated": {"likelihood": self.mitigated[0].letter, "consequence": int(self.mitigated[1])},
        }

    @staticmethod
    def from_dict(x: Dict) -> "RiskRegisterEntry":
        """
        Create an entry from a dict as found in scenario files. Likelihoods are given as letters
        (A, B, C), consequences as digits (1, 2, 3).
        """
        def rating(r: Dict) -> Rating:
            return Likelihood.from_letter(r["likelihood"]), Consequence(int(r["consequence"]))

        return RiskRegisterEntry(
            name=x["name"],
            unmitigated=rating(x["unmitigated"]),
            interim_mitigations=x.get("interim_mitigations", []),
            enduring_mitigations=x.get("enduring_mitigations", []),
            mitigated=rating(x["mitigated"]),
            layer=CreditLayer[x.get("layer", "OVERCOLLATERALIZED").upper()],
        )


def apply_mitigations(entry: RiskRegisterEntry) -> Tuple[RiskCell, RiskCell]:
    """
    Score an entry before and after mitigation

    :raises InvalidEntry: if the mitigated rating exceeds the unmitigated rating on either axis
    """
    entry.__validate__()
    return score(*entry.unmitigated), score(*entry.mitigated)


def default_register() -> List[RiskRegisterEntry]:
    """The stablecoin credit issuance risk register"""
    L, C = Likelihood, Consequence
    return [
        RiskRegisterEntry(
            name="Liquidation Risk",
            unmitigated=(L.HIGH, C.MEDIUM),
            interim_mitigations=["System Health Monitoring"],
            enduring_mitigations=["Liquidation/ Redistribution Infrastructure"],
            mitigated=(L.LOW, C.MEDIUM),
            layer=CreditLayer.OVERCOLLATERALIZED,
        ),
        RiskRegisterEntry(
            name="Operations Risk",
            unmitigated=(L.MEDIUM, C.HIGH),
            interim_mitigations=["Multisignature Safe", "Timelock"],
            enduring_mitigations=["Immutable", "Permissionless"],
            mitigated=(L.LOW, C.MEDIUM),
            layer=CreditLayer.AMO,
        ),
        RiskRegisterEntry(
            name="Cost of Borrowing Risk",
            unmitigated=(L.HIGH, C.MEDIUM),
            interim_mitigations=["Excessive Rates", "Credit Limit"],
            enduring_mitigations=["Active Monitoring Infrastructure", "Endogenous Yield"],
            mitigated=(L.MEDIUM, C.MEDIUM),
            layer=CreditLayer.B2F,
        ),
        RiskRegisterEntry(
            name="Unbacked Circulation Risk",
            unmitigated=(L.MEDIUM, C.HIGH),
            interim_mitigations=["Credit Limit"],
            enduring_mitigations=["Active Monitoring Infrastructure", "Endogenous Yield"],
            mitigated=(L.LOW, C.HIGH),
            layer=CreditLayer.B2S,
        ),
    ]


def register_rows(register: List[RiskRegisterEntry]) -> List[Dict]:
    """Rows of the risk register in report column order, including the scored cells"""
    rows = []
    for entry in register:
        before, after = apply_mitigations(entry)
        rows.append({
            "risk": entry.name,
            "layer": entry.layer.name,
            "unmitigated_likelihood": entry.unmitigated[0].label,
            "unmitigated_consequence": entry.unmitigated[1].label,
            "interim_mitigations": ", ".join(entry.interim_mitigations),
            "enduring_mitigations": ", ".join(entry.enduring_mitigations),
            "mitigated_likelihood": entry.mitigated[0].label,
            "mitigated_consequence": entry.mitigated[1].label,
            "unmitigated_cell": before.to_dict(),
            "mitigated_cell": after.to_dict(),
        })
    return rows


def render_matrix(color=True) -> str:
    """Render the risk quantifying matrix as text"""
    lines = ["Likelihood \\ Consequence".ljust(26) + "".join(c.label.ljust(14) for c in Consequence)]
    for li in Likelihood:
        cells = "".join(score(li, c).color_repr(color=color).ljust(14 + (10 if color else 0)) for c in Consequence)
        lines.append(li.label.ljust(26) + cells)
    return "\n".join(lines)


def render_register(register: List[RiskRegisterEntry], color=True) -> str:
    """Render the risk register in the column order Risk | Unmitigated | Interim | Enduring | Mitigated"""
    header = ["Risk", "Unmitigated", "Interim Mitigations", "Enduring Mitigations", "Mitigated"]
    widths = [28, 14, 32, 52, 14]
    bright = Style.BRIGHT if color else ""
    reset = Style.RESET_ALL if color else ""
    lines = [bright + "".join(h.ljust(w) for h, w in zip(header, widths)) + reset]

    for entry in register:
        before, after = apply_mitigations(entry)
        pad = 10 if color else 0
        lines.append(
            entry.name.ljust(widths[0]) +
            before.color_repr(color).ljust(widths[1] + pad) +
            ", ".join(entry.interim_mitigations).ljust(widths[2]) +
            ", ".join(entry.enduring_mitigations).ljust(widths[3]) +
            after.color_repr(color).ljust(widths[4] + pad)
        )
    return "\n".join(lines)
