"""Style labels and the style-injection schemes shared across modules."""

from __future__ import annotations

import enum


class Style(enum.IntEnum):
    INFORMAL = 0
    FORMAL = 1
    UNKNOWN = 2

    @property
    def tag(self) -> str:
        return STYLE_TAGS[self]

    @classmethod
    def parse(cls, text: str) -> "Style":
        key = text.strip()
        for style, tag in STYLE_TAGS.items():
            if key == tag or key.lower() == style.name.lower():
                return style
        raise ValueError(f"unknown style {text!r}; expected one of formal, informal, unknown")

    def flipped(self) -> "Style":
        if self is Style.UNKNOWN:
            return self
        return Style.FORMAL if self is Style.INFORMAL else Style.INFORMAL


STYLE_TAGS = {
    Style.INFORMAL: "<2Informal>",
    Style.FORMAL: "<2Formal>",
    Style.UNKNOWN: "<2Unknown>",
}
TAG_TO_STYLE = {tag: style for style, tag in STYLE_TAGS.items()}


class ControlScheme(enum.Enum):
    NONE = "none"
    TAG_SRC = "tag-src"
    TAG_SRC_BLOCK = "tag-src-block"
    TAG_SRC_TGT = "tag-src-tgt"
    FACTOR_CONCAT = "factor-concat"
    FACTOR_SUM = "factor-sum"
    PRED_CONCAT = "pred-concat"
    PRED_SUM = "pred-sum"
    BOS = "bos"
    BIAS = "bias"

    @classmethod
    def parse(cls, name: str) -> "ControlScheme":
        key = name.strip().lower().replace("_", "").replace("-", "")
        for scheme in cls:
            if key in (scheme.value.replace("-", ""), scheme.name.lower().replace("_", "")):
                return scheme
        valid = ", ".join(s.value for s in cls)
        raise ValueError(f"unknown control scheme {name!r}; valid: {valid}")

    @property
    def uses_style(self) -> bool:
        return self is not ControlScheme.NONE

    @property
    def tags_source(self) -> bool:
        return self in (ControlScheme.TAG_SRC, ControlScheme.TAG_SRC_BLOCK, ControlScheme.TAG_SRC_TGT)

    @property
    def tags_target(self) -> bool:
        return self is ControlScheme.TAG_SRC_TGT

    @property
    def side_channel(self) -> bool:
        """Style reaches the network through embeddings or biases, not tokens."""
        return self.uses_style and not self.tags_source
