"""Exception hierarchy.  Every error carries a short machine-readable code."""


class GrushkoError(Exception):
    code = "error"


class UnknownGenerator(GrushkoError):
    code = "unknown-generator"


class ParseError(GrushkoError):
    code = "parse-error"


class InvalidPresentation(GrushkoError):
    code = "invalid-presentation"


class SporadicComplexity(GrushkoError):
    code = "sporadic"


class PeripheralElement(GrushkoError):
    code = "peripheral-element"


class EllipticElement(GrushkoError):
    code = "elliptic-element"


class InvalidTree(GrushkoError):
    code = "invalid-tree"


class InvalidCut(GrushkoError):
    code = "invalid-cut"


class NonForestCollapse(GrushkoError):
    code = "non-forest-collapse"


class NotReduced(GrushkoError):
    code = "not-reduced"


class NoLinesCrossE(GrushkoError):
    code = "no-lines-cross-edge"


class PairingMismatch(GrushkoError):
    code = "pairing-mismatch"


class BudgetExceeded(GrushkoError):
    code = "budget-exceeded"


class NotACutPair(GrushkoError):
    code = "not-a-cut-pair"


class SimpleElement(GrushkoError):
    code = "simple-element"


class MissingSuppliedSplitting(GrushkoError):
    code = "missing-supplied-splitting"


class ValidationFailure(GrushkoError):
    code = "validation-failure"


class NoValidMove(GrushkoError):
    code = "no-valid-move"


class PresentationMismatch(GrushkoError):
    code = "presentation-mismatch"


class IdentityWord(GrushkoError):
    code = "identity-word"


class MixedFactors(GrushkoError):
    code = "mixed-factors"


class SporadicPresentation(GrushkoError):
    code = "sporadic-presentation"


class NothingLeft(GrushkoError):
    code = "nothing-left"


class DisconnectedSubgraph(GrushkoError):
    code = "disconnected-subgraph"


class TrivialStabilizer(GrushkoError):
    code = "trivial-stabilizer"
