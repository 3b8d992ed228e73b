"""Exception types raised across the package."""


class ReservingError(Exception):
    pass


class SchemaError(ReservingError):
    pass


class ParseError(ReservingError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyInputError(ReservingError):
    pass


class DegenerateScaleError(ReservingError):
    pass


class UnseenLevelError(ReservingError):
    pass


class HorizonError(ReservingError):
    pass


class NonPositiveDenominatorError(ReservingError):
    def __init__(self, group: int, r: int, value: float):
        super().__init__(f"Efron denominator {value!r} <= 0 at tie group j={group}, r={r}")
        self.group = group
        self.r = r


class ConvergenceError(ReservingError):
    pass


class RankDeficiencyError(ReservingError):
    pass


class DivergenceError(ReservingError):
    def __init__(self, epoch: int, message: str = "objective became non-finite"):
        super().__init__(f"epoch {epoch}: {message}")
        self.epoch = epoch


class BoostingError(ReservingError):
    def __init__(self, round_: int, message: str = "non-finite gradient or curvature"):
        super().__init__(f"round {round_}: {message}")
        self.round = round_


class ConfigError(ReservingError):
    pass


class BlowUpError(ReservingError):
    def __init__(self, row: int, j: int, value: float, label: str = ""):
        where = f"row {row}" + (f" ({label})" if label else "")
        super().__init__(
            f"development factor blows up at {where}, j={j}: delta*hazard={value:.4g}; "
            "use a smaller delta"
        )
        self.row = row
        self.j = j


class ChainLadderError(ReservingError):
    pass


class PredictionError(ReservingError):
    pass
