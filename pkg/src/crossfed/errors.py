"""Exception types shared across the package."""


class CrossFedError(Exception):
    """Base class for every error raised by crossfed."""


class InvalidInputError(CrossFedError, ValueError):
    """An argument violates an operation's preconditions."""


class NumericError(CrossFedError, ArithmeticError):
    """A computation produced non-finite values."""


class CryptoRangeError(CrossFedError, ValueError):
    """A plaintext, ciphertext, or encoded value is outside its legal range."""


class KeyGenError(CrossFedError, RuntimeError):
    """Key generation gave up before finding suitable primes."""


class CsvParseError(CrossFedError, ValueError):
    """A CSV input file is malformed; carries the 1-based line number."""

    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class ConfigError(CrossFedError, ValueError):
    """An experiment config file is missing, malformed, or inconsistent."""


class RoundError(CrossFedError, RuntimeError):
    """A federated round failed; carries the round index and offending node."""

    def __init__(self, round_index: int, node_id, message: str):
        self.round_index = round_index
        self.node_id = node_id
        where = f"round {round_index}"
        if node_id is not None:
            where += f", node {node_id}"
        super().__init__(f"{where}: {message}")
