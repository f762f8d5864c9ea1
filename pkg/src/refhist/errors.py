class RefhistError(Exception):
    """Base class for data errors (CLI exit status 2)."""


class DumpParseError(RefhistError):
    def __init__(self, message: str, offset: int):
        super().__init__(message)
        self.offset = offset


class JsonlParseError(RefhistError):
    def __init__(self, message: str, line: int):
        super().__init__(message)
        self.line = line


class InvalidContributorError(RefhistError):
    pass
