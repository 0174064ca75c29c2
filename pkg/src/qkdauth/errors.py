class ProtocolAbort(Exception):
    """A round stopped at ``stage``; aborting is a legitimate protocol outcome."""

    def __init__(self, stage: str, reason: str):
        super().__init__(f"{stage}: {reason}")
        self.stage = stage
        self.reason = reason


class InsufficientKey(ProtocolAbort):
    pass
