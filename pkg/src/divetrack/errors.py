"""Exception hierarchy. Every pipeline failure derives from DiveTrackError."""


class DiveTrackError(Exception):
    pass


# -- input errors (CLI exit code 2)
class InputError(DiveTrackError):
    pass


class NoFrames(InputError):
    pass


class MixedGeometry(InputError):
    pass


class UnreadableFrame(InputError):
    def __init__(self, path, reason=""):
        super().__init__(f"unreadable frame {path}" + (f": {reason}" if reason else ""))
        self.path = path


class ImageTooSmall(InputError):
    pass


# -- configuration errors (CLI exit code 1)
class ConfigError(DiveTrackError):
    pass


class BadRate(ConfigError):
    pass


class BadWindow(ConfigError):
    pass


class SpecOutOfBounds(ConfigError):
    pass


# -- geometry / estimation
class OutOfBounds(DiveTrackError):
    pass


class Degenerate(InputError):
    pass


class NoConsensus(InputError):
    pass


class Singular(InputError):
    pass


class GeometryMismatch(DiveTrackError):
    pass


class EmptyInput(DiveTrackError):
    pass


class LengthMismatch(DiveTrackError):
    pass


# -- empty results (CLI exit code 3)
class EmptyResult(DiveTrackError):
    pass


class NoSubject(EmptyResult):
    pass


class NoValidSamples(EmptyResult):
    pass
