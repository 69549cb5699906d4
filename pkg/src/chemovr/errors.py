class ChemoVRError(Exception):
    """Base class for errors raised by chemovr."""


class RatePositivityError(ChemoVRError, ValueError):
    """A turning rate became non-positive with no floor configured."""


class NoRootError(ChemoVRError, ValueError):
    """The jump does not occur inside the requested substep."""


class CFLError(ChemoVRError, ValueError):
    pass


class StabilityError(ChemoVRError, ValueError):
    pass


class MeshMismatchError(ChemoVRError, ValueError):
    pass


class DegenerateSampleError(ChemoVRError, ValueError):
    pass


class ConfigError(ChemoVRError, ValueError):
    pass


# status codes returned by the compiled kernels
OK = 0
RATE_NONPOSITIVE = 1


def raise_for_status(status: int, where: str = "") -> None:
    if status == OK:
        return
    if status == RATE_NONPOSITIVE:
        raise RatePositivityError(
            f"turning rate became non-positive{(' in ' + where) if where else ''}; "
            "parameters are outside the validity regime (set rate_floor to clip)"
        )
    raise ChemoVRError(f"kernel failed with status {status}")
