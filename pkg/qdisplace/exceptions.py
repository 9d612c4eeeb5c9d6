class QDisplaceError(ValueError):
    pass


class RegisterError(QDisplaceError):
    pass


class NonUnitaryError(QDisplaceError):
    pass


class ZeroProbabilityBranch(QDisplaceError):
    pass


class CapacityError(QDisplaceError):
    pass


class ScenarioError(QDisplaceError):
    pass


class StructureMismatch(QDisplaceError):
    pass


class UnsupportedMeasurement(QDisplaceError):
    pass


class SpacetimeError(QDisplaceError):
    pass


class SchemaError(QDisplaceError):
    """Invalid JSON input; `path` locates the offending key."""

    def __init__(self, message: str, path: tuple = ()):
        self.path = tuple(path)
        location = '/'.join(str(p) for p in self.path)
        super().__init__(f'{location}: {message}' if location else message)
