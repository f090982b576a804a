"""Exception types raised across the toolkit."""


class HTScanError(Exception):
    """Base class for all htscan errors."""


class NetlistSyntaxError(HTScanError):
    """Netlist source violates the supported grammar."""

    def __init__(self, line, token, message):
        self.line = line
        self.token = token
        super().__init__(f"line {line}: {message} (near {token!r})")


class MultipleDriverError(HTScanError):
    def __init__(self, net):
        self.net = net
        super().__init__(f"net {net!r} has more than one driver")


class UndeclaredNetError(HTScanError):
    def __init__(self, name, line=None):
        self.name = name
        self.line = line
        where = f" (line {line})" if line else ""
        super().__init__(f"net {name!r} referenced but never declared{where}")


class ArityError(HTScanError):
    def __init__(self, instance, kind, got, line=None):
        self.instance = instance
        super().__init__(
            f"instance {instance!r}: {kind} does not take {got} input(s)"
        )


class UnknownModuleError(HTScanError):
    def __init__(self, name):
        self.name = name
        super().__init__(f"instantiated module {name!r} is not defined")


class UnknownPortError(HTScanError):
    def __init__(self, module, port):
        self.module = module
        self.port = port
        super().__init__(f"module {module!r} has no port {port!r}")


class HierarchyRecursionError(HTScanError):
    def __init__(self, cycle):
        self.cycle = tuple(cycle)
        super().__init__("recursive module instantiation: " + " -> ".join(self.cycle))


class NotFlatError(HTScanError):
    """Operation requires a flattened netlist."""


class InvalidNetlistError(HTScanError):
    def __init__(self, diagnostics):
        self.diagnostics = list(diagnostics)
        lines = "; ".join(str(d) for d in self.diagnostics[:5])
        more = f" (+{len(self.diagnostics) - 5} more)" if len(self.diagnostics) > 5 else ""
        super().__init__(f"netlist failed validation: {lines}{more}")


class NodeOutOfRangeError(HTScanError, IndexError):
    def __init__(self, node, n):
        super().__init__(f"node id {node} out of range for graph with {n} nodes")


class DimensionMismatchError(HTScanError, ValueError):
    pass


class DegenerateDataError(HTScanError, ValueError):
    pass


class KTooLargeError(HTScanError, ValueError):
    pass


class EmptyDatasetError(HTScanError, ValueError):
    pass


class LabelOutOfRangeError(HTScanError, ValueError):
    pass


class NonFiniteInputError(HTScanError, ValueError):
    pass


class ShapeMismatchError(HTScanError, ValueError):
    pass


class BadThresholdError(HTScanError, ValueError):
    pass


class LevelError(HTScanError, ValueError):
    pass


class EmptyGraphError(HTScanError, ValueError):
    pass


class OutOfRangeError(HTScanError, ValueError):
    pass


class BadSizeError(HTScanError, ValueError):
    pass


class VictimNotFoundError(HTScanError, ValueError):
    pass


class InsufficientNetsError(HTScanError, ValueError):
    pass


class LengthMismatchError(HTScanError, ValueError):
    pass


class CircuitMismatchError(HTScanError, ValueError):
    pass


class IncompatibleModeError(HTScanError, ValueError):
    pass
