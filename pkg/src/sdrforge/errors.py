"""Exception hierarchy shared by every stage of the pipeline."""


class SdrError(Exception):
    """Base class; the CLI prints ``<ClassName>: <message>`` for these."""


class ParseError(SdrError):
    def __init__(self, message, path=None, line=None, offset=None):
        self.path = path
        self.line = line
        self.offset = offset
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if offset is not None:
            where.append(f"offset {offset}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class EmptyMesh(SdrError):
    pass


class InvalidSize(SdrError):
    pass


class AspectError(SdrError):
    pass


class EmptyLibrary(SdrError):
    pass


class StyleMismatch(SdrError):
    pass


class ConfigError(SdrError):
    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")


class UnknownId(SdrError):
    pass


class EmptyMask(SdrError):
    pass


class IoError(SdrError, OSError):
    pass


class ManifestMismatch(SdrError):
    pass


class AlreadyAugmented(SdrError):
    pass


class DegenerateBox(SdrError):
    pass


class UnknownImageId(SdrError):
    def __init__(self, ids):
        self.ids = sorted(ids)
        super().__init__("unknown image_id(s): " + ",".join(str(i) for i in self.ids))


class UnknownCategory(SdrError):
    pass


class IntegrityError(SdrError):
    pass


class RangeError(SdrError):
    pass


class EmptySamples(SdrError):
    pass


class EmptyGroup(SdrError):
    pass
