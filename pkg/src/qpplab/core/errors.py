# src/qpplab/core/errors.py
from typing import Any, Optional


class QPPLabError(Exception):
    """Excepción base del laboratorio. Cada subclase define su código de salida."""

    exit_code: int = 1

    def __init__(self, message: str, details: Optional[dict] = None):
        self.message = message
        self.details = details or {}
        super().__init__(self.message)


# ============================================================
# ERRORES DE LECTURA (exit 2)
# ============================================================

class ParseError(QPPLabError):
    exit_code = 2

    def __init__(self, message: str, source: str = "<stream>", line: Optional[int] = None,
                 details: Optional[dict] = None):
        self.source = source
        self.line = line
        location = f"{source}:{line}" if line is not None else source
        merged = {"source": source, "line": line}
        merged.update(details or {})
        super().__init__(f"{location}: {message}", merged)


class DuplicateEntryError(ParseError):
    """Documento, juicio, columna o consulta repetida en un archivo."""


# ============================================================
# ALINEACIÓN Y FUSIÓN (exit 3 / 4)
# ============================================================

class AlignmentError(QPPLabError):
    exit_code = 3


class MergeConflictError(QPPLabError):
    exit_code = 4


# ============================================================
# ERRORES DE USO Y DE DOMINIO (exit 1)
# ============================================================

class UsageError(QPPLabError):
    exit_code = 1


class ConfigurationError(QPPLabError):
    pass


class MissingQueryError(QPPLabError):
    def __init__(self, query_id: str, where: str):
        self.query_id = query_id
        super().__init__(
            f"La consulta '{query_id}' no está presente en {where}",
            {"query_id": query_id, "where": where},
        )


class DegenerateQueryError(QPPLabError):
    """La consulta no tiene términos efectivos (N_q = 0)."""

    def __init__(self, query_id: Optional[str], message: str = "sin términos efectivos (N_q = 0)"):
        self.query_id = query_id
        super().__init__(f"Consulta '{query_id}': {message}", {"query_id": query_id})


class DivisionByZeroError(QPPLabError):
    pass


class UndefinedStatisticError(QPPLabError):
    """
    Estadístico no definido (entrada constante, todo empatado, etc.).
    `partial` guarda el resultado parcial cuando lo hay.
    """

    def __init__(self, message: str, details: Optional[dict] = None, partial: Any = None):
        self.partial = partial
        super().__init__(message, details)


class SampleSizeError(QPPLabError):
    pass


class DimensionMismatchError(QPPLabError):
    pass


class UnderdeterminedError(QPPLabError):
    pass


class ProtocolError(QPPLabError):
    """Intento de predecir una consulta con un modelo que la vio en entrenamiento."""
