"""
Exceções do sistema e códigos de saída da linha de comando
"""
from typing import Optional


class PPFError(Exception):
    """Erro base do sistema"""
    exit_code = 1
    kind = "erro"


class InvalidInputError(PPFError):
    """Entrada inválida ou pré-condição violada"""
    exit_code = 4
    kind = "validacao"


class DivergenceError(PPFError):
    """Perda ou gradiente não finito durante a otimização"""
    exit_code = 5
    kind = "divergencia"

    def __init__(self, message: str, iteration: Optional[int] = None):
        if iteration is not None:
            message = f"{message} (iteracao {iteration})"
        super().__init__(message)
        self.iteration = iteration


class StorageError(PPFError):
    """Falha de leitura/escrita ou formato de arquivo inválido"""
    exit_code = 3
    kind = "io"


class GradientCheckError(PPFError):
    """Gradiente analítico diverge das diferenças finitas"""
    exit_code = 6
    kind = "gradcheck"
