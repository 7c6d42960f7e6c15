"""
PPF - Previsão de fluxo potencial de passageiros para áreas sem estação
"""
__version__ = "1.0.0"
