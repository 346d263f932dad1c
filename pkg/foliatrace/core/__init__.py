"""Núcleo numérico do foliatrace: modelos, cálculo básico, espectro, fluxo, traço e persistência."""
