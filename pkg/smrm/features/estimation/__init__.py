"""Penalised EM estimation of coefficients and residual precision."""
