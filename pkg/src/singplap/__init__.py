"""Numerical laboratory for singular quasilinear Dirichlet problems

    -Δ_p u + θ|∇u|^q = u^(-γ) + f(u)  in Ω,   u = 0 on ∂Ω.
"""

__version__ = "0.1.0"
