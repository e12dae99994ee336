# NLS-GI inverse scattering engine
# Forward scattering, Riemann-Hilbert inversion and time evolution

__version__ = "1.0.0"
