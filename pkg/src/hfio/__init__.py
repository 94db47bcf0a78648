"""Numerics for semiclassical Fourier integral operators.

Discretizes operators of the form

    (F_h phi)(x) = (2 pi h)^(-n) iint e^{i(S(x,theta) - y.theta)/h}
                   a(x,theta) phi(y) dy dtheta

and verifies their theory at desk scale: phase/amplitude hypothesis
validation, regularized oscillatory integrals, kernel assembly, the
pseudodifferential symbol calculus of F F* and F* F, and spectral
evidence for L2 boundedness and compactness.
"""

from .core import (
    DerivativeRequest,
    Grid,
    HValue,
    ScalarField,
    fd_derivative,
    field_from_callable,
    make_grid,
    weight,
)
from .calculus import (
    ComparisonReport,
    SymbolSamples,
    compare_symbols,
    cv_bound_check,
    cv_seminorm,
    extract_symbol,
    predicted_symbol,
)
from .operator import (
    FIOSpec,
    KernelMatrix,
    adjoint,
    apply,
    assemble,
    compose_ffstar,
    compose_fstarf,
    kernel_value,
    load_field,
    load_kernel,
    save_field,
    save_kernel,
)
from .oscillatory import (
    CutoffSpec,
    IBPSpec,
    OscillatoryResult,
    cutoff_independence_test,
    osc_integral,
)
from .phase import (
    PhaseSpec,
    QuadraticPhase,
    ValidationReport,
    check_separation,
    invert_dthetaS,
    invert_dxS,
    omega_region_check,
    validate_G,
    validate_H_via_lemma,
)
from .presets import (
    amplitude_preset,
    bundled_test_fields,
    phase_preset,
)
from .spectral import (
    SpectrumReport,
    power_iteration_norm,
    rank_truncation_curve,
    spectrum,
    uniformity_scan,
)
from .symbols import (
    AmplitudeSpec,
    SeminormTable,
    check_membership,
    estimate_seminorms,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
