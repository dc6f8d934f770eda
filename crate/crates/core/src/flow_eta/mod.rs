//! Families of boundary operators: eigenvalue curves, spectral flow by crossing
//! count and by spectral sections, and the relative eta invariant with its dual,
//! heat-trace and flow comparisons.

mod eta;
mod family;
mod flow;

pub use eta::{
    check_eta_equals_2sf, default_cobordism, eta_properties, relative_eta, relative_eta_heat, EtaFlowVerdict,
    EtaOptions, EtaProperties, EtaReport, HeatOptions, COBORDISM_INTERVALS, SECOND_COBORDISM_INTERVALS,
};
pub use family::FamilySpec;
pub use flow::{
    eigencurves, spectral_flow, spectral_flow_both, Crossing, Eigencurves, FlowComparison, FlowMethod, FlowResult,
    CROSSING_WIDTH,
};
