//! Riccati equations, H∞ norm and output-feedback H∞ synthesis.

pub mod care;
pub mod norm;
pub mod syn;

pub use care::{solve_care, solve_care_with, CareOptions, RiccatiSolution};
pub use norm::{hinf_norm, HinfNorm, DEFAULT_NORM_REL_TOL};
pub use syn::{
    hinf_opt_gamma, hinf_opt_gamma_with, hinf_syn, hinf_syn_with, Certificate, Infeasibility, OptimalLevel,
    SynOptions, SynthesisResult, DEFAULT_GAMMA_REL_TOL, GAMMA_FLOOR,
};
