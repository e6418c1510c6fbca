//! Particle-based belief-propagation SLAM engine.

mod association;
mod engine;
mod factors;
mod types;

pub use association::loopy_data_association;
pub use engine::{
    estimate, evaluate, initial_agent, predict_agent, predict_features, update_beliefs, AnchorEvaluation, Estimate,
    FeatureEstimate, SlamState, SurfacePolicy, UpdateReport,
};
pub use factors::{apparent_source, g_factor, h_factor, image_of, range_density, toa_likelihood};
pub use types::{
    systematic_resample, AgentBelief, AgentState, AssociationMarginals, FeatureBelief, FeatureKind, SlamParams,
};
