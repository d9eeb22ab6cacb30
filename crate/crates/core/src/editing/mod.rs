//! Regeneration from inverted latents, prompt guidance and relevance masks.

mod guidance;
mod mask;
mod nsli;
mod pipeline;
mod regen;

pub use guidance::{dpg_velocity, guidance_velocity, pg_velocity, project, GuidanceConfig, GuidanceMode, MaskMode};
pub use mask::{relevance_from_velocities, relevance_map, threshold_mask, Mask};
pub use nsli::nsli_anchors;
pub use pipeline::{analytic_nfe, edit, is_canonical_configuration, nli_edit, EditResult, RegenStrategy};
pub use regen::{ili_step, mu};
