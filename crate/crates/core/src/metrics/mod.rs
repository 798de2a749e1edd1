//! Scoring of synthesized audio against a reference: multi-resolution
//! spectral distances, a mel distance, and the forward pass of a spectral
//! discriminator ensemble with least-squares objectives.

pub mod discriminator;
pub mod losses;

pub use discriminator::{
    conv2d, discriminator_forward, mean_scores, score_map, submodel_input, Conv2dLayer, DiscriminatorSpec,
    DiscriminatorWeights, SubmodelSpec,
};
pub use losses::{
    l1_spectral_loss, l1_spectral_loss_grad, l1_spectral_terms, loss_log_mel, lsgan_ensemble, lsgan_losses,
    mel_l1_distance, mel_l1_loss, L1_WEIGHT,
};
