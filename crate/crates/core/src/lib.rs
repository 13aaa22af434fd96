pub mod alignment;
pub mod audio;
pub mod corpus;
pub mod evalbench;
pub mod inference;
pub mod latent;
pub mod networks;
pub mod phonemizer;
pub mod training;
