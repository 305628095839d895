pub mod corpus;
pub mod rules;
pub mod inverse;
pub mod lm;
pub mod segment;
pub mod langid;
pub mod synth;
pub mod corrector;
pub mod eval;
pub mod pipeline;
