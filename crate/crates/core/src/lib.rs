pub mod corpus;
pub mod encoder;
pub mod eval;
pub mod gcn;
pub mod graphs;
pub mod model;
pub mod multiview;
pub mod numerics;
pub mod synth;
pub mod tagger;
pub mod trainer;
pub mod tuple;
