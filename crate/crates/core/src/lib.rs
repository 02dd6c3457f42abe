//! Citation matching engine.
//!
//! Links raw bibliography reference strings to document metadata records:
//! references are tokenized and parsed into fields by a linear sequence
//! tagger, candidate documents are retrieved through an approximate
//! author-token rotation index, candidates are scored by a linear classifier
//! over field similarities, and the whole process runs at scale through a
//! single-machine map-reduce pipeline over sorted binary key-value storage.

pub mod cli;
pub mod clustering;
pub mod corpus;
pub mod index;
pub mod matcher;
pub mod mapfile;
pub mod mapred;
pub mod parser;
pub mod pipeline;
pub mod seqfile;
pub mod similarity;
pub mod synth;
pub mod tokenizer;
