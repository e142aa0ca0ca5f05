//! Question retrieval for community question answering over a heterogeneous
//! network of questions, askers and categories.
//!
//! Questions are encoded by an LSTM over their sentences, max-pooled and
//! concatenated with a learned embedding of the asker. Training samples random
//! walks over the question/user/category graph and minimizes a triplet hinge
//! loss on question nodes together with a friend-proximity loss on user nodes.
//! Content-only (VSM, BM25) and graph-only (DeepWalk) rankers are provided for
//! comparison, along with MAP / P@N / MRR evaluation.
//!
//! See the crate `examples/` directory for one runnable program per capability.

pub mod checkpoint;
pub mod cli;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod experiment;
pub mod gradcheck;
pub mod hetnet;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod retrieval;
pub mod rng;
pub mod sgns;
pub mod training;

pub use corpus::{load_corpus, Corpus, Question, QuestionRecord, SynthSpec, UserRecord, Vocab};
pub use encoder::{Dims, ModelParams, QuestionVec};
pub use error::{Error, Result};
pub use hetnet::{HetGraph, HetNode, Walk, Window};
pub use metrics::EvalReport;
pub use model::Model;
pub use retrieval::{RankedList, Ranker, RankerKind, Scored};
pub use training::{Hyper, TrainReport};
