//! Item content representations: tokenization, skip-gram word vectors
//! trained on the item corpus, sentence averaging, and import of
//! externally computed sentence embeddings.

mod content;
mod preprocess;
mod word2vec;

pub use content::{content_matrix, content_repr, import_external, ContentVector};
pub use preprocess::{apply_pos_filter, parse_tagged_tokens, preprocess, TaggedToken, TokenizedDoc, DEFAULT_STOPWORDS};
pub use word2vec::{sgns_pair_gradient, train_word_vectors, SgnsGradient, WordVectorConfig, WordVectors};
