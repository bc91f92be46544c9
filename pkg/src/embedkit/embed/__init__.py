"""Word embedding models: GloVe, word2vec (CBOW, skip-gram) and fastText."""

from .config import ALGORITHMS, OBJECTIVES, EmbConfig
from .glove import CooccurrenceMap, GloveState, build_cooccurrence, glove_epoch, glove_objective, glove_weight
from .matrix import (
    EmbeddingFormatError,
    EmbeddingMatrix,
    fasttext_word_vector,
    load_embeddings,
    nearest_neighbors,
    parse_header,
    save_embeddings,
)
from .subword import SubwordIndex, extract_ngrams, fnv1a
from .train import train_embeddings, train_on_sentences
from .word2vec import (
    HuffmanTree,
    NegativeSampler,
    cbow_loss_and_grads,
    cbow_step,
    hierarchical_softmax_loss,
    make_unigram_sampler,
    sgns_loss_and_grads,
    sgns_step,
)
