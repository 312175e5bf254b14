#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "vgsa/model.hpp"
#include "vgsa/text_data.hpp"

namespace vgsa {

// Everything here runs in eval mode (no dropout) on frozen parameters.

/// Row k = h for sample k (n x 2 d_cell).
Matrix encode_representations(ModelParameters& model, std::span<const Sample> samples);
/// Row k = projected image feature for sample k (n x d_img).
Matrix predict_images(ModelParameters& model, std::span<const Sample> samples);

enum class RetrievalDirection { kSentenceToImage, kImageToSentence };

struct RetrievalReport {
  RetrievalDirection direction = RetrievalDirection::kSentenceToImage;
  double recall_at_1 = 0.0;
  double recall_at_5 = 0.0;
  double recall_at_10 = 0.0;
  double median_rank = 0.0;
  std::size_t pool = 0;
  std::vector<std::size_t> ranks;  // 1-based rank of the true match per query
};

struct RetrievalPair {
  RetrievalReport sentence_to_image;
  RetrievalReport image_to_sentence;
};

/// Rank of the true match per query given S[i,j] = sim(sentence i, image j).
/// Candidates with equal score are ordered by corpus index.
RetrievalPair retrieval_from_similarity(const Matrix& similarity);
RetrievalReport summarize_ranks(RetrievalDirection direction, std::vector<std::size_t> ranks);

/// Encodes every sample, projects it, and ranks all image features by cosine
/// similarity in both directions. Requires at least two samples.
RetrievalPair retrieval_eval(ModelParameters& model, std::span<const Sample> samples);

std::string to_json(const RetrievalPair& report);

struct SalienceRecord {
  std::vector<std::string> tokens;
  Matrix attention;            // n_a x T
  std::vector<double> pooled;  // max over heads, per token

  std::string to_json() const;
};

/// Attention weights of the encoder over a sentence. Out-of-vocabulary words
/// are kept as <unk>; a sentence with no in-vocabulary token is rejected.
SalienceRecord salience(ModelParameters& model, const Vocabulary& vocab, std::string_view sentence);
SalienceRecord salience(ModelParameters& model, const Vocabulary& vocab, std::span<const TokenId> tokens);

/// One whitespace-separated 2 d_cell vector per input line. A line with no
/// tokens is encoded as a single <unk>.
void embed(ModelParameters& model, const Vocabulary& vocab, std::istream& in, std::ostream& out);

/// Mean per-token caption NLL over the samples (teacher forcing).
double mean_token_nll(ModelParameters& model, std::span<const Sample> samples);

/// Fraction of target tokens reproduced at the same position by greedy decoding.
double copy_accuracy(ModelParameters& model, std::span<const Sample> samples);

}  // namespace vgsa
