#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "vgsa/matrix.hpp"

namespace vgsa {

using TokenId = std::uint32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kBos = 2;
inline constexpr TokenId kEos = 3;
inline constexpr std::size_t kReservedTokens = 4;

/// Raised for malformed corpus, embedding or checkpoint input.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Lowercases, splits on whitespace and strips leading/trailing .,!?;:"()
/// Tokens that become empty after stripping are dropped.
std::vector<std::string> tokenize(std::string_view text);

class Vocabulary {
 public:
  /// Keeps tokens seen at least `min_count` times. Ids after the reserved
  /// block are ordered by descending frequency, then lexicographically.
  static Vocabulary build(std::span<const std::string> texts, std::size_t min_count = 1);
  /// Restores a vocabulary from its id-ordered token list (reserved tokens included).
  static Vocabulary from_tokens(std::vector<std::string> tokens);

  std::size_t size() const { return tokens_.size(); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(TokenId id) const { return tokens_.at(id); }
  std::optional<TokenId> find(std::string_view token) const;
  TokenId id(std::string_view token) const { return find(token).value_or(kUnk); }

  /// Token ids for `text`; unknown words map to UNK. `wrap` adds BOS/EOS.
  std::vector<TokenId> encode(std::string_view text, bool wrap) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// A corpus entry as stored on disk: caption texts plus a precomputed image
/// feature vector. `salient` is only set by the synthetic generator.
struct CaptionRecord {
  std::string id;
  std::string src;
  std::string tgt;
  std::vector<double> img;
  std::string salient;

  bool operator==(const CaptionRecord&) const = default;
};

struct Corpus {
  std::size_t d_img = 0;
  std::vector<CaptionRecord> records;

  std::vector<std::string> texts() const;
  bool operator==(const Corpus&) const = default;
};

// JSONL: first line {"d_img": N}, then one {"id","src","tgt","img"[,"salient"]} per line.
Corpus read_corpus(std::istream& in);
Corpus read_corpus(const std::filesystem::path& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Model-ready sample: BOS/EOS wrapped token ids and the image feature vector.
struct Sample {
  std::string id;
  std::vector<TokenId> src;
  std::vector<TokenId> tgt;
  std::vector<double> img;
  std::string salient;
};

std::vector<Sample> make_samples(const Corpus& corpus, const Vocabulary& vocab);

/// Interior tokens of a BOS/EOS wrapped sequence, stopping at the first PAD.
std::vector<TokenId> strip_markers(std::span<const TokenId> wrapped);

struct EmbeddingTable {
  Matrix weights;  // V x d_e; row 0 (PAD) is zero
  double coverage = 0.0;
};

/// Reads GloVe-style text vectors. Rows for tokens found in the file are
/// copied verbatim, the rest are drawn uniformly from [-0.1, 0.1].
EmbeddingTable load_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t d_e,
                               std::uint64_t seed);
EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               std::size_t d_e, std::uint64_t seed);

/// B samples with padded sequences, masks and in-batch negatives.
struct Batch {
  std::vector<const Sample*> samples;
  std::vector<std::vector<TokenId>> src;  // padded with PAD to the batch max length
  std::vector<std::vector<TokenId>> tgt;
  std::vector<std::vector<std::uint8_t>> src_mask;
  std::vector<std::vector<std::uint8_t>> tgt_mask;
  /// negatives[k] lists every other batch index j != k.
  std::vector<std::vector<std::size_t>> negatives;

  std::size_t size() const { return samples.size(); }
};

/// Requires at least two samples with distinct ids.
Batch assemble_batch(std::span<const Sample* const> samples);

/// One epoch of batches. The order is a seeded shuffle keyed on (seed, epoch);
/// a trailing batch is kept only if it holds at least two samples.
std::vector<Batch> make_batches(std::span<const Sample> samples, std::size_t batch_size,
                                std::uint64_t seed, std::uint64_t epoch);

}  // namespace vgsa
