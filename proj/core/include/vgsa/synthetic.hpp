#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "vgsa/text_data.hpp"

namespace vgsa {

/// Desk-scale stand-in for a captioned image collection.
///
/// The content vocabulary is split into "visual" tokens (the first quarter)
/// and filler tokens. Every caption holds exactly one visual token, which is
/// the sample's salient token, plus 2-7 distinct filler tokens in random
/// order; the target caption is a copy of the source. Each token owns a fixed
/// Gaussian code drawn from N(0, I)/sqrt(d_img), and a sample's image vector is
/// the L2-normalized sum of its token codes with the salient code weighted 4x.
struct SyntheticCorpus {
  Corpus corpus;
  std::map<std::string, std::vector<double>> codes;
  std::vector<std::string> visual_tokens;
};

inline constexpr double kSalientWeight = 4.0;

SyntheticCorpus gen_synthetic(std::size_t n, std::size_t content_vocab, std::size_t d_img,
                              std::uint64_t seed);

}  // namespace vgsa
