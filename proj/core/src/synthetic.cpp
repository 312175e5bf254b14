#include "vgsa/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace vgsa {
namespace {

std::string numbered(char prefix, std::size_t i) {
  std::string digits = std::to_string(i);
  if (digits.size() < 2) digits.insert(0, 2 - digits.size(), '0');
  return std::string(1, prefix) + digits;
}

}  // namespace

SyntheticCorpus gen_synthetic(std::size_t n, std::size_t content_vocab, std::size_t d_img,
                              std::uint64_t seed) {
  if (content_vocab < 8) throw std::invalid_argument("gen_synthetic: content vocabulary must be >= 8");
  if (d_img == 0) throw std::invalid_argument("gen_synthetic: d_img must be positive");

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(static_cast<double>(d_img)));

  const std::size_t n_visual = content_vocab / 4;
  SyntheticCorpus out;
  std::vector<std::string> filler;
  for (std::size_t i = 0; i < content_vocab; ++i) {
    const bool visual = i < n_visual;
    std::string tok = visual ? numbered('v', i) : numbered('w', i - n_visual);
    std::vector<double> code(d_img);
    for (double& c : code) c = gauss(rng);
    out.codes.emplace(tok, std::move(code));
    (visual ? out.visual_tokens : filler).push_back(std::move(tok));
  }

  out.corpus.d_img = d_img;
  out.corpus.records.reserve(n);
  std::vector<std::size_t> pool(filler.size());
  for (std::size_t s = 0; s < n; ++s) {
    const std::size_t length = 3 + static_cast<std::size_t>(rng() % 6);  // 3..8
    const std::size_t n_filler = std::min(length - 1, filler.size());

    std::iota(pool.begin(), pool.end(), 0);
    std::vector<std::string> words;
    for (std::size_t k = 0; k < n_filler; ++k) {
      const std::size_t pick = k + static_cast<std::size_t>(rng() % (pool.size() - k));
      std::swap(pool[k], pool[pick]);
      words.push_back(filler[pool[k]]);
    }
    const std::string& salient = out.visual_tokens[rng() % out.visual_tokens.size()];
    words.push_back(salient);
    for (std::size_t i = words.size(); i > 1; --i) {
      std::swap(words[i - 1], words[static_cast<std::size_t>(rng() % i)]);
    }

    std::vector<double> img(d_img, 0.0);
    for (const auto& w : words) {
      const double weight = w == salient ? kSalientWeight : 1.0;
      const auto& code = out.codes.at(w);
      for (std::size_t j = 0; j < d_img; ++j) img[j] += weight * code[j];
    }
    const double norm = std::sqrt(std::inner_product(img.begin(), img.end(), img.begin(), 0.0));
    for (double& v : img) v /= norm;

    std::string text;
    for (const auto& w : words) {
      if (!text.empty()) text += ' ';
      text += w;
    }
    std::string id = std::to_string(s);
    id.insert(0, id.size() < 6 ? 6 - id.size() : 0, '0');
    out.corpus.records.push_back(CaptionRecord{"s" + id, text, text, std::move(img), salient});
  }
  return out;
}

}  // namespace vgsa
