#include "vgsa/decoder.hpp"

#include <algorithm>
#include <stdexcept>

namespace vgsa {

DecoderParams::DecoderParams(std::size_t vocab, std::size_t d_e, std::size_t d_cell)
    : init_h("decoder.P_h", Matrix(d_cell, 2 * d_cell)),
      init_c("decoder.P_c", Matrix(d_cell, 2 * d_cell)),
      cell("decoder.lstm", d_e, d_cell),
      out_weights("decoder.W_o", Matrix(vocab, d_cell)),
      out_bias("decoder.b_o", Matrix(vocab, 1)) {}

LstmState init_state(Graph& g, DecoderParams& p, Var sentence) {
  const std::size_t expected = 2 * p.cell_width();
  if (sentence.rows() != 1 || sentence.cols() != expected) {
    throw ShapeError("init_state: representation " + sentence.value().shape_string() +
                     " vs expected [1x" + std::to_string(expected) + "]");
  }
  Var column = ad::transpose(sentence);
  return {ad::tanh(ad::matmul(g.param(p.init_h), column)),
          ad::tanh(ad::matmul(g.param(p.init_c), column))};
}

std::size_t predicted_tokens(std::span<const TokenId> tgt) {
  if (tgt.size() < 2) return 0;
  return static_cast<std::size_t>(
      std::count_if(tgt.begin() + 1, tgt.end(), [](TokenId t) { return t != kPad; }));
}

Var caption_nll(Graph& g, DecoderParams& p, Parameter& embeddings, Var sentence,
                std::span<const TokenId> tgt) {
  if (tgt.size() < 2) throw std::invalid_argument("caption_nll: target must have length >= 2");
  LstmState s = init_state(g, p, sentence);
  Var w_o = g.param(p.out_weights);
  Var b_o = g.param(p.out_bias);

  std::vector<Var> terms;
  terms.reserve(tgt.size() - 1);
  for (std::size_t t = 1; t < tgt.size(); ++t) {
    if (tgt[t] == kPad) continue;
    s = lstm_step(g, p.cell, g.lookup(embeddings, tgt[t - 1]), s);
    Var logits = ad::add(ad::matmul(w_o, s.h), b_o);
    terms.push_back(ad::softmax_cross_entropy(logits, tgt[t]));
  }
  if (terms.empty()) return g.constant(Matrix(1, 1));
  return ad::add_n(terms);
}

Var batch_caption_nll(Graph& g, DecoderParams& p, Parameter& embeddings,
                      std::span<const Var> sentences,
                      std::span<const std::vector<TokenId>> targets) {
  if (sentences.size() != targets.size() || sentences.empty()) {
    throw std::invalid_argument("batch_caption_nll: need one target per representation");
  }
  std::vector<Var> per_sample;
  per_sample.reserve(sentences.size());
  for (std::size_t k = 0; k < sentences.size(); ++k) {
    per_sample.push_back(caption_nll(g, p, embeddings, sentences[k], targets[k]));
  }
  return ad::scale(ad::add_n(per_sample), 1.0 / static_cast<double>(sentences.size()));
}

std::vector<TokenId> greedy_decode(DecoderParams& p, Parameter& embeddings, const Matrix& sentence,
                                   std::size_t max_len) {
  if (max_len < 1) throw std::invalid_argument("greedy_decode: max_len must be >= 1");
  Graph g;
  LstmState s = init_state(g, p, g.constant(sentence));
  Var w_o = g.param(p.out_weights);
  Var b_o = g.param(p.out_bias);
  std::vector<TokenId> out;
  TokenId prev = kBos;
  while (out.size() < max_len) {
    s = lstm_step(g, p.cell, g.lookup(embeddings, prev), s);
    const Matrix& logits = ad::add(ad::matmul(w_o, s.h), b_o).value();
    const auto best = std::max_element(logits.data().begin(), logits.data().end());
    prev = static_cast<TokenId>(best - logits.data().begin());
    out.push_back(prev);
    if (prev == kEos) break;
  }
  return out;
}

}  // namespace vgsa
