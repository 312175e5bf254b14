#include "vgsa/grounding.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace vgsa {

ProjectionParams::ProjectionParams(std::size_t d_in, std::size_t d_hidden, std::size_t d_img) {
  const std::array<std::size_t, 5> widths{d_in, d_hidden, d_hidden, d_hidden, d_img};
  for (std::size_t l = 0; l < 4; ++l) {
    const std::string prefix = "projection." + std::to_string(l);
    weights[l] = Parameter(prefix + ".W", Matrix(widths[l + 1], widths[l]));
    biases[l] = Parameter(prefix + ".b", Matrix(widths[l + 1], 1));
  }
}

Var project(Graph& g, ProjectionParams& p, Var sentence, const ForwardMode& mode) {
  const std::size_t expected = p.weights[0].value.cols();
  if (sentence.rows() != 1 || sentence.cols() != expected) {
    throw ShapeError("project: representation " + sentence.value().shape_string() +
                     " vs expected [1x" + std::to_string(expected) + "]");
  }
  Var x = ad::transpose(sentence);
  for (std::size_t l = 0; l < 4; ++l) {
    x = ad::add(ad::matmul(g.param(p.weights[l]), x), g.param(p.biases[l]));
    if (l < 3) {
      x = ad::relu(x);
      if (mode.train && mode.rng != nullptr && mode.dropout > 0.0) {
        x = ad::dropout(x, mode.dropout, *mode.rng);
      }
    }
  }
  return ad::transpose(x);
}

Var log_exp_sum_rank_loss(Var similarities) {
  const Matrix& s = similarities.value();
  const std::size_t b = s.rows();
  if (b != s.cols()) throw ShapeError("ranking loss: similarity matrix " + s.shape_string() + " is not square");
  if (b < 2) throw std::invalid_argument("ranking loss: batch size must be at least 2");

  // Per-term weights exp(clamped gap); clamped terms carry no gradient.
  Matrix row_terms(b, b);  // (k, j): corrupt image, exponent S[k,j] - S[k,k]
  Matrix col_terms(b, b);  // (k, j): corrupt sentence, exponent S[j,k] - S[k,k]
  Matrix row_live(b, b);
  Matrix col_live(b, b);
  double total = 0.0;
  for (std::size_t k = 0; k < b; ++k) {
    for (std::size_t j = 0; j < b; ++j) {
      if (j == k) continue;
      const double gap_row = s(k, j) - s(k, k);
      const double gap_col = s(j, k) - s(k, k);
      row_live(k, j) = gap_row < kRankExponentClamp ? 1.0 : 0.0;
      col_live(k, j) = gap_col < kRankExponentClamp ? 1.0 : 0.0;
      row_terms(k, j) = std::exp(std::min(gap_row, kRankExponentClamp));
      col_terms(k, j) = std::exp(std::min(gap_col, kRankExponentClamp));
      total += row_terms(k, j) + col_terms(k, j);
    }
  }
  const double loss = std::log1p(total);
  const double inv = 1.0 / (1.0 + total);

  return similarities.graph().record(
      Matrix(1, 1, loss), {similarities},
      [=, row_terms = std::move(row_terms), col_terms = std::move(col_terms),
       row_live = std::move(row_live), col_live = std::move(col_live)](
          const Matrix&, const Matrix& g, std::span<Matrix* const> in) {
        Matrix& ds = *in[0];
        const double scale = g[0] * inv;
        for (std::size_t k = 0; k < b; ++k) {
          for (std::size_t j = 0; j < b; ++j) {
            if (j == k) continue;
            const double wr = scale * row_terms(k, j) * row_live(k, j);
            const double wc = scale * col_terms(k, j) * col_live(k, j);
            ds(k, j) += wr;
            ds(j, k) += wc;
            ds(k, k) -= wr + wc;
          }
        }
      });
}

Var ranking_loss(Var predicted, Var targets) {
  if (!predicted.value().same_shape(targets.value())) {
    throw ShapeError("ranking_loss: predicted " + predicted.value().shape_string() +
                     " vs targets " + targets.value().shape_string());
  }
  if (predicted.rows() < 2) throw std::invalid_argument("ranking_loss: batch size must be at least 2");
  return log_exp_sum_rank_loss(ad::cosine_similarity(predicted, targets));
}

Var grounding_loss(Graph& g, ProjectionParams& p, std::span<const Var> sentences,
                   const Matrix& targets, const ForwardMode& mode) {
  if (sentences.size() != targets.rows()) {
    throw ShapeError("grounding_loss: " + std::to_string(sentences.size()) +
                     " representations vs targets " + targets.shape_string());
  }
  std::vector<Var> predicted;
  predicted.reserve(sentences.size());
  for (Var s : sentences) predicted.push_back(project(g, p, s, mode));
  return ranking_loss(ad::stack_rows(predicted), g.constant(targets));
}

}  // namespace vgsa
