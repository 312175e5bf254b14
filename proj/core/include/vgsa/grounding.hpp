#pragma once

#include <array>
#include <cstddef>
#include <random>
#include <span>

#include "vgsa/autodiff.hpp"

namespace vgsa {

/// Four affine layers 2d -> d_p -> d_p -> d_p -> d_img with ReLU and dropout
/// after each of the first three.
struct ProjectionParams {
  std::array<Parameter, 4> weights;
  std::array<Parameter, 4> biases;

  ProjectionParams() = default;
  ProjectionParams(std::size_t d_in, std::size_t d_hidden, std::size_t d_img);

  std::size_t output_width() const { return weights[3].value.rows(); }
};

/// Dropout settings for a forward pass. Dropout is active only when `train`
/// is set and an rng is supplied.
struct ForwardMode {
  bool train = false;
  double dropout = 0.0;
  std::mt19937_64* rng = nullptr;

  static ForwardMode eval() { return {}; }
};

/// Maps a 1 x 2d representation to a 1 x d_img predicted image feature.
Var project(Graph& g, ProjectionParams& p, Var sentence, const ForwardMode& mode);

/// Exponent cap inside the ranking loss.
inline constexpr double kRankExponentClamp = 30.0;

/// log(1 + sum_k sum_{j != k} [exp(S[k,j] - S[k,k]) + exp(S[j,k] - S[k,k])])
/// for a B x B similarity matrix with S[i,j] = sim(predicted_i, target_j).
/// Each exponent is clamped at kRankExponentClamp.
Var log_exp_sum_rank_loss(Var similarities);

/// Cosine similarities between predicted and target rows, then the loss above.
Var ranking_loss(Var predicted, Var targets);

/// Projects every representation and applies ranking_loss against `targets`
/// (B x d_img, row k pairs with representation k).
Var grounding_loss(Graph& g, ProjectionParams& p, std::span<const Var> sentences,
                   const Matrix& targets, const ForwardMode& mode);

}  // namespace vgsa
