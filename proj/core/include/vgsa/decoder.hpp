#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "vgsa/encoder.hpp"

namespace vgsa {

/// Conditional language model over the target caption. The sentence
/// representation only enters through the initial state.
struct DecoderParams {
  Parameter init_h;  // P_h: d_cell x 2 d_cell
  Parameter init_c;  // P_c: d_cell x 2 d_cell
  LstmParams cell;   // input d_e, hidden d_cell
  Parameter out_weights;  // W_o: V x d_cell
  Parameter out_bias;     // b_o: V x 1

  DecoderParams() = default;
  DecoderParams(std::size_t vocab, std::size_t d_e, std::size_t d_cell);

  std::size_t cell_width() const { return cell.hidden(); }
};

/// h_0 = tanh(P_h h^T), c_0 = tanh(P_c h^T) for a 1 x 2d representation h.
LstmState init_state(Graph& g, DecoderParams& p, Var sentence);

/// Teacher-forced negative log-likelihood of one BOS...EOS wrapped target,
/// summed over predicted positions 1..|tgt|-1. PAD targets contribute nothing.
Var caption_nll(Graph& g, DecoderParams& p, Parameter& embeddings, Var sentence,
                std::span<const TokenId> tgt);

/// Number of non-PAD predicted positions in a wrapped target.
std::size_t predicted_tokens(std::span<const TokenId> tgt);

/// Mean over the batch of per-sample caption_nll.
Var batch_caption_nll(Graph& g, DecoderParams& p, Parameter& embeddings,
                      std::span<const Var> sentences,
                      std::span<const std::vector<TokenId>> targets);

/// Argmax decoding from BOS until EOS (included) or max_len tokens.
std::vector<TokenId> greedy_decode(DecoderParams& p, Parameter& embeddings, const Matrix& sentence,
                                   std::size_t max_len);

}  // namespace vgsa
