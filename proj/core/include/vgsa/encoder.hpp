#pragma once

#include <cstddef>
#include <span>
#include <string>

#include "vgsa/autodiff.hpp"
#include "vgsa/text_data.hpp"

namespace vgsa {

/// One LSTM cell. Gate rows are stacked in the order input, forget,
/// candidate, output:
///   [i f g o] = W x + U h_prev + b
///   c = sigmoid(f) * c_prev + sigmoid(i) * tanh(g),  h = sigmoid(o) * tanh(c)
struct LstmParams {
  Parameter input_weights;      // 4d x d_in
  Parameter recurrent_weights;  // 4d x d, four square d x d blocks
  Parameter bias;               // 4d x 1

  LstmParams() = default;
  LstmParams(const std::string& prefix, std::size_t d_in, std::size_t d_hidden);

  std::size_t hidden() const { return recurrent_weights.value.cols(); }
  std::size_t input() const { return input_weights.value.cols(); }
};

struct LstmState {
  Var h;  // d x 1
  Var c;  // d x 1
};

LstmState lstm_zero_state(Graph& g, std::size_t hidden);
LstmState lstm_step(Graph& g, LstmParams& p, Var x, const LstmState& prev);
/// Same recurrence when W x has already been computed (column of W X).
LstmState lstm_step_projected(Graph& g, LstmParams& p, Var wx, const LstmState& prev);

struct EncoderParams {
  LstmParams forward;
  LstmParams backward;
  Parameter attn_hidden;  // W_a1: d_a x d_cell
  Parameter attn_heads;   // W_a2: n_a x d_a

  EncoderParams() = default;
  EncoderParams(std::size_t d_e, std::size_t d_cell, std::size_t d_a, std::size_t n_a);

  std::size_t cell() const { return forward.hidden(); }
};

struct EncoderStates {
  Var states;          // H: d_cell x T, column t = max(forward_t, backward_t)
  Var final_forward;   // forward state after the last token, d_cell x 1
  Var final_backward;  // backward state after the first token, d_cell x 1
};

struct AttentionOutput {
  Var weights;  // A: n_a x T, rows sum to one
  Var context;  // C: n_a x d_cell, row i = sum_t A[i,t] H[:,t]
};

struct SentenceRepresentation {
  Var recurrent;  // h_S: 1 x d_cell
  Var attended;   // h_A: 1 x d_cell
  Var combined;   // h = [h_A, h_S]: 1 x 2 d_cell
};

/// Runs both directions over the embedded tokens. `tokens` holds only real
/// tokens (no BOS/EOS/PAD); returns the states and h_S = max(f_T, b_1) as a row.
std::pair<EncoderStates, Var> encode(Graph& g, EncoderParams& p, Parameter& embeddings,
                                     std::span<const TokenId> tokens);

AttentionOutput attend(Graph& g, EncoderParams& p, Var states);

SentenceRepresentation compose(const AttentionOutput& attention, Var recurrent);

struct EncodedSentence {
  SentenceRepresentation rep;
  AttentionOutput attention;
  EncoderStates states;
};

EncodedSentence encode_sentence(Graph& g, EncoderParams& p, Parameter& embeddings,
                                std::span<const TokenId> tokens);

}  // namespace vgsa
