#include "vgsa/encoder.hpp"

#include <vector>

namespace vgsa {

LstmParams::LstmParams(const std::string& prefix, std::size_t d_in, std::size_t d_hidden)
    : input_weights(prefix + ".W", Matrix(4 * d_hidden, d_in)),
      recurrent_weights(prefix + ".U", Matrix(4 * d_hidden, d_hidden), /*is_recurrent=*/true),
      bias(prefix + ".b", Matrix(4 * d_hidden, 1)) {}

LstmState lstm_zero_state(Graph& g, std::size_t hidden) {
  return {g.constant(Matrix(hidden, 1)), g.constant(Matrix(hidden, 1))};
}

LstmState lstm_step_projected(Graph& g, LstmParams& p, Var wx, const LstmState& prev) {
  const std::size_t d = p.hidden();
  if (wx.rows() != 4 * d || wx.cols() != 1) {
    throw ShapeError("lstm_step: projected input " + wx.value().shape_string() + " vs hidden " +
                     std::to_string(d));
  }
  if (prev.h.rows() != d || prev.c.rows() != d || prev.h.cols() != 1 || prev.c.cols() != 1) {
    throw ShapeError("lstm_step: previous state " + prev.h.value().shape_string() + "/" +
                     prev.c.value().shape_string() + " vs hidden " + std::to_string(d));
  }
  Var gates = ad::add(ad::add(wx, ad::matmul(g.param(p.recurrent_weights), prev.h)), g.param(p.bias));
  Var in_gate = ad::sigmoid(ad::slice_rows(gates, 0, d));
  Var forget_gate = ad::sigmoid(ad::slice_rows(gates, d, d));
  Var candidate = ad::tanh(ad::slice_rows(gates, 2 * d, d));
  Var out_gate = ad::sigmoid(ad::slice_rows(gates, 3 * d, d));
  Var c = ad::add(ad::mul(forget_gate, prev.c), ad::mul(in_gate, candidate));
  Var h = ad::mul(out_gate, ad::tanh(c));
  return {h, c};
}

LstmState lstm_step(Graph& g, LstmParams& p, Var x, const LstmState& prev) {
  if (x.rows() != p.input() || x.cols() != 1) {
    throw ShapeError("lstm_step: input " + x.value().shape_string() + " vs expected [" +
                     std::to_string(p.input()) + "x1]");
  }
  return lstm_step_projected(g, p, ad::matmul(g.param(p.input_weights), x), prev);
}

EncoderParams::EncoderParams(std::size_t d_e, std::size_t d_cell, std::size_t d_a, std::size_t n_a)
    : forward("encoder.fwd", d_e, d_cell),
      backward("encoder.bwd", d_e, d_cell),
      attn_hidden("encoder.attn.W1", Matrix(d_a, d_cell)),
      attn_heads("encoder.attn.W2", Matrix(n_a, d_a)) {}

std::pair<EncoderStates, Var> encode(Graph& g, EncoderParams& p, Parameter& embeddings,
                                     std::span<const TokenId> tokens) {
  if (tokens.empty()) throw std::invalid_argument("encode: empty token sequence");
  const std::size_t T = tokens.size();
  const std::size_t d = p.cell();

  std::vector<Var> columns;
  columns.reserve(T);
  for (TokenId id : tokens) columns.push_back(g.lookup(embeddings, id));
  Var embedded = ad::concat_cols(columns);  // d_e x T

  Var fwd_in = ad::matmul(g.param(p.forward.input_weights), embedded);
  Var bwd_in = ad::matmul(g.param(p.backward.input_weights), embedded);

  std::vector<Var> fwd(T);
  std::vector<Var> bwd(T);
  LstmState s = lstm_zero_state(g, d);
  for (std::size_t t = 0; t < T; ++t) {
    s = lstm_step_projected(g, p.forward, ad::slice_cols(fwd_in, t, 1), s);
    fwd[t] = s.h;
  }
  s = lstm_zero_state(g, d);
  for (std::size_t t = T; t-- > 0;) {
    s = lstm_step_projected(g, p.backward, ad::slice_cols(bwd_in, t, 1), s);
    bwd[t] = s.h;
  }

  std::vector<Var> fused(T);
  for (std::size_t t = 0; t < T; ++t) fused[t] = ad::max2(fwd[t], bwd[t]);

  EncoderStates states{ad::concat_cols(fused), fwd[T - 1], bwd[0]};
  Var recurrent = ad::transpose(ad::max2(states.final_forward, states.final_backward));
  return {states, recurrent};
}

AttentionOutput attend(Graph& g, EncoderParams& p, Var states) {
  if (states.cols() == 0) throw std::invalid_argument("attend: no encoder states");
  Var hidden = ad::tanh(ad::matmul(g.param(p.attn_hidden), states));  // d_a x T
  Var weights = ad::softmax_rows(ad::matmul(g.param(p.attn_heads), hidden));
  Var context = ad::matmul(weights, ad::transpose(states));
  return {weights, context};
}

SentenceRepresentation compose(const AttentionOutput& attention, Var recurrent) {
  if (attention.context.cols() != recurrent.cols()) {
    throw ShapeError("compose: context " + attention.context.value().shape_string() +
                     " vs h_S " + recurrent.value().shape_string());
  }
  Var attended = ad::reduce_max_rows(attention.context);
  return {recurrent, attended, ad::concat_rows(attended, recurrent)};
}

EncodedSentence encode_sentence(Graph& g, EncoderParams& p, Parameter& embeddings,
                                std::span<const TokenId> tokens) {
  auto [states, recurrent] = encode(g, p, embeddings, tokens);
  AttentionOutput attention = attend(g, p, states.states);
  return {compose(attention, recurrent), attention, states};
}

}  // namespace vgsa
