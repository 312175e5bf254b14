#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "test_support.hpp"
#include "vgsa/encoder.hpp"
#include "vgsa/grad_check.hpp"

using namespace vgsa;
using vgsa::testing::random_matrix;

namespace {

constexpr std::size_t kVocab = 10;
constexpr std::size_t kEmbed = 4;
constexpr std::size_t kCell = 5;
constexpr std::size_t kAttn = 3;
constexpr std::size_t kHeads = 2;

void randomize(Parameter& p, std::mt19937_64& rng, double scale = 0.5) { p.value = random_matrix(p.value.rows(), p.value.cols(), rng, scale); }

struct Fixture {
  Parameter embeddings{"E", Matrix(kVocab, kEmbed)};
  EncoderParams enc{kEmbed, kCell, kAttn, kHeads};

  explicit Fixture(std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    randomize(embeddings, rng);
    for (LstmParams* l : {&enc.forward, &enc.backward}) {
      randomize(l->input_weights, rng);
      randomize(l->recurrent_weights, rng);
      randomize(l->bias, rng);
    }
    randomize(enc.attn_hidden, rng);
    randomize(enc.attn_heads, rng);
  }
};

Matrix column(const Matrix& m, std::size_t c) {
  Matrix out(m.rows(), 1);
  for (std::size_t r = 0; r < m.rows(); ++r) out(r, 0) = m(r, c);
  return out;
}

}  // namespace

TEST(LstmStep, ZeroWeightsGiveZeroState) {
  LstmParams p("cell", 3, 4);
  Graph g;
  const LstmState s = lstm_step(g, p, g.constant(Matrix(3, 1, 0.7)), lstm_zero_state(g, 4));
  EXPECT_EQ(s.h.value(), Matrix(4, 1));
  EXPECT_EQ(s.c.value(), Matrix(4, 1));
}

TEST(LstmStep, SaturatedGatesCarryCellState) {
  std::mt19937_64 rng(1);
  const std::size_t d = 3;
  LstmParams p("cell", 2, d);
  for (std::size_t r = 0; r < d; ++r) {
    p.bias.value(r, 0) = -30.0;     // input gate closed
    p.bias.value(d + r, 0) = 30.0;  // forget gate open
  }
  Graph g;
  const Matrix c_prev = random_matrix(d, 1, rng);
  const LstmState prev{g.constant(random_matrix(d, 1, rng)), g.constant(c_prev)};
  const LstmState s = lstm_step(g, p, g.constant(random_matrix(2, 1, rng)), prev);
  for (std::size_t r = 0; r < d; ++r) EXPECT_NEAR(s.c.value()(r, 0), c_prev(r, 0), 1e-12);
}

TEST(LstmStep, ShapeMismatchRejected) {
  LstmParams p("cell", 3, 4);
  Graph g;
  EXPECT_THROW(lstm_step(g, p, g.constant(Matrix(2, 1)), lstm_zero_state(g, 4)), ShapeError);
  EXPECT_THROW(lstm_step(g, p, g.constant(Matrix(3, 1)), lstm_zero_state(g, 3)), ShapeError);
}

TEST(LstmStep, ThreeStepBackwardMatchesFiniteDifferences) {
  std::mt19937_64 rng(2);
  LstmParams p("cell", 3, 4);
  randomize(p.input_weights, rng);
  randomize(p.recurrent_weights, rng);
  randomize(p.bias, rng);
  Parameter xs("xs", random_matrix(3, 3, rng));
  const Matrix w = random_matrix(4, 1, rng);
  Parameter* params[] = {&p.input_weights, &p.recurrent_weights, &p.bias, &xs};
  const double err = grad_check(
      [&](Graph& g) {
        LstmState s = lstm_zero_state(g, 4);
        Var x = g.param(xs);
        for (std::size_t t = 0; t < 3; ++t) s = lstm_step(g, p, ad::slice_cols(x, t, 1), s);
        return ad::sum(ad::mul(ad::add(s.h, s.c), g.constant(w)));
      },
      params);
  EXPECT_LT(err, 1e-4);
}

TEST(Encode, EmptySequenceRejected) {
  Fixture f(3);
  Graph g;
  EXPECT_THROW(encode(g, f.enc, f.embeddings, std::vector<TokenId>{}), std::invalid_argument);
}

TEST(Encode, SingleTokenStateEqualsSummary) {
  Fixture f(4);
  Graph g;
  const TokenId tokens[] = {5};
  auto [states, summary] = encode(g, f.enc, f.embeddings, tokens);
  ASSERT_EQ(states.states.cols(), 1u);
  EXPECT_EQ(states.states.value().transposed(), summary.value());
}

TEST(Encode, ZeroWeightsGiveZeroStates) {
  Parameter embeddings("E", Matrix(kVocab, kEmbed, 1.0));
  EncoderParams enc(kEmbed, kCell, kAttn, kHeads);
  Graph g;
  const TokenId tokens[] = {4, 5, 6};
  auto [states, summary] = encode(g, enc, embeddings, tokens);
  EXPECT_EQ(states.states.value(), Matrix(kCell, 3));
  EXPECT_EQ(summary.value(), Matrix(1, kCell));
}

TEST(Encode, TiedDirectionsMakePalindromeStatesSymmetric) {
  Fixture f(5);
  f.enc.backward = f.enc.forward;
  const TokenId palindrome[] = {4, 7, 4};
  Graph g;
  const Matrix h = encode(g, f.enc, f.embeddings, palindrome).first.states.value();
  EXPECT_EQ(column(h, 0), column(h, 2));

  // Reversing any sequence reverses the state columns under tied weights.
  const TokenId seq[] = {4, 8, 6, 5};
  const TokenId rev[] = {5, 6, 8, 4};
  const Matrix hs = encode(g, f.enc, f.embeddings, seq).first.states.value();
  const Matrix hr = encode(g, f.enc, f.embeddings, rev).first.states.value();
  for (std::size_t t = 0; t < 4; ++t) EXPECT_EQ(column(hs, t), column(hr, 3 - t));
}

TEST(Attend, ZeroHiddenWeightsGiveUniformAttention) {
  Fixture f(6);
  f.enc.attn_hidden.value.fill(0.0);
  std::mt19937_64 rng(7);
  const Matrix h = random_matrix(kCell, 4, rng);
  Graph g;
  const AttentionOutput out = attend(g, f.enc, g.constant(h));
  for (double a : out.weights.value().data()) EXPECT_NEAR(a, 0.25, 1e-9);
  for (std::size_t i = 0; i < kHeads; ++i) {
    for (std::size_t d = 0; d < kCell; ++d) {
      double mean = 0.0;
      for (std::size_t t = 0; t < 4; ++t) mean += h(d, t) / 4.0;
      EXPECT_NEAR(out.context.value()(i, d), mean, 1e-12);
    }
  }
}

TEST(Attend, SingleStepAttentionIsOne) {
  Fixture f(8);
  std::mt19937_64 rng(9);
  const Matrix h = random_matrix(kCell, 1, rng);
  Graph g;
  const AttentionOutput out = attend(g, f.enc, g.constant(h));
  EXPECT_EQ(out.weights.value(), Matrix(kHeads, 1, 1.0));
  for (std::size_t i = 0; i < kHeads; ++i)
    for (std::size_t d = 0; d < kCell; ++d) EXPECT_DOUBLE_EQ(out.context.value()(i, d), h(d, 0));
}

TEST(Attend, RowsAreDistributions) {
  Fixture f(10);
  std::mt19937_64 rng(11);
  Graph g;
  const Matrix a = attend(g, f.enc, g.constant(random_matrix(kCell, 6, rng, 3.0))).weights.value();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (double v : a.row_span(i)) s += v;
    EXPECT_NEAR(s, 1.0, 1e-6);
  }
}

TEST(Attend, BackwardMatchesFiniteDifferences) {
  Fixture f(12);
  std::mt19937_64 rng(13);
  Parameter h("H", random_matrix(kCell, 4, rng));
  const Matrix w = random_matrix(kHeads, kCell, rng);
  Parameter* params[] = {&f.enc.attn_hidden, &f.enc.attn_heads, &h};
  EXPECT_LT(grad_check([&](Graph& g) { return ad::sum(ad::mul(attend(g, f.enc, g.param(h)).context, g.constant(w))); },
                       params),
            1e-4);
}

TEST(Compose, SingleHeadPassesContextThrough) {
  Graph g;
  const Matrix c = Matrix::from_rows({{0.1, -0.4, 0.3}});
  const Matrix s = Matrix::from_rows({{1, 2, 3}});
  const AttentionOutput out{g.constant(Matrix(1, 2, 0.5)), g.constant(c)};
  const SentenceRepresentation rep = compose(out, g.constant(s));
  EXPECT_EQ(rep.attended.value(), c);
  EXPECT_EQ(rep.combined.value(), Matrix::from_rows({{0.1, -0.4, 0.3, 1, 2, 3}}));
}

TEST(Compose, IdenticalRowsPoolToThatRow) {
  Graph g;
  const Matrix c = Matrix::from_rows({{0.2, 0.7}, {0.2, 0.7}, {0.2, 0.7}});
  const AttentionOutput out{g.constant(Matrix(3, 1, 1.0)), g.constant(c)};
  EXPECT_EQ(compose(out, g.constant(Matrix(1, 2))).attended.value(), Matrix::from_rows({{0.2, 0.7}}));
}

TEST(Compose, FullScaleWidth) {
  Graph g;
  const AttentionOutput out{g.constant(Matrix(30, 1, 1.0)), g.constant(Matrix(30, 1024))};
  EXPECT_EQ(compose(out, g.constant(Matrix(1, 1024))).combined.cols(), 2048u);
}

TEST(EncodeSentence, DeterministicAndLaidOutAsAttendedThenRecurrent) {
  Fixture f(14);
  const TokenId tokens[] = {4, 9, 6, 5};
  Graph g1;
  Graph g2;
  const EncodedSentence a = encode_sentence(g1, f.enc, f.embeddings, tokens);
  const EncodedSentence b = encode_sentence(g2, f.enc, f.embeddings, tokens);
  EXPECT_EQ(a.rep.combined.value(), b.rep.combined.value());
  const Matrix& h = a.rep.combined.value();
  ASSERT_EQ(h.cols(), 2 * kCell);
  for (std::size_t i = 0; i < kCell; ++i) {
    EXPECT_EQ(h[i], a.rep.attended.value()[i]);
    EXPECT_EQ(h[kCell + i], a.rep.recurrent.value()[i]);
  }
}

TEST(EncodeSentence, HeadPermutationLeavesPooledContextUnchanged) {
  Fixture f(15);
  const TokenId tokens[] = {4, 9, 6, 5, 7};
  Graph g;
  const Matrix before = encode_sentence(g, f.enc, f.embeddings, tokens).rep.attended.value();
  Matrix& heads = f.enc.attn_heads.value;
  for (std::size_t c = 0; c < heads.cols(); ++c) std::swap(heads(0, c), heads(1, c));
  const Matrix after = encode_sentence(g, f.enc, f.embeddings, tokens).rep.attended.value();
  EXPECT_EQ(before, after);
}

TEST(EncodeSentence, ZeroHiddenWeightsPoolColumnMean) {
  Fixture f(16);
  f.enc.attn_hidden.value.fill(0.0);
  const TokenId tokens[] = {4, 9, 6};
  Graph g;
  const EncodedSentence e = encode_sentence(g, f.enc, f.embeddings, tokens);
  const Matrix& h = e.states.states.value();
  for (std::size_t d = 0; d < kCell; ++d) {
    const double mean = (h(d, 0) + h(d, 1) + h(d, 2)) / 3.0;
    EXPECT_NEAR(e.rep.attended.value()[d], mean, 1e-12);
  }
}

TEST(EncodeSentence, PipelineGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 3; ++trial) {
    Fixture f(100 + trial);
    const Matrix w = random_matrix(1, 2 * kCell, rng);
    const TokenId tokens[] = {4, 9, 6, 5, 7};
    std::vector<Parameter*> params{&f.embeddings, &f.enc.attn_hidden, &f.enc.attn_heads};
    for (LstmParams* l : {&f.enc.forward, &f.enc.backward}) {
      params.push_back(&l->input_weights);
      params.push_back(&l->recurrent_weights);
      params.push_back(&l->bias);
    }
    const double err = grad_check(
        [&](Graph& g) {
          return ad::sum(ad::mul(encode_sentence(g, f.enc, f.embeddings, tokens).rep.combined, g.constant(w)));
        },
        params);
    EXPECT_LT(err, 1e-4);
  }
}
