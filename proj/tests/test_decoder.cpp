#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "test_support.hpp"
#include "vgsa/decoder.hpp"
#include "vgsa/grad_check.hpp"

using namespace vgsa;
using vgsa::testing::random_matrix;

namespace {

constexpr std::size_t kEmbed = 3;
constexpr std::size_t kCell = 4;

struct Fixture {
  std::size_t vocab;
  Parameter embeddings;
  DecoderParams dec;

  Fixture(std::size_t v, std::uint64_t seed) : vocab(v), embeddings("E", Matrix(v, kEmbed)), dec(v, kEmbed, kCell) {
    std::mt19937_64 rng(seed);
    embeddings.value = random_matrix(v, kEmbed, rng, 0.5);
    for (Parameter* p : {&dec.init_h, &dec.init_c, &dec.cell.input_weights, &dec.cell.recurrent_weights,
                         &dec.cell.bias, &dec.out_weights, &dec.out_bias}) {
      p->value = random_matrix(p->value.rows(), p->value.cols(), rng, 0.5);
    }
  }
};

double nll(Fixture& f, const Matrix& h, const std::vector<TokenId>& tgt) {
  Graph g;
  return caption_nll(g, f.dec, f.embeddings, g.constant(h), tgt).scalar();
}

}  // namespace

TEST(InitState, ZeroRepresentationGivesZeroState) {
  Fixture f(8, 1);
  Graph g;
  const LstmState s = init_state(g, f.dec, g.constant(Matrix(1, 2 * kCell)));
  EXPECT_EQ(s.h.value(), Matrix(kCell, 1));
  EXPECT_EQ(s.c.value(), Matrix(kCell, 1));
}

TEST(InitState, Bounded) {
  Fixture f(8, 2);
  std::mt19937_64 rng(3);
  Graph g;
  const LstmState s = init_state(g, f.dec, g.constant(random_matrix(1, 2 * kCell, rng, 2.0)));
  for (double v : s.h.value().data()) EXPECT_LT(std::abs(v), 1.0);
  for (double v : s.c.value().data()) EXPECT_LT(std::abs(v), 1.0);
}

TEST(InitState, WrongWidthRejected) {
  Fixture f(8, 2);
  Graph g;
  EXPECT_THROW(init_state(g, f.dec, g.constant(Matrix(1, kCell))), ShapeError);
}

TEST(CaptionNll, ConditioningIsLive) {
  Fixture f(8, 4);
  std::mt19937_64 rng(5);
  const Matrix h = random_matrix(1, 2 * kCell, rng);
  const std::vector<TokenId> tgt{kBos, 4, 6, 5, kEos};
  const auto numeric =
      vgsa::testing::numeric_gradient([&](const Matrix& x) { return nll(f, x, tgt); }, h);
  EXPECT_GT(max_abs(numeric), 1e-6);

  Parameter hp("h", h);
  Graph g;
  g.backward(caption_nll(g, f.dec, f.embeddings, g.param(hp), tgt));
  EXPECT_LT(vgsa::testing::max_relative_error(hp.grad, numeric), 1e-6);
}

TEST(CaptionNll, UniformLogitsGiveLogVPerToken) {
  for (std::size_t v : {5u, 12u, 68u}) {
    Fixture f(v, 6);
    f.dec.out_weights.value.fill(0.0);
    f.dec.out_bias.value.fill(0.0);
    std::mt19937_64 rng(7);
    const std::vector<TokenId> tgt{kBos, 4, 4, kEos};
    EXPECT_NEAR(nll(f, random_matrix(1, 2 * kCell, rng), tgt) / 3.0, std::log(static_cast<double>(v)), 1e-12);
  }
}

TEST(CaptionNll, SingleStepBinaryVocabulary) {
  Fixture f(2, 8);
  f.dec.out_weights.value.fill(0.0);
  f.dec.out_bias.value.fill(0.0);
  const std::vector<TokenId> tgt{0, 1};
  EXPECT_NEAR(nll(f, Matrix(1, 2 * kCell), tgt), std::log(2.0), 1e-15);
}

TEST(CaptionNll, ShortTargetRejected) {
  Fixture f(8, 9);
  Graph g;
  const std::vector<TokenId> tgt{kBos};
  EXPECT_THROW(caption_nll(g, f.dec, f.embeddings, g.constant(Matrix(1, 2 * kCell)), tgt), std::invalid_argument);
}

TEST(CaptionNll, PaddingDoesNotChangeLoss) {
  Fixture f(9, 10);
  std::mt19937_64 rng(11);
  const Matrix h = random_matrix(1, 2 * kCell, rng);
  std::vector<TokenId> tgt{kBos, 5, 7, 4, kEos};
  const double base = nll(f, h, tgt);
  EXPECT_GE(base, 0.0);
  for (int pad = 0; pad < 4; ++pad) {
    tgt.push_back(kPad);
    EXPECT_EQ(nll(f, h, tgt), base);
  }
  EXPECT_EQ(predicted_tokens(tgt), 4u);
}

TEST(CaptionNll, BatchMeanOfSampleSums) {
  Fixture f(9, 12);
  std::mt19937_64 rng(13);
  const Matrix h1 = random_matrix(1, 2 * kCell, rng);
  const Matrix h2 = random_matrix(1, 2 * kCell, rng);
  const std::vector<std::vector<TokenId>> tgts{{kBos, 5, kEos}, {kBos, 4, 6, 7, kEos}};
  Graph g;
  const Var reps[] = {g.constant(h1), g.constant(h2)};
  const double batch = batch_caption_nll(g, f.dec, f.embeddings, reps, tgts).scalar();
  EXPECT_NEAR(batch, 0.5 * (nll(f, h1, tgts[0]) + nll(f, h2, tgts[1])), 1e-12);
}

TEST(CaptionNll, GradientMatchesFiniteDifferences) {
  Fixture f(9, 14);
  std::mt19937_64 rng(15);
  Parameter h("h", random_matrix(1, 2 * kCell, rng));
  const std::vector<TokenId> tgt{kBos, 5, 8, 4, kEos};
  std::vector<Parameter*> params{&h, &f.embeddings, &f.dec.init_h, &f.dec.init_c, &f.dec.cell.input_weights,
                                 &f.dec.cell.recurrent_weights, &f.dec.cell.bias, &f.dec.out_weights,
                                 &f.dec.out_bias};
  EXPECT_LT(grad_check([&](Graph& g) { return caption_nll(g, f.dec, f.embeddings, g.param(h), tgt); }, params), 1e-4);
}

TEST(GreedyDecode, EosDominantProjectionStopsImmediately) {
  Fixture f(8, 16);
  f.dec.out_weights.value.fill(0.0);
  f.dec.out_bias.value.fill(0.0);
  f.dec.out_bias.value(kEos, 0) = 10.0;
  const auto out = greedy_decode(f.dec, f.embeddings, Matrix(1, 2 * kCell, 0.3), 20);
  EXPECT_EQ(out, std::vector<TokenId>{kEos});
}

TEST(GreedyDecode, DeterministicAndBounded) {
  Fixture f(8, 17);
  f.dec.out_bias.value(kEos, 0) = -10.0;
  std::mt19937_64 rng(18);
  const Matrix h = random_matrix(1, 2 * kCell, rng);
  const auto a = greedy_decode(f.dec, f.embeddings, h, 6);
  EXPECT_EQ(a, greedy_decode(f.dec, f.embeddings, h, 6));
  EXPECT_LE(a.size(), 6u);
  EXPECT_THROW(greedy_decode(f.dec, f.embeddings, h, 0), std::invalid_argument);
}
