#include "vgsa/gradient_suite.hpp"

#include <array>
#include <functional>
#include <random>

#include "vgsa/grad_check.hpp"
#include "vgsa/trainer.hpp"

namespace vgsa {
namespace {

constexpr std::size_t kCell = 4;
constexpr std::size_t kAttnHidden = 3;
constexpr std::size_t kHeads = 2;
constexpr std::size_t kEmbed = 4;
constexpr std::size_t kImage = 5;
constexpr std::size_t kBatch = 3;
constexpr std::size_t kContentTokens = 6;

Matrix gaussian(std::size_t r, std::size_t c, std::mt19937_64& rng, double scale = 1.0) {
  std::normal_distribution<double> d(0.0, scale);
  Matrix m(r, c);
  for (double& v : m.data()) v = d(rng);
  return m;
}

// Scalarizes y as sum(y .* weights) so every output entry feeds the check.
Var weighted_sum(Graph& g, Var y, const Matrix& weights) {
  return ad::sum(ad::mul(y, g.constant(weights)));
}

struct Check {
  std::string name;
  // Draws a fresh random point, returns the parameters to perturb and f.
  std::function<double(std::mt19937_64&, double eps)> run;
};

template <std::size_t N>
double check_params(std::array<Parameter, N>& ps, const ScalarFn& f, double eps) {
  std::array<Parameter*, N> ptrs;
  for (std::size_t i = 0; i < N; ++i) ptrs[i] = &ps[i];
  return grad_check(f, ptrs, eps);
}

Check unary_check(std::string name, std::size_t r, std::size_t c, double scale,
                  std::function<Var(Var)> op) {
  return {std::move(name), [=](std::mt19937_64& rng, double eps) {
            std::array<Parameter, 1> x{Parameter("x", gaussian(r, c, rng, scale))};
            Graph shape_graph;
            Var probe = op(shape_graph.constant(x[0].value));
            const Matrix w = gaussian(probe.rows(), probe.cols(), rng);
            return check_params(x, [&](Graph& g) { return weighted_sum(g, op(g.param(x[0])), w); }, eps);
          }};
}

Check binary_check(std::string name, std::size_t ra, std::size_t ca, std::size_t rb, std::size_t cb,
                   std::function<Var(Var, Var)> op) {
  return {std::move(name), [=](std::mt19937_64& rng, double eps) {
            std::array<Parameter, 2> x{Parameter("a", gaussian(ra, ca, rng)),
                                       Parameter("b", gaussian(rb, cb, rng))};
            Graph shape_graph;
            Var probe = op(shape_graph.constant(x[0].value), shape_graph.constant(x[1].value));
            const Matrix w = gaussian(probe.rows(), probe.cols(), rng);
            return check_params(
                x, [&](Graph& g) { return weighted_sum(g, op(g.param(x[0]), g.param(x[1])), w); }, eps);
          }};
}

void randomize(ModelParameters& m, std::mt19937_64& rng) {
  for (Parameter* p : m.all()) {
    for (double& v : p->value.data()) v = std::normal_distribution<double>(0.0, 0.5)(rng);
  }
  for (double& v : m.embeddings.value.row_span(kPad)) v = 0.0;
}

struct TinyWorld {
  Vocabulary vocab;
  std::vector<Sample> samples;
  ModelParameters model;
};

TinyWorld tiny_world(std::mt19937_64& rng) {
  std::vector<std::string> words;
  for (std::size_t i = 0; i < kContentTokens; ++i) words.push_back("t" + std::to_string(i));
  TinyWorld w{Vocabulary::build(words, 1), {}, {}};
  for (std::size_t k = 0; k < kBatch; ++k) {
    const std::size_t len = 1 + rng() % 5;  // T <= 5
    Sample s;
    s.id = "tiny" + std::to_string(k);
    s.src.push_back(kBos);
    for (std::size_t t = 0; t < len; ++t) s.src.push_back(static_cast<TokenId>(kReservedTokens + rng() % kContentTokens));
    s.src.push_back(kEos);
    s.tgt = s.src;
    const Matrix img = gaussian(1, kImage, rng);
    s.img.assign(img.data().begin(), img.data().end());
    w.samples.push_back(std::move(s));
  }
  const ModelDims dims{w.vocab.size(), kEmbed, kCell, kAttnHidden, kHeads, kImage, kImage};
  w.model = init_params(dims, rng());
  randomize(w.model, rng);
  return w;
}

Check objective_check(Objective objective) {
  return {"objective:" + std::string(to_string(objective)), [=](std::mt19937_64& rng, double eps) {
            TinyWorld w = tiny_world(rng);
            std::vector<const Sample*> ptrs;
            for (const Sample& s : w.samples) ptrs.push_back(&s);
            const Batch batch = assemble_batch(ptrs);
            return grad_check(
                [&](Graph& g) { return composite_loss(g, objective, batch, w.model, ForwardMode::eval()).total; },
                w.model.all(), eps);
          }};
}

std::vector<Check> all_checks() {
  std::vector<Check> checks;
  checks.push_back(binary_check("matmul", 3, 4, 4, 2, ad::matmul));
  checks.push_back(unary_check("transpose", 3, 4, 1.0, ad::transpose));
  checks.push_back(binary_check("add", 3, 4, 3, 4, ad::add));
  checks.push_back(binary_check("mul", 3, 4, 3, 4, ad::mul));
  checks.push_back(binary_check("max2", 3, 4, 3, 4, ad::max2));
  checks.push_back(unary_check("scale", 2, 3, 1.0, [](Var x) { return ad::scale(x, -1.7); }));
  checks.push_back(unary_check("tanh", 2, 3, 1.0, ad::tanh));
  checks.push_back(unary_check("sigmoid", 2, 3, 2.0, ad::sigmoid));
  checks.push_back(unary_check("relu", 2, 3, 1.0, ad::relu));
  checks.push_back(unary_check("sum", 3, 3, 1.0, ad::sum));
  checks.push_back(unary_check("softmax_rows", 3, 5, 2.0, ad::softmax_rows));
  checks.push_back(unary_check("reduce_max_rows", 4, 3, 1.0, ad::reduce_max_rows));
  checks.push_back(binary_check("concat_rows", 1, 2, 1, 3, ad::concat_rows));
  checks.push_back(binary_check("concat_cols", 3, 1, 3, 1, [](Var a, Var b) {
    const Var cols[] = {a, b, a};
    return ad::concat_cols(cols);
  }));
  checks.push_back(binary_check("stack_rows", 1, 4, 1, 4, [](Var a, Var b) {
    const Var rows[] = {b, a, b};
    return ad::stack_rows(rows);
  }));
  checks.push_back(unary_check("slice_rows", 6, 2, 1.0, [](Var x) { return ad::slice_rows(x, 2, 3); }));
  checks.push_back(unary_check("slice_cols", 2, 6, 1.0, [](Var x) { return ad::slice_cols(x, 1, 4); }));
  checks.push_back(unary_check("add_n", 2, 2, 1.0, [](Var x) {
    const Var xs[] = {x, ad::tanh(x), x};
    return ad::add_n(xs);
  }));
  checks.push_back(unary_check("dropout", 3, 4, 1.0, [](Var x) {
    std::mt19937_64 mask_rng(99);
    return ad::dropout(x, 0.3, mask_rng);
  }));
  checks.push_back(unary_check("softmax_cross_entropy", 6, 1, 2.0,
                               [](Var x) { return ad::softmax_cross_entropy(x, 4); }));
  checks.push_back(binary_check("cosine_similarity", 3, 5, 4, 5, ad::cosine_similarity));
  checks.push_back(binary_check("cosine_sim", 5, 1, 1, 5, ad::cosine_sim));
  checks.push_back({"lookup", [](std::mt19937_64& rng, double eps) {
                      std::array<Parameter, 1> table{Parameter("E", gaussian(5, 3, rng))};
                      const Matrix w = gaussian(3, 3, rng);
                      return check_params(table, [&](Graph& g) {
                        const Var cols[] = {g.lookup(table[0], 1), g.lookup(table[0], 3), g.lookup(table[0], 1)};
                        return weighted_sum(g, ad::concat_cols(cols), w);
                      }, eps);
                    }});
  checks.push_back({"lstm_step(3 steps)", [](std::mt19937_64& rng, double eps) {
                      LstmParams p("lstm", kEmbed, kCell);
                      for (Parameter* q : {&p.input_weights, &p.recurrent_weights, &p.bias})
                        q->value = gaussian(q->value.rows(), q->value.cols(), rng, 0.5);
                      Parameter xs("xs", gaussian(kEmbed, 3, rng));
                      const Matrix w = gaussian(kCell, 2, rng);
                      Parameter* ps[] = {&p.input_weights, &p.recurrent_weights, &p.bias, &xs};
                      return grad_check([&](Graph& g) {
                        LstmState s = lstm_zero_state(g, kCell);
                        Var x = g.param(xs);
                        for (std::size_t t = 0; t < 3; ++t) s = lstm_step(g, p, ad::slice_cols(x, t, 1), s);
                        const Var out[] = {s.h, s.c};
                        return weighted_sum(g, ad::concat_cols(out), w);
                      }, ps, eps);
                    }});
  checks.push_back({"attend", [](std::mt19937_64& rng, double eps) {
                      EncoderParams p(kEmbed, kCell, kAttnHidden, kHeads);
                      p.attn_hidden.value = gaussian(kAttnHidden, kCell, rng);
                      p.attn_heads.value = gaussian(kHeads, kAttnHidden, rng);
                      Parameter states("H", gaussian(kCell, 5, rng));
                      const Matrix wa = gaussian(kHeads, 5, rng);
                      const Matrix wc = gaussian(kHeads, kCell, rng);
                      Parameter* ps[] = {&p.attn_hidden, &p.attn_heads, &states};
                      return grad_check([&](Graph& g) {
                        const AttentionOutput a = attend(g, p, g.param(states));
                        return ad::add(weighted_sum(g, a.weights, wa), weighted_sum(g, a.context, wc));
                      }, ps, eps);
                    }});
  checks.push_back({"encode_sentence", [](std::mt19937_64& rng, double eps) {
                      TinyWorld w = tiny_world(rng);
                      const auto tokens = strip_markers(w.samples[0].src);
                      const Matrix weights = gaussian(1, 2 * kCell, rng);
                      return grad_check([&](Graph& g) {
                        return weighted_sum(g, encode_sentence(g, w.model.encoder, w.model.embeddings, tokens).rep.combined, weights);
                      }, w.model.all(), eps);
                    }});
  checks.push_back({"caption_nll", [](std::mt19937_64& rng, double eps) {
                      TinyWorld w = tiny_world(rng);
                      Parameter h("h", gaussian(1, 2 * kCell, rng));
                      auto ps = w.model.all();
                      ps.push_back(&h);
                      return grad_check([&](Graph& g) {
                        return caption_nll(g, w.model.decoder, w.model.embeddings, g.param(h), w.samples[0].tgt);
                      }, ps, eps);
                    }});
  checks.push_back({"project", [](std::mt19937_64& rng, double eps) {
                      TinyWorld w = tiny_world(rng);
                      Parameter h("h", gaussian(1, 2 * kCell, rng));
                      const Matrix weights = gaussian(1, kImage, rng);
                      std::vector<Parameter*> ps;
                      for (std::size_t l = 0; l < 4; ++l) {
                        ps.push_back(&w.model.projection.weights[l]);
                        ps.push_back(&w.model.projection.biases[l]);
                      }
                      ps.push_back(&h);
                      return grad_check([&](Graph& g) {
                        return weighted_sum(g, project(g, w.model.projection, g.param(h), ForwardMode::eval()), weights);
                      }, ps, eps);
                    }});
  checks.push_back(unary_check("log_exp_sum_rank_loss", kBatch, kBatch, 0.5, log_exp_sum_rank_loss));
  checks.push_back(binary_check("ranking_loss", kBatch, kImage, kBatch, kImage, ranking_loss));
  checks.push_back({"grounding_loss", [](std::mt19937_64& rng, double eps) {
                      TinyWorld w = tiny_world(rng);
                      Parameter reps("reps", gaussian(kBatch, 2 * kCell, rng));
                      const Matrix targets = gaussian(kBatch, kImage, rng);
                      auto ps = w.model.all();
                      ps.push_back(&reps);
                      return grad_check([&](Graph& g) {
                        Var all = g.param(reps);
                        std::vector<Var> rows;
                        for (std::size_t k = 0; k < kBatch; ++k) rows.push_back(ad::slice_rows(all, k, 1));
                        return grounding_loss(g, w.model.projection, rows, targets, ForwardMode::eval());
                      }, ps, eps);
                    }});
  checks.push_back(objective_check(Objective::kCap2Cap));
  checks.push_back(objective_check(Objective::kCap2Img));
  checks.push_back(objective_check(Objective::kCap2All));
  return checks;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(const GradientSuiteOptions& options) {
  std::vector<GradCheckResult> results;
  std::mt19937_64 rng(options.seed);
  for (const Check& c : all_checks()) {
    GradCheckResult r{c.name, 0.0, options.points, false};
    for (std::size_t i = 0; i < options.points; ++i) {
      r.max_rel_error = std::max(r.max_rel_error, c.run(rng, options.eps));
    }
    r.passed = r.max_rel_error < options.tolerance;
    results.push_back(std::move(r));
  }
  return results;
}

}  // namespace vgsa
