// Acceptance suite: one PASS/FAIL line per criterion, exit status 0 only if all pass.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "vgsa/checkpoint.hpp"
#include "vgsa/evaluation.hpp"
#include "vgsa/gradient_suite.hpp"
#include "vgsa/grounding.hpp"
#include "vgsa/synthetic.hpp"
#include "vgsa/trainer.hpp"

using namespace vgsa;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradBudgetSeconds = 60.0;
constexpr double kOracleTolerance = 1e-10;
constexpr double kUniformNllTolerance = 1e-6;
constexpr double kLogFiveTolerance = 1e-9;
constexpr double kUniformAttentionTolerance = 1e-9;
constexpr double kRecallTarget = 0.90;
constexpr double kUntrainedRecallCeiling = 0.05;
constexpr double kNllTarget = 0.5;
constexpr double kLearnBudgetSeconds = 300.0;
constexpr double kCompositionTolerance = 1e-9;
constexpr double kSalienceTarget = 0.80;
constexpr double kOrthogonalityTolerance = 1e-5;
constexpr double kClip = 5.0;
constexpr double kResumeTolerance = 1e-12;

constexpr std::size_t kCorpusSize = 512;
constexpr std::size_t kContentVocab = 64;
constexpr std::size_t kImageWidth = 64;
constexpr std::uint64_t kCorpusSeed = 1;
constexpr std::size_t kPool = 128;
constexpr std::size_t kMaxEpochs = 200;
constexpr std::size_t kSalienceSentences = 100;
constexpr double kCaptionLearningRate = 3e-3;

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, format, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

TrainConfig learnability_config(Objective objective) {
  TrainConfig c;
  c.objective = objective;
  c.d_e = 32;
  c.d_cell = 32;
  c.d_a = 16;
  c.n_a = 4;
  c.d_img = kImageWidth;
  c.batch_size = 32;
  c.learning_rate = 1e-3;
  c.clip = kClip;
  c.dropout = 0.0;
  c.epochs = kMaxEpochs;
  c.seed = 1;
  return c;
}

const Dataset& corpus() {
  static const Dataset data = prepare_dataset(gen_synthetic(kCorpusSize, kContentVocab, kImageWidth, kCorpusSeed).corpus);
  return data;
}

std::span<const Sample> pool() { return std::span<const Sample>(corpus().samples).first(kPool); }

Matrix random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n;
  Matrix m(r, c);
  for (double& v : m.data()) v = n(rng);
  return m;
}

Outcome gradient_suite() {
  const auto start = std::chrono::steady_clock::now();
  GradientSuiteOptions options;
  options.tolerance = kGradTolerance;
  const auto results = run_gradient_suite(options);
  const double elapsed = seconds_since(start);
  bool ok = elapsed < kGradBudgetSeconds;
  double worst = 0.0;
  std::string failing;
  for (const auto& r : results) {
    worst = std::max(worst, r.max_rel_error);
    if (r.max_rel_error >= kGradTolerance) {
      ok = false;
      failing += " " + r.name + fmt("=%.2e", r.max_rel_error);
    }
  }
  return {ok, fmt("%zu checks, worst rel err %.2e, %.1f s", results.size(), worst, elapsed) +
                  (failing.empty() ? "" : ";" + failing)};
}

double brute_force_rank_loss(const Matrix& p, const Matrix& t) {
  const std::size_t b = p.rows();
  auto cosine = [&](std::size_t i, std::size_t j) {
    double dot = 0.0, np = 0.0, nt = 0.0;
    for (std::size_t d = 0; d < p.cols(); ++d) {
      dot += p(i, d) * t(j, d);
      np += p(i, d) * p(i, d);
      nt += t(j, d) * t(j, d);
    }
    return dot / std::sqrt(np * nt);
  };
  double total = 0.0;
  for (std::size_t k = 0; k < b; ++k)
    for (std::size_t j = 0; j < b; ++j)
      if (j != k) total += std::exp(cosine(k, j) - cosine(k, k)) + std::exp(cosine(j, k) - cosine(k, k));
  return std::log(1.0 + total);
}

Outcome ranking_oracle() {
  std::mt19937_64 rng(2);
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t b = 2 + trial % 4;
    const Matrix p = random_matrix(b, 8, rng);
    const Matrix t = random_matrix(b, 8, rng);
    Graph g;
    worst = std::max(worst, std::abs(ranking_loss(g.constant(p), g.constant(t)).scalar() - brute_force_rank_loss(p, t)));
  }
  return {worst < kOracleTolerance, fmt("100 batches, max abs diff %.2e", worst)};
}

Outcome analytic_baselines() {
  const Dataset& data = corpus();
  ModelParameters m = init_params(ModelDims::from_config(learnability_config(Objective::kCap2Cap), data.vocab.size()), 3);
  m.decoder.out_weights.value.fill(0.0);
  m.decoder.out_bias.value.fill(0.0);
  const double ln_v = std::log(static_cast<double>(data.vocab.size()));
  const double nll_err = std::abs(mean_token_nll(m, std::span<const Sample>(data.samples).first(32)) - ln_v);

  Graph g;
  const double ln5_err = std::abs(log_exp_sum_rank_loss(g.constant(Matrix(2, 2, 0.3))).scalar() - std::log(5.0));

  m.encoder.attn_hidden.value.fill(0.0);
  double attn_err = 0.0;
  for (std::size_t k = 0; k < 32; ++k) {
    const auto tokens = strip_markers(data.samples[k].src);
    const Matrix a = salience(m, data.vocab, tokens).attention;
    for (double v : a.data()) attn_err = std::max(attn_err, std::abs(v - 1.0 / static_cast<double>(tokens.size())));
  }
  const bool ok = nll_err <= kUniformNllTolerance && ln5_err <= kLogFiveTolerance && attn_err <= kUniformAttentionTolerance;
  return {ok, fmt("|L_C - ln V| %.1e, |L_VG - ln 5| %.1e, |A - 1/T| %.1e", nll_err, ln5_err, attn_err)};
}

double salience_hit_rate(ModelParameters& model, double* mean_inverse_length = nullptr) {
  const Dataset& data = corpus();
  const std::size_t stride = data.samples.size() / kSalienceSentences;
  std::size_t hits = 0;
  double inv = 0.0;
  for (std::size_t k = 0; k < kSalienceSentences; ++k) {
    const Sample& s = data.samples[k * stride];
    const SalienceRecord r = salience(model, data.vocab, strip_markers(s.src));
    const auto best = std::max_element(r.pooled.begin(), r.pooled.end()) - r.pooled.begin();
    hits += r.tokens[static_cast<std::size_t>(best)] == s.salient;
    inv += 1.0 / static_cast<double>(r.tokens.size());
  }
  if (mean_inverse_length) *mean_inverse_length = inv / kSalienceSentences;
  return static_cast<double>(hits) / kSalienceSentences;
}

struct ImageRun {
  Outcome learnability;
  ModelParameters untrained;
  ModelParameters trained;
};

ImageRun image_run() {
  const Dataset& data = corpus();
  const TrainConfig config = learnability_config(Objective::kCap2Img);
  ImageRun run;
  run.untrained = init_params(ModelDims::from_config(config, data.vocab.size()), config.seed);
  const double before = retrieval_eval(run.untrained, pool()).sentence_to_image.recall_at_1;

  const auto start = std::chrono::steady_clock::now();
  TrainResult result = train(config, data);
  const double elapsed = seconds_since(start);
  run.trained = std::move(result.model);
  const double after = retrieval_eval(run.trained, pool()).sentence_to_image.recall_at_1;
  run.learnability = {after >= kRecallTarget && before <= kUntrainedRecallCeiling && elapsed < kLearnBudgetSeconds,
                      fmt("recall@1 %.3f after %zu epochs (untrained %.3f), %.0f s", after, kMaxEpochs, before, elapsed)};
  return run;
}

Outcome caption_learnability() {
  const Dataset& data = corpus();
  TrainConfig config = learnability_config(Objective::kCap2Cap);
  config.learning_rate = kCaptionLearningRate;
  const auto start = std::chrono::steady_clock::now();
  Trainer trainer(config, data, init_params(ModelDims::from_config(config, data.vocab.size()), config.seed));
  double nll = mean_token_nll(trainer.model(), data.samples);
  const double initial = nll;
  while (trainer.epochs_done() < kMaxEpochs && nll >= kNllTarget) {
    trainer.run_epoch();
    if (trainer.epochs_done() % 5 == 0 || trainer.epochs_done() == kMaxEpochs) nll = mean_token_nll(trainer.model(), data.samples);
  }
  const double elapsed = seconds_since(start);
  return {nll < kNllTarget && elapsed < kLearnBudgetSeconds,
          fmt("per-token NLL %.3f after %zu epochs (untrained %.3f, ln V %.3f), %.0f s", nll, trainer.epochs_done(), initial,
              std::log(static_cast<double>(data.vocab.size())), elapsed)};
}

Outcome composition() {
  const Dataset& data = corpus();
  TrainConfig config = learnability_config(Objective::kCap2All);
  ModelParameters m = init_params(ModelDims::from_config(config, data.vocab.size()), 5);
  std::vector<const Sample*> picks;
  for (std::size_t k = 0; k < 32; ++k) picks.push_back(&data.samples[k]);
  const Batch batch = assemble_batch(picks);
  auto value = [&](Objective o) {
    Graph g;
    return composite_loss(g, o, batch, m, ForwardMode::eval()).total.scalar();
  };
  const double gap = std::abs(value(Objective::kCap2All) - value(Objective::kCap2Cap) - value(Objective::kCap2Img));

  const Dataset small = prepare_dataset(gen_synthetic(kPool, kContentVocab, kImageWidth, kCorpusSeed).corpus);
  config.epochs = 10;
  const TrainResult r = train(config, small);
  const EpochMetrics& first = r.log.front();
  const EpochMetrics& last = r.log.back();
  const bool ok = gap <= kCompositionTolerance && *last.loss_c < *first.loss_c && *last.loss_vg < *first.loss_vg;
  return {ok, fmt("|all - cap - img| %.1e; L_C %.3f -> %.3f, L_VG %.3f -> %.3f over %zu epochs", gap, *first.loss_c,
                  *last.loss_c, *first.loss_vg, *last.loss_vg, r.log.size())};
}

Outcome salience_check(ImageRun& run) {
  double inv_t = 0.0;
  const double before = salience_hit_rate(run.untrained);
  const double after = salience_hit_rate(run.trained, &inv_t);
  return {after >= kSalienceTarget, fmt("salient token ranked first in %.2f of %zu sentences (untrained %.2f, mean 1/T %.2f)",
                                        after, kSalienceSentences, before, inv_t)};
}

Outcome initialization_and_clipping() {
  const Dataset& data = corpus();
  const TrainConfig config = learnability_config(Objective::kCap2All);
  ModelParameters m = init_params(ModelDims::from_config(config, data.vocab.size()), config.seed);
  double worst = 0.0;
  std::size_t blocks = 0;
  for (const Parameter* p : std::as_const(m).all()) {
    if (!p->recurrent) continue;
    const std::size_t n = p->value.cols();
    for (std::size_t b = 0; b < 4; ++b, ++blocks) {
      double sq = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
          double dot = 0.0;
          for (std::size_t r = 0; r < n; ++r) dot += p->value(b * n + r, i) * p->value(b * n + r, j);
          sq += std::pow(dot - (i == j ? 1.0 : 0.0), 2);
        }
      }
      worst = std::max(worst, std::sqrt(sq));
    }
  }

  std::vector<const Sample*> picks;
  for (std::size_t k = 0; k < 32; ++k) picks.push_back(&data.samples[k]);
  const Batch batch = assemble_batch(picks);
  m.zero_grad();
  Graph g;
  g.backward(composite_loss(g, Objective::kCap2All, batch, m, ForwardMode::eval()).total);
  const auto params = m.all();
  std::vector<Matrix> raw;
  for (Parameter* p : params) {
    for (double& v : p->grad.data()) v *= 1e3;
    raw.push_back(p->grad);
  }
  clip_gradients(params, kClip);
  double max_grad = 0.0;
  std::size_t clipped = 0;
  bool untouched_ok = true;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t k = 0; k < raw[i].size(); ++k) {
      const double after = params[i]->grad[k];
      max_grad = std::max(max_grad, std::abs(after));
      if (std::abs(raw[i][k]) > kClip) {
        ++clipped;
        untouched_ok = untouched_ok && after == std::copysign(kClip, raw[i][k]);
      } else {
        untouched_ok = untouched_ok && after == raw[i][k];
      }
    }
  }
  const bool ok = blocks > 0 && worst < kOrthogonalityTolerance && max_grad <= kClip && clipped > 0 && untouched_ok;
  return {ok, fmt("%zu blocks, max ||W'W - I||_F %.1e; %zu entries clipped, max |g| %.3f", blocks, worst, clipped, max_grad)};
}

Outcome determinism_and_resume() {
  const Dataset small = prepare_dataset(gen_synthetic(64, kContentVocab, 16, 9).corpus);
  TrainConfig config;
  config.objective = Objective::kCap2All;
  config.d_e = 16;
  config.d_cell = 16;
  config.d_a = 8;
  config.n_a = 2;
  config.d_img = 16;
  config.batch_size = 16;
  config.epochs = 4;
  config.seed = 11;
  const TrainResult a = train(config, small);
  const TrainResult b = train(config, small);
  bool bitwise = a.log.size() == b.log.size();
  for (std::size_t e = 0; bitwise && e < a.log.size(); ++e)
    bitwise = a.log[e].loss == b.log[e].loss && a.log[e].loss_c == b.log[e].loss_c && a.log[e].loss_vg == b.log[e].loss_vg;

  const auto path = std::filesystem::temp_directory_path() / "vgsa_acceptance_resume.ckpt";
  Trainer first(config, small, init_params(ModelDims::from_config(config, small.vocab.size()), config.seed));
  first.run_epoch();
  first.run_epoch();
  save_checkpoint(path, snapshot(first, small.vocab));
  Trainer resumed = resume(load_checkpoint(path), small);
  std::filesystem::remove(path);
  double worst = 0.0;
  for (std::size_t e = 2; e < a.log.size(); ++e) worst = std::max(worst, std::abs(resumed.run_epoch().loss - a.log[e].loss));
  const auto pa = a.model.all();
  const auto pr = std::as_const(resumed).model().all();
  for (std::size_t i = 0; i < pa.size(); ++i)
    for (std::size_t k = 0; k < pa[i]->value.size(); ++k) worst = std::max(worst, std::abs(pa[i]->value[k] - pr[i]->value[k]));
  return {bitwise && worst <= kResumeTolerance,
          fmt("loss logs %s; resume max diff %.1e", bitwise ? "bitwise identical" : "DIFFER", worst)};
}

}  // namespace

int main() {
  int failures = 0;
  auto report = [&](int id, const char* name, const std::function<Outcome()>& check) {
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += !o.passed;
    std::printf("%s [%d] %s: %s\n", o.passed ? "PASS" : "FAIL", id, name, o.detail.c_str());
    std::fflush(stdout);
  };

  report(1, "gradient suite", gradient_suite);
  report(2, "ranking loss oracle", ranking_oracle);
  report(3, "analytic baselines", analytic_baselines);
  ImageRun run;
  report(4, "cap2img learnability", [&] {
    run = image_run();
    return run.learnability;
  });
  report(5, "cap2cap learnability", caption_learnability);
  report(6, "cap2all composition", composition);
  report(7, "attention salience", [&] { return salience_check(run); });
  report(8, "initialization and clipping", initialization_and_clipping);
  report(9, "determinism and resume", determinism_and_resume);
  return failures == 0 ? 0 : 1;
}
