#include "vgsa/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "json.hpp"
#include "vgsa/checkpoint.hpp"

namespace vgsa {

Dataset prepare_dataset(const Corpus& corpus, std::size_t min_count) {
  const auto texts = corpus.texts();
  Vocabulary vocab = Vocabulary::build(texts, min_count);
  return prepare_dataset(corpus, vocab);
}

Dataset prepare_dataset(const Corpus& corpus, const Vocabulary& vocab) {
  return Dataset{vocab, make_samples(corpus, vocab), corpus.d_img};
}

LossTerms composite_loss(Graph& g, Objective objective, const Batch& batch, ModelParameters& model,
                         const ForwardMode& mode) {
  const std::size_t n = batch.size();
  std::vector<Var> reps;
  reps.reserve(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto tokens = strip_markers(batch.src[k]);
    reps.push_back(encode_sentence(g, model.encoder, model.embeddings, tokens).rep.combined);
  }

  LossTerms terms;
  if (objective != Objective::kCap2Img) {
    terms.caption = batch_caption_nll(g, model.decoder, model.embeddings, reps, batch.tgt);
  }
  if (objective != Objective::kCap2Cap) {
    const std::size_t d_img = model.projection.output_width();
    Matrix targets(n, d_img);
    for (std::size_t k = 0; k < n; ++k) {
      const auto& img = batch.samples[k]->img;
      if (img.size() != d_img) {
        throw ShapeError("composite_loss: sample '" + batch.samples[k]->id + "' image width " +
                         std::to_string(img.size()) + " vs model " + std::to_string(d_img));
      }
      std::copy(img.begin(), img.end(), targets.row_span(k).begin());
    }
    terms.grounding = grounding_loss(g, model.projection, reps, targets, mode);
  }
  if (terms.caption && terms.grounding) {
    terms.total = ad::add(*terms.caption, *terms.grounding);
  } else {
    terms.total = terms.caption ? *terms.caption : *terms.grounding;
  }
  return terms;
}

void clip_gradients(std::span<Parameter* const> params, double c) {
  if (!(c > 0.0)) throw std::invalid_argument("clip_gradients: bound must be > 0");
  for (Parameter* p : params)
    for (double& v : p->grad.data()) v = std::clamp(v, -c, c);
}

AdamState AdamState::zeros_like(std::span<const Parameter* const> params) {
  AdamState s;
  for (const Parameter* p : params) {
    s.first.emplace_back(p->value.rows(), p->value.cols());
    s.second.emplace_back(p->value.rows(), p->value.cols());
  }
  return s;
}

void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamHyper& hyper) {
  if (state.first.size() != params.size() || state.second.size() != params.size()) {
    throw std::invalid_argument("adam_step: optimizer state does not match parameters");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter& p = *params[i];
    Matrix& m = state.first[i];
    Matrix& v = state.second[i];
    require_same_shape(p.value, m, "adam_step");
    for (std::size_t k = 0; k < p.value.size(); ++k) {
      const double g = p.grad[k];
      m[k] = hyper.beta1 * m[k] + (1.0 - hyper.beta1) * g;
      v[k] = hyper.beta2 * v[k] + (1.0 - hyper.beta2) * g * g;
      const double m_hat = m[k] / correction1;
      const double v_hat = v[k] / correction2;
      p.value[k] -= hyper.learning_rate * m_hat / (std::sqrt(v_hat) + hyper.eps);
    }
  }
}

std::string EpochMetrics::to_json() const {
  nlohmann::json j{{"epoch", epoch},
                   {"objective", std::string(vgsa::to_string(objective))},
                   {"loss", loss},
                   {"loss_c", loss_c ? nlohmann::json(*loss_c) : nlohmann::json(nullptr)},
                   {"loss_vg", loss_vg ? nlohmann::json(*loss_vg) : nlohmann::json(nullptr)},
                   {"wall_ms", wall_ms}};
  return j.dump();
}

Trainer::Trainer(TrainConfig config, const Dataset& data, ModelParameters model)
    : Trainer(config, data, std::move(model), AdamState{}, 0) {
  adam_ = AdamState::zeros_like(std::as_const(model_).all());
}

Trainer::Trainer(TrainConfig config, const Dataset& data, ModelParameters model, AdamState adam,
                 std::size_t epochs_done)
    : config_(config), data_(&data), model_(std::move(model)), adam_(std::move(adam)),
      epochs_done_(epochs_done) {
  config_.validate();
  if (data.d_img != config_.d_img) {
    throw std::invalid_argument("corpus image width " + std::to_string(data.d_img) +
                                " does not match config d_img " + std::to_string(config_.d_img));
  }
  const ModelDims dims = model_.dims();
  if (dims.vocab != data.vocab.size() || dims.d_img != config_.d_img ||
      dims.d_cell != config_.d_cell || dims.d_e != config_.d_e) {
    throw std::invalid_argument("model dimensions do not match config and vocabulary");
  }
  if (data.samples.size() < 2) throw std::invalid_argument("training needs at least 2 samples");
  if (!adam_.first.empty() && adam_.first.size() != model_.all().size()) {
    throw std::invalid_argument("optimizer state does not match model parameters");
  }
}

StepLoss Trainer::step(const Batch& batch) {
  std::seed_seq seq{static_cast<std::uint32_t>(config_.seed), static_cast<std::uint32_t>(config_.seed >> 32),
                    static_cast<std::uint32_t>(adam_.step), static_cast<std::uint32_t>(adam_.step >> 32),
                    0xd0d0U};
  std::mt19937_64 dropout_rng(seq);
  const ForwardMode mode{true, config_.dropout, &dropout_rng};

  auto params = model_.all();
  model_.zero_grad();
  StepLoss out;
  {
    Graph g;
    LossTerms terms = composite_loss(g, config_.objective, batch, model_, mode);
    out.total = terms.total.scalar();
    if (terms.caption) out.caption = terms.caption->scalar();
    if (terms.grounding) out.grounding = terms.grounding->scalar();
    if (!std::isfinite(out.total)) throw std::runtime_error("training loss became non-finite");
    g.backward(terms.total);
  }
  for (double& v : model_.embeddings.grad.row_span(kPad)) v = 0.0;
  clip_gradients(params, config_.clip);
  adam_step(params, adam_, AdamHyper{config_.learning_rate, config_.beta1, config_.beta2, config_.adam_eps});
  for (double& v : model_.embeddings.value.row_span(kPad)) v = 0.0;
  return out;
}

EpochMetrics Trainer::run_epoch() {
  const auto start = std::chrono::steady_clock::now();
  const auto batches = make_batches(data_->samples, config_.batch_size, config_.seed, epochs_done_);
  double total = 0.0;
  double caption = 0.0;
  double grounding = 0.0;
  for (const Batch& b : batches) {
    const StepLoss l = step(b);
    total += l.total;
    caption += l.caption.value_or(0.0);
    grounding += l.grounding.value_or(0.0);
  }
  const double n = static_cast<double>(batches.size());
  EpochMetrics m;
  m.epoch = epochs_done_;
  m.objective = config_.objective;
  m.loss = total / n;
  if (config_.objective != Objective::kCap2Img) m.loss_c = caption / n;
  if (config_.objective != Objective::kCap2Cap) m.loss_vg = grounding / n;
  m.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  ++epochs_done_;
  return m;
}

TrainResult train(const TrainConfig& config, const Dataset& data, const TrainOptions& options,
                  const Matrix* pretrained_embeddings) {
  config.validate();
  if (data.d_img != config.d_img) {
    throw std::invalid_argument("corpus image width " + std::to_string(data.d_img) +
                                " does not match config d_img " + std::to_string(config.d_img));
  }
  Trainer trainer(config, data,
                  init_params(ModelDims::from_config(config, data.vocab.size()), config.seed,
                              pretrained_embeddings));
  std::ofstream log;
  if (options.metrics_log) {
    log.open(*options.metrics_log);
    if (!log) throw std::runtime_error("cannot write metrics log " + options.metrics_log->string());
  }
  TrainResult result;
  for (std::size_t e = 0; e < config.epochs; ++e) {
    EpochMetrics m = trainer.run_epoch();
    if (log.is_open()) log << m.to_json() << '\n' << std::flush;
    if (options.checkpoint) save_checkpoint(*options.checkpoint, snapshot(trainer, data.vocab));
    if (options.on_epoch) options.on_epoch(m);
    result.log.push_back(std::move(m));
  }
  result.model = trainer.model();
  result.adam = trainer.adam();
  return result;
}

}  // namespace vgsa
