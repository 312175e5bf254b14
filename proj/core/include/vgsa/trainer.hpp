#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vgsa/model.hpp"
#include "vgsa/text_data.hpp"

namespace vgsa {

/// A vocabulary-encoded corpus ready for training or evaluation.
struct Dataset {
  Vocabulary vocab;
  std::vector<Sample> samples;
  std::size_t d_img = 0;
};

Dataset prepare_dataset(const Corpus& corpus, std::size_t min_count = 1);
/// Encodes `corpus` with an existing vocabulary (e.g. one restored from a checkpoint).
Dataset prepare_dataset(const Corpus& corpus, const Vocabulary& vocab);

struct LossTerms {
  Var total;
  std::optional<Var> caption;    // L_C, batch mean
  std::optional<Var> grounding;  // L_VG
};

/// cap2cap -> L_C, cap2img -> L_VG, cap2all -> L_C + L_VG.
LossTerms composite_loss(Graph& g, Objective objective, const Batch& batch, ModelParameters& model,
                         const ForwardMode& mode);

/// Elementwise clamp of every gradient entry to [-c, c].
void clip_gradients(std::span<Parameter* const> params, double c);

struct AdamHyper {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<Matrix> first;   // m, one per parameter in ModelParameters::all() order
  std::vector<Matrix> second;  // v
  std::uint64_t step = 0;

  static AdamState zeros_like(std::span<const Parameter* const> params);
  bool operator==(const AdamState&) const = default;
};

/// Bias-corrected Adam update; increments the step counter once.
void adam_step(std::span<Parameter* const> params, AdamState& state, const AdamHyper& hyper);

struct EpochMetrics {
  std::size_t epoch = 0;
  Objective objective = Objective::kCap2All;
  double loss = 0.0;
  std::optional<double> loss_c;
  std::optional<double> loss_vg;
  double wall_ms = 0.0;

  /// {"epoch","objective","loss","loss_c","loss_vg","wall_ms"}; inactive components are null.
  std::string to_json() const;
};

struct StepLoss {
  double total = 0.0;
  std::optional<double> caption;
  std::optional<double> grounding;
};

/// Owns the parameters and optimizer state of one training run.
class Trainer {
 public:
  Trainer(TrainConfig config, const Dataset& data, ModelParameters model);
  /// Resumes from saved state; `epochs_done` epochs are treated as finished.
  Trainer(TrainConfig config, const Dataset& data, ModelParameters model, AdamState adam,
          std::size_t epochs_done);

  /// One optimization step on `batch`: forward, backward, PAD-row masking,
  /// clipping, Adam, PAD-row re-zeroing.
  StepLoss step(const Batch& batch);
  EpochMetrics run_epoch();

  const TrainConfig& config() const { return config_; }
  const ModelParameters& model() const { return model_; }
  ModelParameters& model() { return model_; }
  const AdamState& adam() const { return adam_; }
  std::size_t epochs_done() const { return epochs_done_; }

 private:
  TrainConfig config_;
  const Dataset* data_;
  ModelParameters model_;
  AdamState adam_;
  std::size_t epochs_done_ = 0;
};

struct TrainOptions {
  std::optional<std::filesystem::path> checkpoint;   // rewritten after every epoch
  std::optional<std::filesystem::path> metrics_log;  // JSONL, one record per epoch
  std::function<void(const EpochMetrics&)> on_epoch;
};

struct TrainResult {
  ModelParameters model;
  AdamState adam;
  std::vector<EpochMetrics> log;
};

/// Full run from fresh parameters. Throws before training if the corpus
/// image width disagrees with the config.
TrainResult train(const TrainConfig& config, const Dataset& data, const TrainOptions& options = {},
                  const Matrix* pretrained_embeddings = nullptr);

}  // namespace vgsa
