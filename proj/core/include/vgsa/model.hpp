#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "vgsa/decoder.hpp"
#include "vgsa/encoder.hpp"
#include "vgsa/grounding.hpp"

namespace vgsa {

enum class Objective { kCap2Cap, kCap2Img, kCap2All };

std::string_view to_string(Objective o);
Objective parse_objective(std::string_view name);

struct TrainConfig {
  Objective objective = Objective::kCap2All;
  std::size_t d_e = 32;
  std::size_t d_cell = 32;
  std::size_t d_a = 16;
  std::size_t n_a = 4;
  std::size_t d_img = 64;
  std::size_t d_p = 0;  // 0 means "same as d_img"
  std::size_t batch_size = 32;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip = 5.0;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double dropout = 0.3;
  std::size_t min_count = 1;

  std::size_t projection_width() const { return d_p == 0 ? d_img : d_p; }
  /// Throws std::invalid_argument naming the first violated constraint.
  void validate() const;

  bool operator==(const TrainConfig&) const = default;
};

std::string config_to_json(const TrainConfig& c);
TrainConfig config_from_json(std::string_view text);
/// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const TrainConfig& c);

struct ModelDims {
  std::size_t vocab = 0;
  std::size_t d_e = 0;
  std::size_t d_cell = 0;
  std::size_t d_a = 0;
  std::size_t n_a = 0;
  std::size_t d_img = 0;
  std::size_t d_p = 0;

  static ModelDims from_config(const TrainConfig& c, std::size_t vocab);
};

/// All trainable tensors. Copying yields an independent snapshot.
struct ModelParameters {
  Parameter embeddings;  // W_E: V x d_e, shared by encoder and decoder
  EncoderParams encoder;
  DecoderParams decoder;
  ProjectionParams projection;

  ModelParameters() = default;
  explicit ModelParameters(const ModelDims& dims);

  /// Every tensor exactly once, in a fixed order.
  std::vector<Parameter*> all();
  std::vector<const Parameter*> all() const;
  ModelDims dims() const;
  void zero_grad();
};

/// Recurrent 4d x d blocks get one orthogonal d x d matrix per gate (Gram-Schmidt
/// QR of a seeded Gaussian with sign-corrected R). Every other weight is
/// Xavier-uniform; biases are zero except LSTM forget gates, which start at 1.
/// When `embeddings` is given it replaces the Xavier draw for W_E.
ModelParameters init_params(const ModelDims& dims, std::uint64_t seed,
                            const Matrix* embeddings = nullptr);

/// Q factor of a square matrix via Gram-Schmidt with one reorthogonalization
/// pass, with columns signed so that R has a positive diagonal.
Matrix orthogonal_factor(const Matrix& square);

inline constexpr double kForgetBiasInit = 1.0;

}  // namespace vgsa
