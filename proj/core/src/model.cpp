#include "vgsa/model.hpp"

#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

#include "json.hpp"

namespace vgsa {
namespace {

using json = nlohmann::json;

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

void xavier(Parameter& p, std::mt19937_64& rng) {
  const double fan_out = static_cast<double>(p.value.rows());
  const double fan_in = static_cast<double>(p.value.cols());
  const double bound = std::sqrt(6.0 / (fan_in + fan_out));
  for (double& v : p.value.data()) v = bound * (2.0 * uniform01(rng) - 1.0);
}

void orthogonal_blocks(Parameter& p, std::mt19937_64& rng) {
  const std::size_t d = p.value.cols();
  const std::size_t blocks = p.value.rows() / d;
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t b = 0; b < blocks; ++b) {
    Matrix draw(d, d);
    for (double& v : draw.data()) v = gauss(rng);
    const Matrix q = orthogonal_factor(draw);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = 0; j < d; ++j) p.value(b * d + i, j) = q(i, j);
  }
}

void init_lstm(LstmParams& lstm, std::mt19937_64& rng) {
  xavier(lstm.input_weights, rng);
  orthogonal_blocks(lstm.recurrent_weights, rng);
  lstm.bias.value.fill(0.0);
  const std::size_t d = lstm.hidden();
  for (std::size_t i = d; i < 2 * d; ++i) lstm.bias.value[i] = kForgetBiasInit;
}

}  // namespace

std::string_view to_string(Objective o) {
  switch (o) {
    case Objective::kCap2Cap: return "cap2cap";
    case Objective::kCap2Img: return "cap2img";
    case Objective::kCap2All: return "cap2all";
  }
  return "unknown";
}

Objective parse_objective(std::string_view name) {
  if (name == "cap2cap") return Objective::kCap2Cap;
  if (name == "cap2img") return Objective::kCap2Img;
  if (name == "cap2all") return Objective::kCap2All;
  throw std::invalid_argument("unknown objective '" + std::string(name) +
                              "' (expected cap2cap, cap2img or cap2all)");
}

void TrainConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw std::invalid_argument(std::string("invalid config: ") + what);
  };
  require(d_e >= 1 && d_cell >= 1 && d_a >= 1 && n_a >= 1 && d_img >= 1, "all dims must be >= 1");
  require(batch_size >= 2, "batch size must be >= 2");
  require(clip > 0.0, "clip bound must be > 0");
  require(learning_rate > 0.0, "learning rate must be > 0");
  require(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0, "Adam betas must lie in [0, 1)");
  require(adam_eps > 0.0, "Adam epsilon must be > 0");
  require(dropout >= 0.0 && dropout < 1.0, "dropout must lie in [0, 1)");
  require(min_count >= 1, "min_count must be >= 1");
}

std::string config_to_json(const TrainConfig& c) {
  json j{{"objective", std::string(to_string(c.objective))},
         {"d_e", c.d_e},
         {"d_cell", c.d_cell},
         {"d_a", c.d_a},
         {"n_a", c.n_a},
         {"d_img", c.d_img},
         {"d_p", c.d_p},
         {"batch_size", c.batch_size},
         {"learning_rate", c.learning_rate},
         {"beta1", c.beta1},
         {"beta2", c.beta2},
         {"adam_eps", c.adam_eps},
         {"clip", c.clip},
         {"epochs", c.epochs},
         {"seed", c.seed},
         {"dropout", c.dropout},
         {"min_count", c.min_count}};
  return j.dump();
}

TrainConfig config_from_json(std::string_view text) {
  const json j = json::parse(text);
  TrainConfig c;
  c.objective = parse_objective(j.at("objective").get<std::string>());
  c.d_e = j.at("d_e").get<std::size_t>();
  c.d_cell = j.at("d_cell").get<std::size_t>();
  c.d_a = j.at("d_a").get<std::size_t>();
  c.n_a = j.at("n_a").get<std::size_t>();
  c.d_img = j.at("d_img").get<std::size_t>();
  c.d_p = j.at("d_p").get<std::size_t>();
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.beta1 = j.at("beta1").get<double>();
  c.beta2 = j.at("beta2").get<double>();
  c.adam_eps = j.at("adam_eps").get<double>();
  c.clip = j.at("clip").get<double>();
  c.epochs = j.at("epochs").get<std::size_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.dropout = j.at("dropout").get<double>();
  c.min_count = j.at("min_count").get<std::size_t>();
  return c;
}

std::string config_hash(const TrainConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : config_to_json(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

ModelDims ModelDims::from_config(const TrainConfig& c, std::size_t vocab) {
  return {vocab, c.d_e, c.d_cell, c.d_a, c.n_a, c.d_img, c.projection_width()};
}

ModelParameters::ModelParameters(const ModelDims& d)
    : embeddings("embeddings", Matrix(d.vocab, d.d_e)),
      encoder(d.d_e, d.d_cell, d.d_a, d.n_a),
      decoder(d.vocab, d.d_e, d.d_cell),
      projection(2 * d.d_cell, d.d_p, d.d_img) {}

std::vector<Parameter*> ModelParameters::all() {
  std::vector<Parameter*> out{&embeddings};
  for (LstmParams* l : {&encoder.forward, &encoder.backward}) {
    out.insert(out.end(), {&l->input_weights, &l->recurrent_weights, &l->bias});
  }
  out.insert(out.end(), {&encoder.attn_hidden, &encoder.attn_heads, &decoder.init_h, &decoder.init_c,
                         &decoder.cell.input_weights, &decoder.cell.recurrent_weights,
                         &decoder.cell.bias, &decoder.out_weights, &decoder.out_bias});
  for (std::size_t l = 0; l < 4; ++l) {
    out.push_back(&projection.weights[l]);
    out.push_back(&projection.biases[l]);
  }
  return out;
}

std::vector<const Parameter*> ModelParameters::all() const {
  auto mut = const_cast<ModelParameters*>(this)->all();
  return {mut.begin(), mut.end()};
}

ModelDims ModelParameters::dims() const {
  return {embeddings.value.rows(),
          embeddings.value.cols(),
          encoder.cell(),
          encoder.attn_hidden.value.rows(),
          encoder.attn_heads.value.rows(),
          projection.output_width(),
          projection.weights[0].value.rows()};
}

void ModelParameters::zero_grad() {
  for (Parameter* p : all()) p->zero_grad();
}

Matrix orthogonal_factor(const Matrix& a) {
  if (a.rows() != a.cols()) throw ShapeError("orthogonal_factor: matrix " + a.shape_string() + " is not square");
  const std::size_t n = a.rows();
  Matrix q = a;
  for (std::size_t j = 0; j < n; ++j) {
    for (int pass = 0; pass < 2; ++pass) {
      for (std::size_t k = 0; k < j; ++k) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += q(i, k) * q(i, j);
        for (std::size_t i = 0; i < n; ++i) q(i, j) -= dot * q(i, k);
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += q(i, j) * q(i, j);
    norm = std::sqrt(norm);
    if (norm == 0.0) throw std::domain_error("orthogonal_factor: rank-deficient input");
    // R(j, j) = norm > 0, so the factorization is the sign-corrected one.
    for (std::size_t i = 0; i < n; ++i) q(i, j) /= norm;
  }
  return q;
}

ModelParameters init_params(const ModelDims& dims, std::uint64_t seed, const Matrix* embeddings) {
  ModelParameters m(dims);
  std::mt19937_64 rng(seed);

  if (embeddings != nullptr) {
    if (embeddings->rows() != dims.vocab || embeddings->cols() != dims.d_e) {
      throw ShapeError("init_params: embeddings " + embeddings->shape_string() + " vs [" +
                       std::to_string(dims.vocab) + "x" + std::to_string(dims.d_e) + "]");
    }
    m.embeddings.value = *embeddings;
  } else {
    xavier(m.embeddings, rng);
  }
  for (double& v : m.embeddings.value.row_span(kPad)) v = 0.0;

  init_lstm(m.encoder.forward, rng);
  init_lstm(m.encoder.backward, rng);
  xavier(m.encoder.attn_hidden, rng);
  xavier(m.encoder.attn_heads, rng);

  xavier(m.decoder.init_h, rng);
  xavier(m.decoder.init_c, rng);
  init_lstm(m.decoder.cell, rng);
  xavier(m.decoder.out_weights, rng);
  m.decoder.out_bias.value.fill(0.0);

  for (std::size_t l = 0; l < 4; ++l) {
    xavier(m.projection.weights[l], rng);
    m.projection.biases[l].value.fill(0.0);
  }
  m.zero_grad();
  return m;
}

}  // namespace vgsa
