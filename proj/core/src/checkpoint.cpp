#include "vgsa/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>

#include "json.hpp"

namespace vgsa {
namespace {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

constexpr char kMagic[8] = {'V', 'G', 'S', 'A', 'C', 'K', 'P', 'T'};

template <typename T>
void put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <typename T>
T get(std::istream& in) {
  T v{};
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("checkpoint: truncated file");
  return v;
}

void put_tensor(std::ostream& out, const std::string& name, const Matrix& m) {
  put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  put<std::uint64_t>(out, m.rows());
  put<std::uint64_t>(out, m.cols());
  out.write(reinterpret_cast<const char*>(m.data().data()),
            static_cast<std::streamsize>(m.size() * sizeof(double)));
}

}  // namespace

Checkpoint snapshot(const Trainer& trainer, const Vocabulary& vocab) {
  return Checkpoint{trainer.config(), vocab, trainer.model(), trainer.adam(), trainer.epochs_done()};
}

Trainer resume(const Checkpoint& ckpt, const Dataset& data) {
  if (!(data.vocab == ckpt.vocab)) {
    throw std::invalid_argument("resume: dataset vocabulary differs from the checkpoint's");
  }
  AdamState adam = ckpt.adam;
  if (adam.first.empty()) {
    const ModelParameters& model = ckpt.model;
    adam = AdamState::zeros_like(model.all());
  }
  return Trainer(ckpt.config, data, ckpt.model, std::move(adam), ckpt.epochs_done);
}

void save_checkpoint(std::ostream& out, const Checkpoint& ckpt) {
  nlohmann::json header{{"config", nlohmann::json::parse(config_to_json(ckpt.config))},
                        {"config_hash", config_hash(ckpt.config)},
                        {"epochs_done", ckpt.epochs_done},
                        {"adam_step", ckpt.adam.step},
                        {"vocab", ckpt.vocab.tokens()}};
  const std::string text = header.dump();

  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));

  const auto params = ckpt.model.all();
  const bool with_adam = !ckpt.adam.first.empty();
  if (with_adam && (ckpt.adam.first.size() != params.size() || ckpt.adam.second.size() != params.size())) {
    throw std::invalid_argument("save_checkpoint: optimizer state does not match parameters");
  }
  put<std::uint64_t>(out, params.size() * (with_adam ? 3 : 1));
  for (const Parameter* p : params) put_tensor(out, p->name, p->value);
  if (with_adam) {
    for (std::size_t i = 0; i < params.size(); ++i) put_tensor(out, "adam.m/" + params[i]->name, ckpt.adam.first[i]);
    for (std::size_t i = 0; i < params.size(); ++i) put_tensor(out, "adam.v/" + params[i]->name, ckpt.adam.second[i]);
  }
  if (!out) throw DataError("checkpoint: write failed");
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  save_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0) {
    throw DataError("checkpoint: bad magic");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  const auto json_len = get<std::uint64_t>(in);
  std::string text(json_len, '\0');
  if (!in.read(text.data(), static_cast<std::streamsize>(json_len))) throw DataError("checkpoint: truncated header");

  Checkpoint ckpt;
  try {
    const auto header = nlohmann::json::parse(text);
    ckpt.config = config_from_json(header.at("config").dump());
    if (header.at("config_hash").get<std::string>() != config_hash(ckpt.config)) {
      throw DataError("checkpoint: config hash mismatch");
    }
    ckpt.epochs_done = header.at("epochs_done").get<std::size_t>();
    ckpt.adam.step = header.at("adam_step").get<std::uint64_t>();
    ckpt.vocab = Vocabulary::from_tokens(header.at("vocab").get<std::vector<std::string>>());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint: bad header: ") + e.what());
  }

  std::map<std::string, Matrix> tensors;
  const auto count = get<std::uint64_t>(in);
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto name_len = get<std::uint32_t>(in);
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError("checkpoint: truncated tensor name");
    const auto rows = get<std::uint64_t>(in);
    const auto cols = get<std::uint64_t>(in);
    std::vector<double> data(rows * cols);
    if (!in.read(reinterpret_cast<char*>(data.data()), static_cast<std::streamsize>(data.size() * sizeof(double)))) {
      throw DataError("checkpoint: truncated tensor '" + name + "'");
    }
    tensors.emplace(std::move(name), Matrix(rows, cols, std::move(data)));
  }

  ckpt.model = ModelParameters(ModelDims::from_config(ckpt.config, ckpt.vocab.size()));
  auto take = [&tensors](const std::string& name, const Matrix& like) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("checkpoint: missing tensor '" + name + "'");
    if (!it->second.same_shape(like)) {
      throw DataError("checkpoint: tensor '" + name + "' has shape " + it->second.shape_string() +
                      ", expected " + like.shape_string());
    }
    return it->second;
  };
  const auto params = ckpt.model.all();
  for (Parameter* p : params) {
    p->value = take(p->name, p->value);
    p->zero_grad();
  }
  if (tensors.size() == params.size() * 3) {
    for (Parameter* p : params) {
      ckpt.adam.first.push_back(take("adam.m/" + p->name, p->value));
      ckpt.adam.second.push_back(take("adam.v/" + p->name, p->value));
    }
  } else if (tensors.size() != params.size()) {
    throw DataError("checkpoint: unexpected tensor count " + std::to_string(tensors.size()));
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  return load_checkpoint(in);
}

}  // namespace vgsa
