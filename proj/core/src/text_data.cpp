#include "vgsa/text_data.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "json.hpp"

namespace vgsa {
namespace {

using json = nlohmann::json;

constexpr std::string_view kStripChars = ".,!?;:\"()";
const std::vector<std::string> kReservedNames = {"<pad>", "<unk>", "<s>", "</s>"};

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string line_error(std::size_t line, const std::string& what) {
  return "line " + std::to_string(line) + ": " + what;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) {
      std::string_view word = text.substr(i, j - i);
      const auto first = word.find_first_not_of(kStripChars);
      if (first != std::string_view::npos) {
        const auto last = word.find_last_not_of(kStripChars);
        std::string tok(word.substr(first, last - first + 1));
        for (char& c : tok) {
          const auto u = static_cast<unsigned char>(c);
          if (u < 0x80) c = static_cast<char>(std::tolower(u));
        }
        out.push_back(std::move(tok));
      }
    }
    i = j;
  }
  return out;
}

Vocabulary Vocabulary::build(std::span<const std::string> texts, std::size_t min_count) {
  std::map<std::string, std::size_t> counts;
  for (const auto& t : texts)
    for (auto& tok : tokenize(t)) ++counts[tok];
  if (counts.empty()) throw DataError("build_vocab: corpus has no tokens");

  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    const bool reserved =
        std::find(kReservedNames.begin(), kReservedNames.end(), tok) != kReservedNames.end();
    if (n >= min_count && !reserved) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });

  std::vector<std::string> tokens = kReservedNames;
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return from_tokens(std::move(tokens));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  if (tokens.size() < kReservedTokens ||
      !std::equal(kReservedNames.begin(), kReservedNames.end(), tokens.begin())) {
    throw DataError("vocabulary must start with the reserved tokens <pad> <unk> <s> </s>");
  }
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  for (std::size_t i = 0; i < v.tokens_.size(); ++i) {
    if (!v.index_.emplace(v.tokens_[i], static_cast<TokenId>(i)).second) {
      throw DataError("vocabulary: duplicate token '" + v.tokens_[i] + "'");
    }
  }
  return v;
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<TokenId> Vocabulary::encode(std::string_view text, bool wrap) const {
  std::vector<TokenId> ids;
  if (wrap) ids.push_back(kBos);
  for (const auto& tok : tokenize(text)) ids.push_back(id(tok));
  if (wrap) ids.push_back(kEos);
  return ids;
}

std::vector<std::string> Corpus::texts() const {
  std::vector<std::string> out;
  out.reserve(records.size() * 2);
  for (const auto& r : records) {
    out.push_back(r.src);
    out.push_back(r.tgt);
  }
  return out;
}

Corpus read_corpus(std::istream& in) {
  Corpus corpus;
  std::string line;
  std::size_t lineno = 0;
  bool have_meta = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(line_error(lineno, std::string("invalid JSON: ") + e.what()));
    }
    if (!have_meta) {
      if (!j.contains("d_img") || !j["d_img"].is_number_unsigned() || j["d_img"].get<std::size_t>() == 0) {
        throw DataError(line_error(lineno, "first line must be metadata {\"d_img\": N} with N > 0"));
      }
      corpus.d_img = j["d_img"].get<std::size_t>();
      have_meta = true;
      continue;
    }
    CaptionRecord r;
    try {
      r.id = j.at("id").get<std::string>();
      r.src = j.at("src").get<std::string>();
      r.tgt = j.at("tgt").get<std::string>();
      r.img = j.at("img").get<std::vector<double>>();
      if (j.contains("salient")) r.salient = j["salient"].get<std::string>();
    } catch (const json::exception& e) {
      throw DataError(line_error(lineno, std::string("bad record: ") + e.what()));
    }
    if (r.img.size() != corpus.d_img) {
      throw DataError(line_error(lineno, "img has width " + std::to_string(r.img.size()) +
                                             ", corpus declares " + std::to_string(corpus.d_img)));
    }
    const double norm2 = std::inner_product(r.img.begin(), r.img.end(), r.img.begin(), 0.0);
    if (!(norm2 > 0.0) || !std::isfinite(norm2)) {
      throw DataError(line_error(lineno, "img must be finite with nonzero norm"));
    }
    if (tokenize(r.src).empty() || tokenize(r.tgt).empty()) {
      throw DataError(line_error(lineno, "src and tgt must contain at least one token"));
    }
    corpus.records.push_back(std::move(r));
  }
  if (!have_meta) throw DataError("corpus is empty (missing metadata line)");
  return corpus;
}

Corpus read_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open corpus " + path.string());
  return read_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
  out << json{{"d_img", corpus.d_img}}.dump() << '\n';
  for (const auto& r : corpus.records) {
    json j{{"id", r.id}, {"src", r.src}, {"tgt", r.tgt}, {"img", r.img}};
    if (!r.salient.empty()) j["salient"] = r.salient;
    out << j.dump() << '\n';
  }
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write corpus " + path.string());
  write_corpus(out, corpus);
}

std::vector<Sample> make_samples(const Corpus& corpus, const Vocabulary& vocab) {
  std::vector<Sample> out;
  out.reserve(corpus.records.size());
  for (const auto& r : corpus.records) {
    out.push_back(Sample{r.id, vocab.encode(r.src, true), vocab.encode(r.tgt, true), r.img, r.salient});
  }
  return out;
}

std::vector<TokenId> strip_markers(std::span<const TokenId> wrapped) {
  std::vector<TokenId> out;
  for (TokenId t : wrapped) {
    if (t == kPad) break;
    if (t == kBos || t == kEos) continue;
    out.push_back(t);
  }
  return out;
}

EmbeddingTable load_embeddings(std::istream& in, const Vocabulary& vocab, std::size_t d_e,
                               std::uint64_t seed) {
  EmbeddingTable table{Matrix(vocab.size(), d_e), 0.0};
  std::mt19937_64 rng(seed);
  for (double& v : table.weights.data()) v = -0.1 + 0.2 * uniform01(rng);

  std::vector<bool> covered(vocab.size(), false);
  std::string line;
  std::size_t lineno = 0;
  std::size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::istringstream ss(line);
    std::string token;
    if (!(ss >> token)) continue;
    std::vector<double> vec;
    std::string field;
    while (ss >> field) {
      try {
        std::size_t used = 0;
        vec.push_back(std::stod(field, &used));
        if (used != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw DataError(line_error(lineno, "non-numeric embedding value '" + field + "'"));
      }
    }
    if (width == 0) {
      width = vec.size();
      if (width != d_e) {
        throw DataError(line_error(lineno, "embedding width " + std::to_string(width) +
                                               " does not match d_e=" + std::to_string(d_e)));
      }
    } else if (vec.size() != width) {
      throw DataError(line_error(lineno, "inconsistent embedding width " +
                                             std::to_string(vec.size()) + ", expected " +
                                             std::to_string(width)));
    }
    if (auto id = vocab.find(token); id && *id != kPad) {
      std::copy(vec.begin(), vec.end(), table.weights.row_span(*id).begin());
      covered[*id] = true;
    }
  }
  for (double& v : table.weights.row_span(kPad)) v = 0.0;

  const std::size_t content = vocab.size() - kReservedTokens;
  if (content > 0) {
    const auto hits = std::count(covered.begin() + kReservedTokens, covered.end(), true);
    table.coverage = static_cast<double>(hits) / static_cast<double>(content);
  }
  return table;
}

EmbeddingTable load_embeddings(const std::filesystem::path& path, const Vocabulary& vocab,
                               std::size_t d_e, std::uint64_t seed) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open embeddings " + path.string());
  return load_embeddings(in, vocab, d_e, seed);
}

Batch assemble_batch(std::span<const Sample* const> samples) {
  if (samples.size() < 2) throw std::invalid_argument("batch needs at least 2 samples");
  for (std::size_t i = 0; i < samples.size(); ++i)
    for (std::size_t j = i + 1; j < samples.size(); ++j)
      if (samples[i]->id == samples[j]->id) {
        throw std::invalid_argument("batch contains duplicate sample id '" + samples[i]->id + "'");
      }

  Batch b;
  b.samples.assign(samples.begin(), samples.end());
  std::size_t src_len = 0;
  std::size_t tgt_len = 0;
  for (const Sample* s : samples) {
    src_len = std::max(src_len, s->src.size());
    tgt_len = std::max(tgt_len, s->tgt.size());
  }
  auto pad = [](const std::vector<TokenId>& seq, std::size_t len, std::vector<TokenId>& ids,
                std::vector<std::uint8_t>& mask) {
    ids.assign(len, kPad);
    mask.assign(len, 0);
    std::copy(seq.begin(), seq.end(), ids.begin());
    std::fill_n(mask.begin(), seq.size(), 1);
  };
  const std::size_t n = samples.size();
  b.src.resize(n);
  b.tgt.resize(n);
  b.src_mask.resize(n);
  b.tgt_mask.resize(n);
  b.negatives.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    pad(samples[k]->src, src_len, b.src[k], b.src_mask[k]);
    pad(samples[k]->tgt, tgt_len, b.tgt[k], b.tgt_mask[k]);
    for (std::size_t j = 0; j < n; ++j)
      if (j != k) b.negatives[k].push_back(j);
  }
  return b;
}

std::vector<Batch> make_batches(std::span<const Sample> samples, std::size_t batch_size,
                                std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 2) throw std::invalid_argument("batch size must be at least 2");
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(epoch >> 32),
                    0x5eedU};
  std::mt19937_64 rng(seq);
  // Fisher-Yates with explicit index draws so the order does not depend on
  // the standard library's shuffle implementation.
  for (std::size_t i = order.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(order[i - 1], order[j]);
  }

  std::vector<Batch> batches;
  std::vector<const Sample*> chunk;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    if (end - start < 2) break;
    chunk.clear();
    for (std::size_t i = start; i < end; ++i) chunk.push_back(&samples[order[i]]);
    batches.push_back(assemble_batch(chunk));
  }
  return batches;
}

}  // namespace vgsa
