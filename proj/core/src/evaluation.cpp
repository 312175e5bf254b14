#include "vgsa/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace vgsa {
namespace {

// Splits [0, n) into contiguous chunks, one per hardware thread.
template <typename F>
void parallel_chunks(std::size_t n, F body) {
  const std::size_t workers =
      std::max<std::size_t>(1, std::min<std::size_t>(std::thread::hardware_concurrency(), n / 16));
  if (workers == 1) {
    body(0, n);
    return;
  }
  std::vector<std::thread> pool;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin < end) pool.emplace_back([=] { body(begin, end); });
  }
  for (auto& t : pool) t.join();
}

std::vector<TokenId> source_tokens(const Sample& s) {
  auto tokens = strip_markers(s.src);
  if (tokens.empty()) throw std::invalid_argument("sample '" + s.id + "' has an empty source");
  return tokens;
}

std::string format_double(double v) {
  char buf[32];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

Matrix run_encoder(ModelParameters& model, std::span<const Sample> samples, bool with_projection) {
  const std::size_t width = with_projection ? model.projection.output_width() : 2 * model.encoder.cell();
  Matrix out(samples.size(), width);
  parallel_chunks(samples.size(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t k = begin; k < end; ++k) {
      Graph g;
      const auto tokens = source_tokens(samples[k]);
      Var h = encode_sentence(g, model.encoder, model.embeddings, tokens).rep.combined;
      if (with_projection) h = project(g, model.projection, h, ForwardMode::eval());
      std::copy(h.value().data().begin(), h.value().data().end(), out.row_span(k).begin());
    }
  });
  return out;
}

}  // namespace

Matrix encode_representations(ModelParameters& model, std::span<const Sample> samples) {
  return run_encoder(model, samples, false);
}

Matrix predict_images(ModelParameters& model, std::span<const Sample> samples) {
  return run_encoder(model, samples, true);
}

RetrievalReport summarize_ranks(RetrievalDirection direction, std::vector<std::size_t> ranks) {
  if (ranks.empty()) throw std::invalid_argument("summarize_ranks: no queries");
  RetrievalReport r;
  r.direction = direction;
  r.pool = ranks.size();
  const double n = static_cast<double>(ranks.size());
  auto recall = [&](std::size_t k) {
    return static_cast<double>(std::count_if(ranks.begin(), ranks.end(), [k](std::size_t x) { return x <= k; })) / n;
  };
  r.recall_at_1 = recall(1);
  r.recall_at_5 = recall(5);
  r.recall_at_10 = recall(10);
  std::vector<std::size_t> sorted = ranks;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  r.median_rank = sorted.size() % 2 == 1
                      ? static_cast<double>(sorted[mid])
                      : 0.5 * static_cast<double>(sorted[mid - 1] + sorted[mid]);
  r.ranks = std::move(ranks);
  return r;
}

RetrievalPair retrieval_from_similarity(const Matrix& s) {
  const std::size_t n = s.rows();
  if (n != s.cols()) throw ShapeError("retrieval: similarity matrix " + s.shape_string() + " is not square");
  if (n < 2) throw std::invalid_argument("retrieval: pool must hold at least 2 samples");
  std::vector<std::size_t> s2i(n, 1);
  std::vector<std::size_t> i2s(n, 1);
  for (std::size_t q = 0; q < n; ++q) {
    const double truth = s(q, q);
    for (std::size_t c = 0; c < n; ++c) {
      if (c == q) continue;
      if (s(q, c) > truth || (s(q, c) == truth && c < q)) ++s2i[q];
      if (s(c, q) > truth || (s(c, q) == truth && c < q)) ++i2s[q];
    }
  }
  return {summarize_ranks(RetrievalDirection::kSentenceToImage, std::move(s2i)),
          summarize_ranks(RetrievalDirection::kImageToSentence, std::move(i2s))};
}

RetrievalPair retrieval_eval(ModelParameters& model, std::span<const Sample> samples) {
  if (samples.size() < 2) throw std::invalid_argument("retrieval_eval: corpus must hold at least 2 samples");
  const std::size_t d_img = model.projection.output_width();
  Matrix images(samples.size(), d_img);
  for (std::size_t k = 0; k < samples.size(); ++k) {
    if (samples[k].img.size() != d_img) {
      throw ShapeError("retrieval_eval: sample '" + samples[k].id + "' image width " +
                       std::to_string(samples[k].img.size()) + " vs model " + std::to_string(d_img));
    }
    std::copy(samples[k].img.begin(), samples[k].img.end(), images.row_span(k).begin());
  }
  const Matrix predicted = predict_images(model, samples);
  Graph g;
  const Matrix sim = ad::cosine_similarity(g.constant(predicted), g.constant(images)).value();
  return retrieval_from_similarity(sim);
}

std::string to_json(const RetrievalPair& report) {
  auto one = [](const RetrievalReport& r) {
    return nlohmann::json{{"direction", r.direction == RetrievalDirection::kSentenceToImage
                                            ? "sentence_to_image"
                                            : "image_to_sentence"},
                          {"recall_at_1", r.recall_at_1},
                          {"recall_at_5", r.recall_at_5},
                          {"recall_at_10", r.recall_at_10},
                          {"median_rank", r.median_rank},
                          {"n", r.pool}};
  };
  return nlohmann::json{{"sentence_to_image", one(report.sentence_to_image)},
                        {"image_to_sentence", one(report.image_to_sentence)}}
      .dump();
}

std::string SalienceRecord::to_json() const {
  nlohmann::json attn = nlohmann::json::array();
  for (std::size_t h = 0; h < attention.rows(); ++h) {
    const auto row = attention.row_span(h);
    attn.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return nlohmann::json{{"tokens", tokens}, {"attention", attn}, {"pooled", pooled}}.dump();
}

SalienceRecord salience(ModelParameters& model, const Vocabulary& vocab, std::span<const TokenId> tokens) {
  if (tokens.empty()) throw std::invalid_argument("salience: empty sentence");
  if (std::all_of(tokens.begin(), tokens.end(), [](TokenId t) { return t == kUnk; })) {
    throw std::invalid_argument("salience: sentence has no in-vocabulary token");
  }
  Graph g;
  const EncodedSentence enc = encode_sentence(g, model.encoder, model.embeddings, tokens);
  SalienceRecord r;
  for (TokenId t : tokens) r.tokens.push_back(vocab.token(t));
  r.attention = enc.attention.weights.value();
  r.pooled.assign(tokens.size(), 0.0);
  for (std::size_t h = 0; h < r.attention.rows(); ++h)
    for (std::size_t t = 0; t < tokens.size(); ++t) r.pooled[t] = std::max(r.pooled[t], r.attention(h, t));
  return r;
}

SalienceRecord salience(ModelParameters& model, const Vocabulary& vocab, std::string_view sentence) {
  const auto tokens = vocab.encode(sentence, false);
  return salience(model, vocab, tokens);
}

void embed(ModelParameters& model, const Vocabulary& vocab, std::istream& in, std::ostream& out) {
  std::string line;
  while (std::getline(in, line)) {
    auto tokens = vocab.encode(line, false);
    if (tokens.empty()) tokens.push_back(kUnk);
    Graph g;
    const Matrix& h = encode_sentence(g, model.encoder, model.embeddings, tokens).rep.combined.value();
    for (std::size_t i = 0; i < h.size(); ++i) {
      if (i > 0) out << ' ';
      out << format_double(h[i]);
    }
    out << '\n';
  }
}

double mean_token_nll(ModelParameters& model, std::span<const Sample> samples) {
  double total = 0.0;
  std::size_t count = 0;
  for (const Sample& s : samples) {
    Graph g;
    const auto tokens = source_tokens(s);
    Var h = encode_sentence(g, model.encoder, model.embeddings, tokens).rep.combined;
    total += caption_nll(g, model.decoder, model.embeddings, h, s.tgt).scalar();
    count += predicted_tokens(s.tgt);
  }
  if (count == 0) throw std::invalid_argument("mean_token_nll: no target tokens");
  return total / static_cast<double>(count);
}

double copy_accuracy(ModelParameters& model, std::span<const Sample> samples) {
  std::size_t hits = 0;
  std::size_t total = 0;
  for (const Sample& s : samples) {
    Matrix h;
    {
      Graph g;
      h = encode_sentence(g, model.encoder, model.embeddings, source_tokens(s)).rep.combined.value();
    }
    const auto wanted = strip_markers(s.tgt);
    const auto decoded = greedy_decode(model.decoder, model.embeddings, h, wanted.size() + 1);
    for (std::size_t t = 0; t < wanted.size(); ++t) {
      if (t < decoded.size() && decoded[t] == wanted[t]) ++hits;
    }
    total += wanted.size();
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace vgsa
