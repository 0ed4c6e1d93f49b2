#include "gapfinder/topics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>

#include "gapfinder/tsv.hpp"

namespace gapfinder {

namespace {

double unit_draw(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Draws an index proportionally to `weights[0..n)`.
int sample_index(std::mt19937_64& rng, const double* cumulative, int n) {
  const double u = unit_draw(rng) * cumulative[n - 1];
  const auto* it = std::upper_bound(cumulative, cumulative + n, u);
  return std::min(static_cast<int>(it - cumulative), n - 1);
}

std::uint64_t fnv1a(const TokenBag& doc, std::uint64_t seed) {
  std::uint64_t h = 1469598103934665603ULL ^ seed;
  for (const auto& tok : doc) {
    for (unsigned char ch : tok) {
      h ^= ch;
      h *= 1099511628211ULL;
    }
    h ^= 0x20;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

TopicModel::TopicModel(std::vector<std::string> vocabulary, Eigen::MatrixXd topic_word,
                       double alpha, double beta, std::uint64_t seed, int inference_sweeps)
    : vocabulary_(std::move(vocabulary)),
      topic_word_(std::move(topic_word)),
      alpha_(alpha),
      beta_(beta),
      seed_(seed),
      inference_sweeps_(inference_sweeps) {
  for (std::size_t i = 0; i < vocabulary_.size(); ++i) {
    index_.emplace(vocabulary_[i], static_cast<int>(i));
  }
}

int TopicModel::word_index(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? -1 : it->second;
}

void TopicModel::save(const std::filesystem::path& file) const {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::MissingFile, "cannot write " + file.string());
  out << "format_version\t" << kFormatVersion << '\n';
  out << "n_topics\t" << n_topics() << '\n';
  out << "vocab_size\t" << vocab_size() << '\n';
  out << "alpha\t" << tsv::format_double(alpha_) << '\n';
  out << "beta\t" << tsv::format_double(beta_) << '\n';
  out << "seed\t" << seed_ << '\n';
  out << "inference_sweeps\t" << inference_sweeps_ << '\n';
  for (std::size_t w = 0; w < vocabulary_.size(); ++w) {
    out << vocabulary_[w];
    for (Eigen::Index k = 0; k < topic_word_.rows(); ++k) {
      out << '\t' << tsv::format_double(topic_word_(k, static_cast<Eigen::Index>(w)));
    }
    out << '\n';
  }
}

TopicModel TopicModel::load(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, file.string());
  std::map<std::string, std::string> header;
  std::string line;
  const char* keys[] = {"format_version", "n_topics", "vocab_size", "alpha",
                        "beta",           "seed",     "inference_sweeps"};
  for (const char* key : keys) {
    if (!std::getline(in, line)) throw Error(Errc::MalformedRow, file.string() + ": truncated");
    auto f = tsv::split(line);
    if (f.size() != 2 || f[0] != key) {
      throw Error(Errc::MalformedRow, file.string() + ": expected '" + key + "'");
    }
    header[key] = std::string(f[1]);
  }
  auto num = [&](const char* key) { return tsv::parse_double(header[key], file, 0, key); };
  auto integer = [&](const char* key) { return tsv::parse_int(header[key], file, 0, key); };
  if (integer("format_version") != kFormatVersion) {
    throw Error(Errc::StaleArtifact, file.string() + ": unsupported topic model format");
  }
  const auto topics = integer("n_topics");
  const auto vocab = integer("vocab_size");
  std::vector<std::string> vocabulary;
  Eigen::MatrixXd topic_word(topics, vocab);
  for (std::int64_t w = 0; w < vocab; ++w) {
    if (!std::getline(in, line)) throw Error(Errc::MalformedRow, file.string() + ": truncated");
    auto f = tsv::split(line);
    if (static_cast<std::int64_t>(f.size()) != topics + 1) {
      throw Error(Errc::MalformedRow, file.string() + ": bad matrix row");
    }
    vocabulary.emplace_back(f[0]);
    for (std::int64_t k = 0; k < topics; ++k) {
      topic_word(k, w) = tsv::parse_double(f[static_cast<std::size_t>(k + 1)], file,
                                           static_cast<std::size_t>(w + 8), "topic_word");
    }
  }
  return TopicModel(std::move(vocabulary), std::move(topic_word), num("alpha"), num("beta"),
                    static_cast<std::uint64_t>(integer("seed")),
                    static_cast<int>(integer("inference_sweeps")));
}

GibbsSampler::GibbsSampler(std::span<const TokenBag> docs, const LdaConfig& config)
    : n_topics_(config.n_topics),
      alpha_(config.resolved_alpha()),
      beta_(config.beta),
      rng_(config.seed) {
  std::map<std::string, std::int32_t> vocab;
  for (const auto& doc : docs) {
    for (const auto& tok : doc) vocab.emplace(tok, 0);
  }
  std::int32_t next = 0;
  for (auto& [tok, id] : vocab) {
    id = next++;
    vocabulary_.push_back(tok);
  }

  const auto K = static_cast<std::size_t>(n_topics_);
  doc_topic_.assign(docs.size() * K, 0);
  word_topic_.assign(vocabulary_.size() * K, 0);
  topic_.assign(K, 0);
  doc_length_.assign(docs.size(), 0);
  weights_.assign(K, 0.0);
  for (std::size_t d = 0; d < docs.size(); ++d) {
    for (const auto& tok : docs[d]) {
      const auto w = vocab.at(tok);
      const auto k = static_cast<std::int32_t>(rng_() % K);
      words_.push_back(w);
      doc_of_.push_back(static_cast<std::int32_t>(d));
      assignments_.push_back(k);
      ++doc_topic_[d * K + static_cast<std::size_t>(k)];
      ++word_topic_[static_cast<std::size_t>(w) * K + static_cast<std::size_t>(k)];
      ++topic_[static_cast<std::size_t>(k)];
      ++doc_length_[d];
    }
  }
}

void GibbsSampler::sweep() {
  const auto K = static_cast<std::size_t>(n_topics_);
  const double v_beta = static_cast<double>(vocabulary_.size()) * beta_;
  for (std::size_t i = 0; i < assignments_.size(); ++i) {
    const auto d = static_cast<std::size_t>(doc_of_[i]);
    const auto w = static_cast<std::size_t>(words_[i]);
    auto* dt = &doc_topic_[d * K];
    auto* wt = &word_topic_[w * K];
    const auto old = static_cast<std::size_t>(assignments_[i]);
    --dt[old];
    --wt[old];
    --topic_[old];

    double running = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      running += (dt[k] + alpha_) * (wt[k] + beta_) / (topic_[k] + v_beta);
      weights_[k] = running;
    }
    const auto k = static_cast<std::size_t>(sample_index(rng_, weights_.data(), n_topics_));
    assignments_[i] = static_cast<std::int32_t>(k);
    ++dt[k];
    ++wt[k];
    ++topic_[k];
  }
}

double GibbsSampler::perplexity() const {
  const auto K = static_cast<std::size_t>(n_topics_);
  const double v_beta = static_cast<double>(vocabulary_.size()) * beta_;
  const double k_alpha = static_cast<double>(K) * alpha_;
  double log_likelihood = 0.0;
  for (std::size_t i = 0; i < assignments_.size(); ++i) {
    const auto d = static_cast<std::size_t>(doc_of_[i]);
    const auto w = static_cast<std::size_t>(words_[i]);
    const auto* dt = &doc_topic_[d * K];
    const auto* wt = &word_topic_[w * K];
    double p = 0.0;
    for (std::size_t k = 0; k < K; ++k) {
      p += (dt[k] + alpha_) / (doc_length_[d] + k_alpha) * (wt[k] + beta_) /
           (topic_[k] + v_beta);
    }
    log_likelihood += std::log(p);
  }
  return std::exp(-log_likelihood / static_cast<double>(assignments_.size()));
}

Eigen::MatrixXd GibbsSampler::topic_word() const {
  const auto K = static_cast<std::size_t>(n_topics_);
  const auto V = vocabulary_.size();
  const double v_beta = static_cast<double>(V) * beta_;
  Eigen::MatrixXd phi(n_topics_, static_cast<Eigen::Index>(V));
  for (std::size_t w = 0; w < V; ++w) {
    for (std::size_t k = 0; k < K; ++k) {
      phi(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(w)) =
          (word_topic_[w * K + k] + beta_) / (topic_[k] + v_beta);
    }
  }
  return phi;
}

std::int64_t GibbsSampler::doc_topic_total() const {
  return std::accumulate(doc_topic_.begin(), doc_topic_.end(), std::int64_t{0});
}

std::int64_t GibbsSampler::word_topic_total() const {
  return std::accumulate(word_topic_.begin(), word_topic_.end(), std::int64_t{0});
}

std::int64_t GibbsSampler::topic_total() const {
  return std::accumulate(topic_.begin(), topic_.end(), std::int64_t{0});
}

TopicModel train_lda(std::span<const TokenBag> docs, const LdaConfig& config,
                     const SweepObserver& observer) {
  if (config.n_topics < 2) throw Error(Errc::InvalidSpec, "n_topics must be at least 2");
  if (config.iterations < 1) throw Error(Errc::InvalidSpec, "iterations must be positive");
  if (config.beta <= 0.0 || config.resolved_alpha() <= 0.0) {
    throw Error(Errc::InvalidSpec, "Dirichlet hyperparameters must be positive");
  }
  const bool any_tokens =
      std::any_of(docs.begin(), docs.end(), [](const TokenBag& d) { return !d.empty(); });
  if (!any_tokens) throw Error(Errc::EmptyCorpus, "no document contains tokens");

  GibbsSampler sampler(docs, config);
  std::vector<double> trace;
  trace.reserve(static_cast<std::size_t>(config.iterations));
  for (int s = 1; s <= config.iterations; ++s) {
    sampler.sweep();
    trace.push_back(sampler.perplexity());
    if (observer) observer(sampler, s);
  }
  TopicModel model(sampler.vocabulary(), sampler.topic_word(), config.resolved_alpha(),
                   config.beta, config.seed, config.inference_sweeps);
  model.perplexity_trace = std::move(trace);
  return model;
}

TopicVector infer_topic_vector(const TopicModel& model, const TokenBag& doc) {
  const int K = model.n_topics();
  TopicVector zero = TopicVector::Zero(K);
  std::vector<int> words;
  words.reserve(doc.size());
  for (const auto& tok : doc) {
    if (int w = model.word_index(tok); w >= 0) words.push_back(w);
  }
  if (words.empty()) return zero;

  std::mt19937_64 rng(fnv1a(doc, model.seed()));
  const auto& phi = model.topic_word();
  const double alpha = model.alpha();
  std::vector<int> z(words.size());
  std::vector<double> counts(static_cast<std::size_t>(K), 0.0);
  std::vector<double> cumulative(static_cast<std::size_t>(K));
  for (std::size_t i = 0; i < words.size(); ++i) {
    z[i] = static_cast<int>(rng() % static_cast<std::uint64_t>(K));
    counts[static_cast<std::size_t>(z[i])] += 1.0;
  }

  // Counts are averaged over the second half of the sweeps.
  const int sweeps = std::max(1, model.inference_sweeps());
  const int burn_in = sweeps / 2;
  Eigen::VectorXd accumulated = Eigen::VectorXd::Zero(K);
  int kept = 0;
  for (int s = 0; s < sweeps; ++s) {
    for (std::size_t i = 0; i < words.size(); ++i) {
      counts[static_cast<std::size_t>(z[i])] -= 1.0;
      double running = 0.0;
      for (int k = 0; k < K; ++k) {
        running += (counts[static_cast<std::size_t>(k)] + alpha) * phi(k, words[i]);
        cumulative[static_cast<std::size_t>(k)] = running;
      }
      z[i] = sample_index(rng, cumulative.data(), K);
      counts[static_cast<std::size_t>(z[i])] += 1.0;
    }
    if (s >= burn_in) {
      for (int k = 0; k < K; ++k) accumulated(k) += counts[static_cast<std::size_t>(k)];
      ++kept;
    }
  }
  TopicVector theta = (accumulated / kept).array() + alpha;
  theta /= theta.sum();
  return theta.normalized();
}

}  // namespace gapfinder
