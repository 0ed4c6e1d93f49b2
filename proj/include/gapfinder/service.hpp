#pragma once

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "gapfinder/evaluation.hpp"
#include "gapfinder/matching.hpp"

namespace httplib {
class Server;
}

namespace gapfinder {

// Read-only artifacts for one language pair.
struct PairArtifacts {
  LanguageCode source;
  LanguageCode target;
  std::vector<PoolItem> pool;           // top_K by y_pred, only items with topic vectors
  std::vector<Candidate> candidates;    // aligned with pool
  ArticleTopics topics;
  nlohmann::json versions;              // artifact name -> digest
};

struct Catalog {
  std::vector<PairArtifacts> pairs;
  const PairArtifacts* find(const LanguageCode& source, const LanguageCode& target) const;
};

// Loads `root` and each of its subdirectories that hold missing.tsv,
// predictions.tsv, article_topics.tsv and the find-missing stamp naming the
// pair. Throws MissingFile when none qualifies.
Catalog load_catalog(const std::filesystem::path& root, std::size_t top_K = 100000);

struct HttpReply {
  int status = 200;
  nlohmann::json body;
};

class RecommendationService {
 public:
  static constexpr int kApiVersion = 1;
  static constexpr int kMaxCount = 1000;
  static constexpr std::size_t kSuggestions = 5;

  // Until a catalog is installed every endpoint answers 503.
  void install(std::shared_ptr<const Catalog> catalog);
  bool loaded() const;

  HttpReply health() const;
  // Parameters as received; `count` empty means 10.
  HttpReply recommendations(const std::string& source, const std::string& target, const std::string& seed,
                            const std::string& count) const;

  void mount(httplib::Server& server) const;

 private:
  std::shared_ptr<const Catalog> catalog() const;
  std::shared_ptr<const Catalog> catalog_;
};

// Titles closest to `query` by edit distance after case folding, ties by title.
std::vector<std::string> nearest_titles(const std::vector<std::string>& titles, const std::string& query,
                                        std::size_t n);

}  // namespace gapfinder
