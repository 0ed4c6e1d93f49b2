#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>

#include "gapfinder/concept_graph.hpp"
#include "gapfinder/error.hpp"
#include "gapfinder/pipeline.hpp"
#include "gapfinder/ranking.hpp"
#include "gapfinder/service.hpp"

// after Eigen: <resolv.h> defines _res
#include <httplib.h>

namespace gapfinder {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string fold(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (unsigned char c : s) out.push_back(c == '_' ? ' ' : static_cast<char>(std::tolower(c)));
  return out;
}

std::size_t edit_distance(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

bool qualifies(const fs::path& dir) {
  return fs::exists(dir / artifact::kMissing) && fs::exists(dir / artifact::kPredictions) &&
         fs::exists(dir / artifact::kArticleTopics) && fs::exists(stamp_path(dir, "find-missing"));
}

PairArtifacts load_pair(const fs::path& dir, std::size_t top_K) {
  std::map<std::string, Stamp> producer;
  for (auto& s : read_stamps(dir)) {
    for (const auto& [path, digest] : s.outputs) producer[path] = s;
  }
  const Stamp& missing_stamp = producer.at(artifact::kMissing);
  PairArtifacts p;
  p.source = missing_stamp.scope.at("source").get<std::string>();
  p.target = missing_stamp.scope.at("target").get<std::string>();

  for (const char* name : {artifact::kMissing, artifact::kPredictions, artifact::kArticleTopics}) {
    const auto digest = file_digest(dir / name);
    if (auto it = producer.find(name); it != producer.end() && it->second.outputs.at(name) != digest) {
      throw Error(Errc::StaleArtifact, (dir / name).string() + " differs from its stamp");
    }
    p.versions[name] = digest;
  }
  const auto missing = read_missing(dir / artifact::kMissing, p.source, p.target);
  const auto predictions = read_predictions(dir / artifact::kPredictions);
  p.topics = read_article_topics(dir / artifact::kArticleTopics);
  for (auto& item : candidate_pool(missing, predictions, top_K)) {
    const TopicVector* v = p.topics.find(item.source_title);
    if (!v) continue;
    p.candidates.push_back({item.concept_id, *v});
    p.pool.push_back(std::move(item));
  }
  return p;
}

json error_body(const std::string& code, const std::string& message) {
  return {{"api_version", RecommendationService::kApiVersion}, {"error", code}, {"message", message}};
}

}  // namespace

const PairArtifacts* Catalog::find(const LanguageCode& source, const LanguageCode& target) const {
  for (const auto& p : pairs) {
    if (p.source == source && p.target == target) return &p;
  }
  return nullptr;
}

Catalog load_catalog(const fs::path& root, std::size_t top_K) {
  std::vector<fs::path> dirs;
  if (qualifies(root)) dirs.push_back(root);
  if (fs::is_directory(root)) {
    std::vector<fs::path> subs;
    for (const auto& e : fs::directory_iterator(root)) {
      if (e.is_directory() && qualifies(e.path())) subs.push_back(e.path());
    }
    std::sort(subs.begin(), subs.end());
    dirs.insert(dirs.end(), subs.begin(), subs.end());
  }
  if (dirs.empty()) {
    throw Error(Errc::MissingFile, root.string() + " holds no pipeline artifacts (missing.tsv, predictions.tsv, "
                                                   "article_topics.tsv and stamps/find-missing.json)");
  }
  Catalog c;
  for (const auto& d : dirs) {
    auto p = load_pair(d, top_K);
    if (c.find(p.source, p.target)) {
      throw Error(Errc::DuplicateKey, "pair " + p.source + "->" + p.target + " found twice under " + root.string());
    }
    c.pairs.push_back(std::move(p));
  }
  return c;
}

std::vector<std::string> nearest_titles(const std::vector<std::string>& titles, const std::string& query,
                                        std::size_t n) {
  const auto q = fold(query);
  std::vector<std::pair<std::size_t, const std::string*>> scored;
  scored.reserve(titles.size());
  for (const auto& t : titles) scored.emplace_back(edit_distance(fold(t), q), &t);
  const auto k = std::min(n, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(k), scored.end(),
                    [](const auto& a, const auto& b) { return a.first != b.first ? a.first < b.first : *a.second < *b.second; });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(*scored[i].second);
  return out;
}

void RecommendationService::install(std::shared_ptr<const Catalog> catalog) {
  std::atomic_store(&catalog_, std::move(catalog));
}

std::shared_ptr<const Catalog> RecommendationService::catalog() const { return std::atomic_load(&catalog_); }

bool RecommendationService::loaded() const { return catalog() != nullptr; }

HttpReply RecommendationService::health() const {
  const auto c = catalog();
  if (!c) return {503, error_body("not-loaded", "artifacts are still loading")};
  json pairs = json::array();
  for (const auto& p : c->pairs) {
    pairs.push_back({{"source", p.source}, {"target", p.target}, {"candidates", p.pool.size()}, {"versions", p.versions}});
  }
  return {200, {{"api_version", kApiVersion}, {"status", "ok"}, {"pairs", pairs}}};
}

HttpReply RecommendationService::recommendations(const std::string& source, const std::string& target,
                                                 const std::string& seed, const std::string& count) const {
  const auto c = catalog();
  if (!c) return {503, error_body("not-loaded", "artifacts are still loading")};
  if (source.empty() || target.empty() || seed.empty()) {
    return {400, error_body("bad-request", "source, target and seed are required")};
  }
  const PairArtifacts* pair = c->find(source, target);
  if (!pair) return {400, error_body("bad-language-pair", "no artifacts for " + source + "->" + target)};

  int limit = 10;
  if (!count.empty()) {
    auto [ptr, ec] = std::from_chars(count.data(), count.data() + count.size(), limit);
    if (ec != std::errc{} || ptr != count.data() + count.size() || limit < 0 || limit > kMaxCount) {
      return {400, error_body("bad-count", "count must be an integer in [0, " + std::to_string(kMaxCount) + "]")};
    }
  }

  const TopicVector* seed_vector = pair->topics.find(seed);
  std::string seed_title = seed;
  if (!seed_vector) {
    const auto folded = fold(seed);
    for (const auto& t : pair->topics.titles()) {
      if (fold(t) == folded) {
        seed_title = t;
        seed_vector = pair->topics.find(t);
        break;
      }
    }
  }
  if (!seed_vector) {
    json body = error_body("seed-not-found", "no " + source + " article titled '" + seed + "'");
    body["suggestions"] = nearest_titles(pair->topics.titles(), seed, kSuggestions);
    return {404, body};
  }

  std::unordered_map<ConceptId, const PoolItem*> by_id;
  for (const auto& item : pair->pool) by_id.emplace(item.concept_id, &item);
  json items = json::array();
  if (limit > 0 && !pair->candidates.empty()) {
    for (const auto& s : score_concepts(*seed_vector, pair->candidates)) {
      if (static_cast<int>(items.size()) == limit) break;
      const PoolItem& item = *by_id.at(s.concept_id);
      items.push_back({{"source_title", item.source_title},
                       {"concept_id", item.concept_id},
                       {"y_pred", item.y_pred},
                       {"interest_score", 1.0 - 0.5 * s.distance * s.distance}});
    }
  }
  return {200,
          {{"api_version", kApiVersion},
           {"source", source},
           {"target", target},
           {"seed_title", seed_title},
           {"items", items},
           {"model_versions", pair->versions}}};
}

void RecommendationService::mount(httplib::Server& server) const {
  auto send = [](httplib::Response& res, const HttpReply& reply) {
    res.status = reply.status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(reply.body.dump(), "application/json");
  };
  server.Get("/api/health", [this, send](const httplib::Request&, httplib::Response& res) { send(res, health()); });
  server.Get("/api/recommendations", [this, send](const httplib::Request& req, httplib::Response& res) {
    auto param = [&](const char* name) { return req.has_param(name) ? req.get_param_value(name) : std::string(); };
    send(res, recommendations(param("source"), param("target"), param("seed"), param("count")));
  });
  server.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
  });
}

}  // namespace gapfinder
