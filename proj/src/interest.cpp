#include "gapfinder/interest.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "gapfinder/tsv.hpp"

namespace gapfinder {

using namespace std::string_view_literals;

namespace {

std::string key2(std::string_view a, std::string_view b) {
  std::string k(a);
  k += '\t';
  k += b;
  return k;
}

constexpr std::array kInterestCols{"editor_id"sv, "method"sv, "w"sv, "values"sv};

}  // namespace

std::string_view to_string(InterestMethod m) {
  switch (m) {
    case InterestMethod::Average: return "average";
    case InterestMethod::WeightedAverage: return "weighted_average";
    case InterestMethod::WeightedMedoid: return "weighted_medoid";
  }
  return "";
}

std::optional<InterestMethod> parse_interest_method(std::string_view text) {
  if (text == "average") return InterestMethod::Average;
  if (text == "weighted_average") return InterestMethod::WeightedAverage;
  if (text == "weighted_medoid") return InterestMethod::WeightedMedoid;
  return std::nullopt;
}

SourceArticleIndex::SourceArticleIndex(const Corpus& corpus, LanguageCode source)
    : source_(std::move(source)) {
  for (const auto& s : corpus.sitelinks) {
    concept_of_.emplace(key2(s.lang, s.title), s.concept_id);
    if (s.lang == source_) source_title_.emplace(s.concept_id, s.title);
  }
  for (const auto& a : corpus.articles) {
    if (a.lang != source_) continue;
    if (a.is_redirect && a.redirect_target) {
      source_redirect_.emplace(a.title, *a.redirect_target);
    } else {
      source_article_.emplace(a.title, true);
    }
  }
}

std::optional<std::pair<std::string, ConceptId>> SourceArticleIndex::resolve(
    const LanguageCode& lang, const std::string& title) const {
  if (lang == source_) {
    std::string resolved = title;
    if (auto r = source_redirect_.find(title); r != source_redirect_.end()) resolved = r->second;
    if (!source_article_.contains(resolved)) return std::nullopt;
    auto c = concept_of_.find(key2(source_, resolved));
    return std::make_pair(resolved, c == concept_of_.end() ? ConceptId{} : c->second);
  }
  auto c = concept_of_.find(key2(lang, title));
  if (c == concept_of_.end()) return std::nullopt;
  auto s = source_title_.find(c->second);
  if (s == source_title_.end() || !source_article_.contains(s->second)) return std::nullopt;
  return std::make_pair(s->second, c->second);
}

EditHistory build_history(std::string editor_id, std::span<const EditEventRecord> events,
                          const SourceArticleIndex& index) {
  EditHistory h;
  h.editor_id = std::move(editor_id);
  std::unordered_map<std::string, std::size_t> position;
  for (const auto& e : events) {
    if (e.bytes_added <= 0) continue;
    auto resolved = index.resolve(e.lang, e.title);
    if (!resolved) continue;
    auto [it, inserted] = position.emplace(resolved->first, h.entries.size());
    if (inserted) {
      h.entries.push_back({resolved->second, resolved->first, 0, e.timestamp});
    }
    auto& entry = h.entries[it->second];
    entry.total_bytes += e.bytes_added;
    entry.last_timestamp = std::max(entry.last_timestamp, e.timestamp);
  }
  std::stable_sort(h.entries.begin(), h.entries.end(), [](const HistoryEntry& a, const HistoryEntry& b) {
    if (a.last_timestamp != b.last_timestamp) return a.last_timestamp > b.last_timestamp;
    return a.source_title < b.source_title;
  });
  return h;
}

std::vector<EditHistory> build_histories(const Corpus& corpus, const SourceArticleIndex& index) {
  std::vector<EditHistory> out;
  const auto& events = corpus.edit_events;  // sorted by (editor, timestamp) on load
  std::size_t i = 0;
  while (i < events.size()) {
    std::size_t j = i;
    while (j < events.size() && events[j].editor_id == events[i].editor_id) ++j;
    out.push_back(build_history(events[i].editor_id,
                                std::span<const EditEventRecord>(events.data() + i, j - i), index));
    i = j;
  }
  return out;
}

double byte_weight(std::int64_t bytes) { return std::log1p(static_cast<double>(bytes)); }

InterestVector interest_vector(const EditHistory& history, const TopicLookup& topics,
                               InterestMethod method, int w) {
  if (w < 1) throw Error(Errc::InvalidSpec, "history size must be positive");
  std::vector<const TopicVector*> vectors;
  std::vector<std::int64_t> bytes;
  for (const auto& e : history.entries) {
    if (static_cast<int>(vectors.size()) >= w) break;
    const TopicVector* v = topics(e.source_title);
    if (!v || v->squaredNorm() == 0.0) continue;
    vectors.push_back(v);
    bytes.push_back(e.total_bytes);
  }
  if (vectors.empty()) {
    throw Error(Errc::EmptyHistory, "editor " + history.editor_id + " has no usable history");
  }
  Eigen::MatrixXd members(static_cast<Eigen::Index>(vectors.size()), vectors.front()->size());
  Eigen::VectorXd weights(members.rows());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    members.row(static_cast<Eigen::Index>(i)) = vectors[i]->transpose();
    weights(static_cast<Eigen::Index>(i)) = byte_weight(bytes[i]);
  }
  return {history.editor_id, aggregate_interest(members, weights, method), method, w};
}

std::vector<ScoredConcept> score_concepts(const TopicVector& interest,
                                          std::span<const Candidate> candidates) {
  std::vector<ScoredConcept> out;
  out.reserve(candidates.size());
  for (const auto& c : candidates) out.push_back({c.concept_id, topic_distance(interest, c.vector)});
  if (interest.squaredNorm() == 0.0) throw Error(Errc::ZeroVector, "interest vector is zero");
  std::sort(out.begin(), out.end(), [](const ScoredConcept& a, const ScoredConcept& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    return a.concept_id < b.concept_id;
  });
  return out;
}

void write_interests(std::span<const InterestVector> interests, const std::filesystem::path& file) {
  tsv::Writer w(file, kInterestCols);
  for (const auto& iv : interests) {
    std::string values;
    for (Eigen::Index k = 0; k < iv.values.size(); ++k) {
      if (k) values += ' ';
      values += tsv::format_fixed(iv.values(k), 6);
    }
    w.row(iv.editor_id, to_string(iv.method), iv.history_size_w, values);
  }
}

std::vector<InterestVector> read_interests(const std::filesystem::path& file) {
  std::vector<InterestVector> out;
  tsv::read(file, kInterestCols, {}, [&](std::size_t line, auto f) {
    InterestVector iv;
    iv.editor_id = f[0];
    auto method = parse_interest_method(f[1]);
    if (!method) throw Error(Errc::MalformedRow, file.string() + ": unknown method");
    iv.method = *method;
    iv.history_size_w = static_cast<int>(tsv::parse_int(f[2], file, line, "w"));
    auto parts = tsv::split(f[3], ' ');
    iv.values.resize(static_cast<Eigen::Index>(parts.size()));
    for (std::size_t k = 0; k < parts.size(); ++k) {
      iv.values(static_cast<Eigen::Index>(k)) = tsv::parse_double(parts[k], file, line, "values");
    }
    out.push_back(std::move(iv));
  });
  return out;
}

}  // namespace gapfinder
