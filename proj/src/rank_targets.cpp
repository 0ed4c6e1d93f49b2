#include <algorithm>

#include "gapfinder/error.hpp"
#include "gapfinder/ranking.hpp"

namespace gapfinder {

double LanguageRanks::y_of(const std::string& title) const {
  auto it = by_title.find(title);
  return it == by_title.end() ? 0.0 : it->second.y;
}

LanguageRanks compute_rank_targets(const Corpus& corpus, const LanguageCode& lang) {
  struct Entry {
    std::string title;
    std::int64_t views = 0;
  };
  std::unordered_map<std::string, std::size_t> position;
  std::vector<Entry> entries;
  for (const auto& a : corpus.articles) {
    if (a.lang != lang || a.is_redirect) continue;
    position.emplace(a.title, entries.size());
    entries.push_back({a.title, 0});
  }
  if (entries.empty()) {
    throw Error(Errc::EmptyLanguage, "no non-redirect articles in '" + lang + "'");
  }
  for (const auto& v : corpus.page_views) {
    if (v.lang != lang || v.country) continue;
    if (auto it = position.find(v.title); it != position.end()) entries[it->second].views += v.views;
  }

  // Increasing views; title order only fixes the output sequence.
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
    if (a.views != b.views) return a.views < b.views;
    return a.title < b.title;
  });

  LanguageRanks out;
  out.lang = lang;
  out.size = entries.size();
  const double size = static_cast<double>(entries.size());
  for (std::size_t i = 0; i < entries.size();) {
    std::size_t j = i;
    while (j < entries.size() && entries[j].views == entries[i].views) ++j;
    // Positions i..j-1 hold ranks i+1..j.
    const double rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t k = i; k < j; ++k) {
      RankTarget t;
      t.title = entries[k].title;
      t.rank = rank;
      t.size = entries.size();
      t.y = rank / size;
      out.by_title.emplace(t.title, std::move(t));
    }
    i = j;
  }
  for (const auto& s : corpus.sitelinks) {
    if (s.lang != lang) continue;
    auto it = out.by_title.find(s.title);
    if (it == out.by_title.end()) continue;
    it->second.concept_id = s.concept_id;
    out.by_concept.emplace(s.concept_id, it->second);
  }
  return out;
}

std::vector<TrainingPair> training_pairs(const CoverageGraph& graph, const LanguageRanks& target) {
  std::vector<TrainingPair> out;
  for (const auto& s : summarize_components(graph)) {
    if (!s.representative || !s.source_title || !s.target_title) continue;
    out.push_back({*s.representative, *s.source_title, *s.target_title, target.y_of(*s.target_title)});
  }
  std::sort(out.begin(), out.end(),
            [](const TrainingPair& a, const TrainingPair& b) { return a.concept_id < b.concept_id; });
  return out;
}

}  // namespace gapfinder
