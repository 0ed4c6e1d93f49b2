#include <algorithm>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>

#include "gapfinder/error.hpp"
#include "gapfinder/hashing.hpp"
#include "gapfinder/ranking.hpp"
#include "gapfinder/tsv.hpp"

namespace gapfinder {

namespace {

constexpr std::array kFamilyNames{"page_views", "geo_views",  "source_length", "quality_importance",
                                  "edit_activity", "links", "topics"};

std::string key2(std::string_view a, std::string_view b) {
  std::string k(a);
  k += '\t';
  k += b;
  return k;
}

}  // namespace

std::string_view family_name(FeatureFamily f) { return kFamilyNames[static_cast<std::size_t>(f)]; }

std::optional<FeatureFamily> parse_family(std::string_view name) {
  for (std::size_t i = 0; i < kFamilyNames.size(); ++i) {
    if (kFamilyNames[i] == name) return static_cast<FeatureFamily>(i);
  }
  return std::nullopt;
}

std::vector<FeatureFamily> all_families() {
  std::vector<FeatureFamily> out;
  for (std::size_t i = 0; i < kFeatureFamilyCount; ++i) out.push_back(static_cast<FeatureFamily>(i));
  return out;
}

void FeatureSchema::finalize() {
  columns.clear();
  column_family.clear();
  auto add = [&](std::string name, FeatureFamily f) {
    columns.push_back(std::move(name));
    column_family.push_back(f);
  };
  add("wikidata_count", FeatureFamily::PageViews);
  for (const auto& l : view_languages) add("views:" + l, FeatureFamily::PageViews);
  for (const auto& l : view_languages) add("log_views:" + l, FeatureFamily::PageViews);
  for (const auto& l : view_languages) add("normrank:" + l, FeatureFamily::PageViews);
  for (const auto& c : countries) add("geo:" + c, FeatureFamily::GeoViews);
  add("geo:other", FeatureFamily::GeoViews);
  add("source_length", FeatureFamily::SourceLength);
  for (auto q : {"stub", "good", "featured"}) {
    add(std::string("quality:") + q, FeatureFamily::QualityImportance);
  }
  for (auto c : {"low", "mid", "high", "top"}) {
    add(std::string("importance:") + c, FeatureFamily::QualityImportance);
  }
  add("editor_count", FeatureFamily::EditActivity);
  add("months_since_first_edit", FeatureFamily::EditActivity);
  add("months_since_last_edit", FeatureFamily::EditActivity);
  add("inlinks_from_target_covered", FeatureFamily::Links);
  add("outlinks_to_target_covered", FeatureFamily::Links);
  add("total_indegree", FeatureFamily::Links);
  add("total_outdegree", FeatureFamily::Links);
  for (int k = 0; k < n_topics; ++k) add("topic:" + std::to_string(k), FeatureFamily::Topics);

  std::uint64_t h = fnv1a("source=" + source + ";target=" + target + ";");
  for (const auto& c : columns) h = fnv1a(c + ";", h);
  hash = hex64(h);
}

FeatureSchema FeatureSchema::from_columns(LanguageCode source, LanguageCode target,
                                          const std::vector<std::string>& cols) {
  FeatureSchema s;
  s.source = std::move(source);
  s.target = std::move(target);
  for (const auto& c : cols) {
    if (c.starts_with("views:")) s.view_languages.push_back(c.substr(6));
    if (c.starts_with("geo:") && c != "geo:other") s.countries.push_back(c.substr(4));
    if (c.starts_with("topic:")) ++s.n_topics;
  }
  s.finalize();
  if (s.columns != cols) {
    throw Error(Errc::StaleArtifact, "feature header does not match any known schema layout");
  }
  return s;
}

Eigen::VectorXd FeatureRow::dense() const {
  const auto L = views.size();
  const auto n = static_cast<Eigen::Index>(1 + 3 * L + geo_views.size() + 1 + 3 + 4 + 3 + 4 +
                                           static_cast<std::size_t>(topic_vector.size()));
  Eigen::VectorXd out(n);
  Eigen::Index i = 0;
  out(i++) = static_cast<double>(wikidata_count);
  for (double v : views) out(i++) = v;
  for (double v : log_views) out(i++) = v;
  for (double v : normrank) out(i++) = v;
  for (double v : geo_views) out(i++) = v;
  out(i++) = static_cast<double>(source_length);
  for (bool b : quality) out(i++) = b ? 1.0 : 0.0;
  for (bool b : importance) out(i++) = b ? 1.0 : 0.0;
  out(i++) = static_cast<double>(editor_count);
  out(i++) = static_cast<double>(months_since_first_edit);
  out(i++) = static_cast<double>(months_since_last_edit);
  out(i++) = static_cast<double>(inlinks_from_T_covered);
  out(i++) = static_cast<double>(outlinks_to_T_covered);
  out(i++) = static_cast<double>(total_indegree);
  out(i++) = static_cast<double>(total_outdegree);
  out.segment(i, topic_vector.size()) = topic_vector;
  return out;
}

std::vector<Eigen::Index> FeatureMatrix::columns_of(std::span<const FeatureFamily> families) const {
  std::vector<Eigen::Index> out;
  for (std::size_t c = 0; c < schema.column_family.size(); ++c) {
    if (std::find(families.begin(), families.end(), schema.column_family[c]) != families.end()) {
      out.push_back(static_cast<Eigen::Index>(c));
    }
  }
  return out;
}

Eigen::Index FeatureMatrix::source_normrank_column() const {
  const std::string name = "normrank:" + schema.source;
  auto it = std::find(schema.columns.begin(), schema.columns.end(), name);
  if (it == schema.columns.end()) {
    throw Error(Errc::SchemaMismatch, "schema lacks " + name);
  }
  return static_cast<Eigen::Index>(it - schema.columns.begin());
}

FeatureMatrix to_matrix(const FeatureSchema& schema, std::span<const FeatureRow> rows) {
  FeatureMatrix m;
  m.schema = schema;
  m.values.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(schema.columns.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    Eigen::VectorXd d = rows[r].dense();
    if (d.size() != m.values.cols()) {
      throw Error(Errc::SchemaMismatch, "row for " + rows[r].concept_id + " has " +
                                            std::to_string(d.size()) + " values");
    }
    m.values.row(static_cast<Eigen::Index>(r)) = d.transpose();
    m.concept_ids.push_back(rows[r].concept_id);
  }
  return m;
}

void write_features(const FeatureMatrix& m, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::MissingFile, "cannot write " + file.string());
  out << "#schema\t" << m.schema.hash << '\t' << m.schema.source << '\t' << m.schema.target
      << '\n';
  out << "concept_id";
  for (const auto& c : m.schema.columns) out << '\t' << c;
  out << '\n';
  for (Eigen::Index r = 0; r < m.values.rows(); ++r) {
    out << m.concept_ids[static_cast<std::size_t>(r)];
    for (Eigen::Index c = 0; c < m.values.cols(); ++c) out << '\t' << tsv::format_double(m.values(r, c));
    out << '\n';
  }
}

FeatureMatrix read_features(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, file.string());
  std::string line;
  if (!std::getline(in, line)) throw Error(Errc::MalformedRow, file.string() + ": empty");
  const auto fields = tsv::split(line);
  const std::vector<std::string> meta(fields.begin(), fields.end());
  if (meta.size() != 4 || meta[0] != "#schema") {
    throw Error(Errc::StaleArtifact, file.string() + ": missing schema line");
  }
  if (!std::getline(in, line)) throw Error(Errc::MalformedRow, file.string() + ": missing header");
  auto header = tsv::split(line);
  if (header.empty() || header[0] != "concept_id") {
    throw Error(Errc::MalformedRow, file.string() + ": bad header");
  }
  std::vector<std::string> cols(header.begin() + 1, header.end());
  FeatureMatrix m;
  m.schema = FeatureSchema::from_columns(meta[2], meta[3], cols);
  if (m.schema.hash != meta[1]) {
    throw Error(Errc::StaleArtifact, file.string() + ": schema hash mismatch");
  }
  std::vector<std::vector<double>> rows;
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    auto f = tsv::split(line);
    if (f.size() != cols.size() + 1) {
      throw Error(Errc::MalformedRow, file.string() + ":" + std::to_string(line_no));
    }
    m.concept_ids.emplace_back(f[0]);
    std::vector<double> r;
    for (std::size_t i = 1; i < f.size(); ++i) r.push_back(tsv::parse_double(f[i], file, line_no, cols[i - 1]));
    rows.push_back(std::move(r));
  }
  m.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < cols.size(); ++c) {
      m.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  return m;
}

// ---------------------------------------------------------------------------

struct FeatureExtractor::Impl {
  const Corpus* corpus = nullptr;
  const CoverageGraph* graph = nullptr;
  const TopicModel* topics = nullptr;
  std::vector<ComponentSummary> summaries;
  std::vector<std::vector<ConceptId>> component_concepts;  // sorted
  std::unordered_map<ConceptId, std::vector<std::pair<LanguageCode, std::string>>> sitelinks;
  std::unordered_map<std::string, const ArticleRecord*> articles;
  std::unordered_map<std::string, std::int64_t> views;  // key2(lang, title)
  std::vector<LanguageRanks> ranks;                     // aligned with view languages
  std::unordered_map<std::string, std::vector<double>> geo;  // source title -> columns
  std::unordered_map<std::string, std::array<std::int64_t, 4>> links;
  std::unordered_map<std::string, const TokenDoc*> docs;
  mutable std::mutex cache_mutex;
  mutable std::unordered_map<std::string, TopicVector> topic_cache;
};

FeatureExtractor::FeatureExtractor(const Corpus& corpus, const CoverageGraph& graph,
                                   const TopicModel& topics) {
  auto impl = std::make_shared<Impl>();
  impl->corpus = &corpus;
  impl->graph = &graph;
  impl->topics = &topics;
  const auto& source = graph.source();
  const auto& target = graph.target();

  impl->summaries = summarize_components(graph);
  impl->component_concepts.resize(impl->summaries.size());
  for (std::uint32_t i = 0; i < graph.nodes().size(); ++i) {
    const auto& node = graph.nodes()[i];
    if (node.kind == NodeKind::Concept) {
      impl->component_concepts[graph.component_of(i)].push_back(node.concept_id);
    }
  }
  for (auto& list : impl->component_concepts) std::sort(list.begin(), list.end());

  for (const auto& s : corpus.sitelinks) impl->sitelinks[s.concept_id].emplace_back(s.lang, s.title);
  for (const auto& a : corpus.articles) impl->articles.emplace(key2(a.lang, a.title), &a);
  for (const auto& v : corpus.page_views) {
    if (!v.country) impl->views[key2(v.lang, v.title)] += v.views;
  }

  // Page-view languages: the source first, then the largest other languages.
  std::map<LanguageCode, std::size_t> article_count;
  for (const auto& a : corpus.articles) {
    if (!a.is_redirect) ++article_count[a.lang];
  }
  std::vector<std::pair<std::size_t, LanguageCode>> by_size;
  for (const auto& l : corpus.languages) {
    if (l == target || l == source) continue;
    by_size.emplace_back(article_count[l], l);
  }
  std::sort(by_size.begin(), by_size.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  schema_.source = source;
  schema_.target = target;
  schema_.view_languages.push_back(source);
  for (const auto& [count, l] : by_size) {
    if (schema_.view_languages.size() >= FeatureSchema::kMaxViewLanguages) break;
    schema_.view_languages.push_back(l);
  }
  for (const auto& l : schema_.view_languages) {
    if (article_count[l] == 0) {
      LanguageRanks empty;
      empty.lang = l;
      impl->ranks.push_back(std::move(empty));
    } else {
      impl->ranks.push_back(compute_rank_targets(corpus, l));
    }
  }

  // Countries ranked by total source views.
  std::map<std::string, std::int64_t> country_total;
  for (const auto& v : corpus.page_views) {
    if (v.lang == source && v.country) country_total[*v.country] += v.views;
  }
  std::vector<std::pair<std::int64_t, std::string>> countries;
  for (const auto& [c, total] : country_total) countries.emplace_back(total, c);
  std::sort(countries.begin(), countries.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  std::unordered_map<std::string, std::size_t> country_column;
  for (const auto& [total, c] : countries) {
    if (schema_.countries.size() >= FeatureSchema::kMaxCountries) break;
    country_column.emplace(c, schema_.countries.size());
    schema_.countries.push_back(c);
  }
  const std::size_t geo_width = schema_.countries.size() + 1;
  for (const auto& v : corpus.page_views) {
    if (v.lang != source || !v.country) continue;
    auto& row = impl->geo[v.title];
    row.resize(geo_width, 0.0);
    auto it = country_column.find(*v.country);
    row[it == country_column.end() ? geo_width - 1 : it->second] += static_cast<double>(v.views);
  }

  // Link counts: [in from covered, out to covered, in total, out total].
  auto coverage = source_coverage(graph);
  auto covered = [&](const std::string& title) {
    auto it = coverage.find(title);
    return it != coverage.end() && it->second;
  };
  for (const auto& l : corpus.page_links) {
    if (l.lang != source || l.from_title == l.to_title) continue;
    auto& out = impl->links[l.from_title];
    auto& in = impl->links[l.to_title];
    ++out[3];
    ++in[2];
    if (covered(l.to_title)) ++out[1];
    if (covered(l.from_title)) ++in[0];
  }

  for (const auto& d : corpus.token_docs) {
    if (d.lang == source) impl->docs.emplace(d.title, &d);
  }

  schema_.n_topics = topics.n_topics();
  schema_.finalize();
  impl_ = std::move(impl);
}

const TopicVector& FeatureExtractor::source_topic_vector(const std::string& title) const {
  std::lock_guard lock(impl_->cache_mutex);
  auto it = impl_->topic_cache.find(title);
  if (it != impl_->topic_cache.end()) return it->second;
  auto doc = impl_->docs.find(title);
  TopicVector v = doc == impl_->docs.end() ? TopicVector::Zero(impl_->topics->n_topics())
                                           : infer_topic_vector(*impl_->topics, doc->second->tokens);
  return impl_->topic_cache.emplace(title, std::move(v)).first->second;
}

FeatureRow FeatureExtractor::extract(const ConceptId& concept_id) const {
  const auto& impl = *impl_;
  const auto& graph = *impl.graph;
  auto node = graph.find_concept(concept_id);
  if (!node) throw Error(Errc::UnknownConcept, concept_id + " is not in the coverage graph");
  const auto component = graph.component_of(*node);
  const auto& summary = impl.summaries[component];
  if (!summary.source_title) {
    throw Error(Errc::UnknownConcept, concept_id + " has no source-language article");
  }
  const auto& source = graph.source();
  const auto& target = graph.target();
  const std::string& title = *summary.source_title;
  const auto& concepts = impl.component_concepts[component];

  FeatureRow row;
  row.concept_id = concept_id;

  std::set<LanguageCode> languages;
  for (const auto& c : concepts) {
    if (auto it = impl.sitelinks.find(c); it != impl.sitelinks.end()) {
      for (const auto& [lang, t] : it->second) {
        if (lang != target) languages.insert(lang);
      }
    }
  }
  languages.insert(source);
  row.wikidata_count = static_cast<std::int64_t>(languages.size());

  const auto L = schema_.view_languages.size();
  row.views.assign(L, 0.0);
  row.log_views.assign(L, 0.0);
  row.normrank.assign(L, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    const auto& lang = schema_.view_languages[i];
    std::optional<std::string> article;
    if (lang == source) {
      article = title;
    } else {
      for (const auto& c : concepts) {
        auto it = impl.sitelinks.find(c);
        if (it == impl.sitelinks.end()) continue;
        for (const auto& [l, t] : it->second) {
          if (l == lang) {
            article = t;
            break;
          }
        }
        if (article) break;
      }
    }
    if (!article) continue;
    auto v = impl.views.find(key2(lang, *article));
    const double views = v == impl.views.end() ? 0.0 : static_cast<double>(v->second);
    row.views[i] = views;
    row.log_views[i] = std::log1p(views);
    row.normrank[i] = impl.ranks[i].y_of(*article);
  }

  if (auto g = impl.geo.find(title); g != impl.geo.end()) {
    row.geo_views = g->second;
  } else {
    row.geo_views.assign(schema_.countries.size() + 1, 0.0);
  }

  if (auto a = impl.articles.find(key2(source, title)); a != impl.articles.end()) {
    const ArticleRecord& art = *a->second;
    row.source_length = art.byte_length;
    if (art.quality_class) row.quality[static_cast<std::size_t>(*art.quality_class)] = true;
    if (art.importance_class) row.importance[static_cast<std::size_t>(*art.importance_class)] = true;
    row.editor_count = art.editor_count;
    row.months_since_first_edit = art.created_months_ago;
    row.months_since_last_edit = art.last_edited_months_ago;
  }

  if (auto l = impl.links.find(title); l != impl.links.end()) {
    row.inlinks_from_T_covered = l->second[0];
    row.outlinks_to_T_covered = l->second[1];
    row.total_indegree = l->second[2];
    row.total_outdegree = l->second[3];
  }

  row.topic_vector = source_topic_vector(title);
  return row;
}

std::vector<FeatureRow> FeatureExtractor::extract(std::span<const ConceptId> concepts) const {
  std::vector<FeatureRow> out;
  out.reserve(concepts.size());
  for (const auto& c : concepts) out.push_back(extract(c));
  return out;
}

std::vector<FeatureRow> extract_features(const Corpus& corpus, const CoverageGraph& graph,
                                         const TopicModel& topics,
                                         std::span<const ConceptId> concepts) {
  return FeatureExtractor(corpus, graph, topics).extract(concepts);
}

}  // namespace gapfinder
