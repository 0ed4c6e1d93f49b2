#include "gapfinder/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <random>
#include <set>

#include "json.hpp"

#include "gapfinder/error.hpp"

namespace gapfinder {

namespace {

using Rng = std::mt19937_64;

double uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }

double normal(Rng& rng, double sd = 1.0) { return std::normal_distribution<double>(0.0, sd)(rng); }

std::size_t pick(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

Eigen::VectorXd dirichlet(Rng& rng, Eigen::Index dim, double concentration) {
  Eigen::VectorXd v(dim);
  std::gamma_distribution<double> gamma(concentration, 1.0);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = gamma(rng);
  double total = v.sum();
  if (total <= 0.0) {
    v.setZero();
    v(static_cast<Eigen::Index>(pick(rng, static_cast<std::size_t>(dim)))) = 1.0;
    return v;
  }
  return v / total;
}

std::string padded(std::size_t n, int width) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%0*zu", width, n);
  return buf;
}

void check_spec(const SyntheticSpec& s) {
  auto fail = [](const std::string& msg) { throw Error(Errc::InvalidSpec, msg); };
  if (s.n_concepts == 0) fail("n_concepts must be positive");
  if (s.languages.size() < 2) fail("need a source and at least one target language");
  std::set<LanguageCode> seen;
  for (const auto& l : s.languages) {
    if (l.empty() || !seen.insert(l).second) fail("language codes must be unique and non-empty");
  }
  auto in_unit = [](double p) { return p >= 0.0 && p <= 1.0; };
  for (const auto& [lang, p] : s.coverage) {
    if (!seen.contains(lang)) fail("coverage given for undeclared language " + lang);
    if (!in_unit(p)) fail("coverage must lie in [0,1]");
  }
  for (double p : {s.default_coverage, s.split_concept_rate, s.redirect_merge_rate,
                   s.source_redirect_rate, s.foreign_link_rate, s.editor_focus,
                   s.negative_edit_rate, s.cross_language_edit_rate}) {
    if (!in_unit(p)) fail("rates must lie in [0,1]");
  }
  if (s.split_concept_rate + s.redirect_merge_rate > 1.0) fail("merge rates exceed 1");
  if (s.n_topics == 0 || s.vocab_size == 0) fail("n_topics and vocab_size must be positive");
  if (s.doc_topic_concentration <= 0 || s.topic_word_concentration <= 0) {
    fail("Dirichlet concentrations must be positive");
  }
  if (s.n_countries == 0) fail("n_countries must be positive");
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  auto out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    out.push_back(std::move(row));
  }
  return out;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  Eigen::Index cols = rows ? static_cast<Eigen::Index>(j[0].size()) : 0;
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
  }
  return m;
}

}  // namespace

double SyntheticSpec::coverage_of(const LanguageCode& lang) const {
  if (auto it = coverage.find(lang); it != coverage.end()) return it->second;
  if (!languages.empty() && lang == languages.front()) return 1.0;
  return default_coverage;
}

bool GroundTruth::operator==(const GroundTruth& o) const {
  return source == o.source && missing == o.missing && concept_ids == o.concept_ids &&
         concept_topics == o.concept_topics && dominant_topic == o.dominant_topic &&
         topic_word == o.topic_word && vocabulary == o.vocabulary && popularity == o.popularity &&
         editor_focus == o.editor_focus;
}

std::string synthetic_concept_id(std::size_t concept_index) {
  return "Q" + padded(concept_index + 1, 7);
}

std::string synthetic_title(std::size_t concept_index, const LanguageCode& lang) {
  return "Art_" + padded(concept_index + 1, 6) + "_" + lang;
}

SyntheticCorpus generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  check_spec(spec);
  Rng rng(seed);

  const auto n = spec.n_concepts;
  const auto n_langs = spec.languages.size();
  const auto topics = static_cast<Eigen::Index>(spec.n_topics);
  const auto vocab = static_cast<Eigen::Index>(spec.vocab_size);
  const LanguageCode& source = spec.languages.front();

  SyntheticCorpus out;
  Corpus& corpus = out.corpus;
  GroundTruth& truth = out.truth;
  truth.source = source;
  corpus.languages = spec.languages;

  for (Eigen::Index v = 0; v < vocab; ++v) {
    truth.vocabulary.push_back("w" + padded(static_cast<std::size_t>(v), 5));
  }
  truth.topic_word.resize(topics, vocab);
  for (Eigen::Index k = 0; k < topics; ++k) {
    truth.topic_word.row(k) = dirichlet(rng, vocab, spec.topic_word_concentration).transpose();
  }
  truth.concept_topics.resize(static_cast<Eigen::Index>(n), topics);
  truth.popularity.resize(static_cast<Eigen::Index>(n));
  for (std::size_t c = 0; c < n; ++c) {
    const auto row = static_cast<Eigen::Index>(c);
    truth.concept_ids.push_back(synthetic_concept_id(c));
    truth.concept_topics.row(row) = dirichlet(rng, topics, spec.doc_topic_concentration);
    Eigen::Index best = 0;
    truth.concept_topics.row(row).maxCoeff(&best);
    truth.dominant_topic.push_back(static_cast<int>(best));
    truth.popularity(row) = normal(rng, spec.popularity_sd);
  }

  // Per-language topic preferences drive cross-language popularity shifts.
  std::vector<Eigen::VectorXd> language_bias(n_langs);
  for (auto& b : language_bias) {
    b.resize(topics);
    for (Eigen::Index k = 0; k < topics; ++k) b(k) = normal(rng);
  }

  // has[l][c]: concept c has a regular article in language l.
  std::vector<std::vector<bool>> has(n_langs, std::vector<bool>(n, false));
  for (std::size_t l = 0; l < n_langs; ++l) {
    const double p = spec.coverage_of(spec.languages[l]);
    for (std::size_t c = 0; c < n; ++c) has[l][c] = uniform(rng) < p;
  }

  // Regular articles.
  auto make_article = [&](std::size_t c, std::size_t l) {
    const double z = truth.popularity(static_cast<Eigen::Index>(c));
    ArticleRecord a;
    a.lang = spec.languages[l];
    a.title = synthetic_title(c, a.lang);
    a.byte_length = static_cast<std::int64_t>(std::exp(8.0 + 0.3 * z + normal(rng, 0.5)));
    a.created_months_ago = 1 + static_cast<std::int64_t>(pick(rng, 180));
    a.last_edited_months_ago = static_cast<std::int64_t>(
        pick(rng, static_cast<std::size_t>(std::min<std::int64_t>(a.created_months_ago, 12)) + 1));
    a.editor_count = 1 + static_cast<std::int64_t>(std::exp(2.0 + 0.5 * z + normal(rng, 0.3)));
    double q = z + normal(rng, 0.7);
    if (q > 2.0) {
      a.quality_class = QualityClass::Featured;
    } else if (q > 1.2) {
      a.quality_class = QualityClass::Good;
    } else if (q < -0.5) {
      a.quality_class = QualityClass::Stub;
    }
    double imp = z + normal(rng, 0.7);
    if (uniform(rng) < 0.7) {
      a.importance_class = imp > 1.5   ? ImportanceClass::Top
                           : imp > 0.5 ? ImportanceClass::High
                           : imp > -0.5 ? ImportanceClass::Mid
                                        : ImportanceClass::Low;
    }
    return a;
  };
  auto make_redirect = [](const LanguageCode& lang, std::string title, const std::string& to) {
    ArticleRecord a;
    a.lang = lang;
    a.title = std::move(title);
    a.byte_length = 40;
    a.is_redirect = true;
    a.redirect_target = to;
    a.created_months_ago = 1;
    a.last_edited_months_ago = 1;
    a.editor_count = 1;
    return a;
  };

  // sitelinked[l][c]: language-l article of c is reachable through c's own sitelink.
  std::vector<std::vector<bool>> sitelinked(n_langs, std::vector<bool>(n, false));
  std::size_t next_duplicate = n;

  for (std::size_t c = 0; c < n; ++c) {
    const ConceptId id = synthetic_concept_id(c);
    for (std::size_t l = 0; l < n_langs; ++l) {
      if (!has[l][c]) continue;
      const LanguageCode& lang = spec.languages[l];
      ArticleRecord art = make_article(c, l);
      const std::string title = art.title;
      corpus.articles.push_back(std::move(art));

      const double u = (l > 0 && has[0][c]) ? uniform(rng) : 1.0;
      if (u < spec.split_concept_rate) {
        // Target article under a duplicate concept; joined by an inter-language link.
        corpus.sitelinks.push_back({synthetic_concept_id(next_duplicate++), lang, title});
        const std::string src = synthetic_title(c, source);
        if (uniform(rng) < 0.5) {
          corpus.interlanguage_links.push_back({source, src, lang, title});
        } else {
          corpus.interlanguage_links.push_back({lang, title, source, src});
        }
      } else if (u < spec.split_concept_rate + spec.redirect_merge_rate) {
        // Target article under a duplicate concept; a target redirect points at
        // it and is reachable from the source side.
        corpus.sitelinks.push_back({synthetic_concept_id(next_duplicate++), lang, title});
        std::string redirect = title + "_alias";
        corpus.articles.push_back(make_redirect(lang, redirect, title));
        if (uniform(rng) < 0.5) {
          corpus.interlanguage_links.push_back({source, synthetic_title(c, source), lang, redirect});
        } else {
          corpus.sitelinks.push_back({id, lang, redirect});
        }
      } else {
        corpus.sitelinks.push_back({id, lang, title});
        sitelinked[l][c] = true;
      }
    }
    if (has[0][c] && uniform(rng) < spec.source_redirect_rate) {
      const std::string title = synthetic_title(c, source);
      corpus.articles.push_back(make_redirect(source, title + "_alias", title));
    }
  }

  // Links among non-source languages; excluded from every (S,T) graph.
  if (n_langs >= 3) {
    for (std::size_t c = 0; c < n; ++c) {
      if (uniform(rng) >= spec.foreign_link_rate) continue;
      std::size_t l1 = 1 + pick(rng, n_langs - 1);
      std::size_t l2 = 1 + pick(rng, n_langs - 1);
      std::size_t d = pick(rng, n);
      if (l1 == l2 || d == c || !has[l1][c] || !has[l2][d]) continue;
      corpus.interlanguage_links.push_back({spec.languages[l1], synthetic_title(c, spec.languages[l1]),
                                            spec.languages[l2], synthetic_title(d, spec.languages[l2])});
    }
  }

  for (std::size_t l = 1; l < n_langs; ++l) {
    auto& list = truth.missing[spec.languages[l]];
    for (std::size_t c = 0; c < n; ++c) {
      if (has[0][c] && !has[l][c]) list.push_back(synthetic_concept_id(c));
    }
  }

  // Page views; the first target language drives the geo signal.
  const double target_noise = spec.target_noise_sd;
  for (std::size_t c = 0; c < n; ++c) {
    const auto row = static_cast<Eigen::Index>(c);
    const double z = truth.popularity(row);
    Eigen::VectorXd theta = truth.concept_topics.row(row).transpose();
    for (std::size_t l = 0; l < n_langs; ++l) {
      if (!has[l][c]) continue;
      const double noise_sd = l == 0 ? spec.source_noise_sd : l == 1 ? target_noise
                                                                      : spec.other_noise_sd;
      const double bias = theta.dot(language_bias[l]);
      const double log_views =
          spec.base_log_views + z + spec.topic_effect * bias + normal(rng, noise_sd);
      const auto views = static_cast<std::int64_t>(std::floor(std::exp(log_views)));
      const LanguageCode& lang = spec.languages[l];
      const std::string title = synthetic_title(c, lang);
      corpus.page_views.push_back({lang, title, views, std::nullopt});
      if (l == 0) {
        Eigen::VectorXd share(static_cast<Eigen::Index>(spec.n_countries));
        for (Eigen::Index k = 0; k < share.size(); ++k) share(k) = normal(rng, 0.5);
        share(0) += spec.topic_effect * theta.dot(language_bias[1]);
        share = share.array().exp();
        share /= share.sum();
        for (Eigen::Index k = 0; k < share.size(); ++k) {
          corpus.page_views.push_back(
              {lang, title, static_cast<std::int64_t>(std::floor(views * share(k))),
               "C" + padded(static_cast<std::size_t>(k + 1), 2)});
        }
      }
    }
  }
  for (const auto& a : corpus.articles) {
    if (a.is_redirect) {
      corpus.page_views.push_back({a.lang, a.title, static_cast<std::int64_t>(pick(rng, 50)),
                                   std::nullopt});
    }
  }

  // Source-language page links with topical affinity.
  std::vector<std::vector<std::size_t>> by_topic(spec.n_topics);
  std::vector<std::size_t> source_concepts;
  for (std::size_t c = 0; c < n; ++c) {
    if (!has[0][c]) continue;
    source_concepts.push_back(c);
    by_topic[static_cast<std::size_t>(truth.dominant_topic[c])].push_back(c);
  }
  for (std::size_t c : source_concepts) {
    std::set<std::size_t> targets;
    const auto& same = by_topic[static_cast<std::size_t>(truth.dominant_topic[c])];
    for (std::size_t i = 0; i < spec.links_per_article; ++i) {
      std::size_t d = uniform(rng) < 0.5 ? same[pick(rng, same.size())]
                                         : source_concepts[pick(rng, source_concepts.size())];
      if (d != c) targets.insert(d);
    }
    for (std::size_t d : targets) {
      corpus.page_links.push_back({source, synthetic_title(c, source), synthetic_title(d, source)});
    }
  }

  // Source-language token documents.
  std::vector<std::discrete_distribution<Eigen::Index>> word_given_topic;
  for (Eigen::Index k = 0; k < topics; ++k) {
    std::vector<double> w(static_cast<std::size_t>(vocab));
    for (Eigen::Index v = 0; v < vocab; ++v) w[static_cast<std::size_t>(v)] = truth.topic_word(k, v);
    word_given_topic.emplace_back(w.begin(), w.end());
  }
  for (std::size_t c : source_concepts) {
    const auto row = static_cast<Eigen::Index>(c);
    std::vector<double> mix(static_cast<std::size_t>(topics));
    for (Eigen::Index k = 0; k < topics; ++k) mix[static_cast<std::size_t>(k)] = truth.concept_topics(row, k);
    std::discrete_distribution<Eigen::Index> topic_draw(mix.begin(), mix.end());
    TokenDoc doc{source, synthetic_title(c, source), {}};
    doc.tokens.reserve(spec.doc_length);
    for (std::size_t t = 0; t < spec.doc_length; ++t) {
      Eigen::Index k = topic_draw(rng);
      doc.tokens.push_back(truth.vocabulary[static_cast<std::size_t>(word_given_topic[static_cast<std::size_t>(k)](rng))]);
    }
    corpus.token_docs.push_back(std::move(doc));
  }

  // Editors with a planted topical focus.
  std::int64_t clock = 0;
  for (std::size_t e = 0; e < spec.n_editors && !source_concepts.empty(); ++e) {
    const std::string editor = "E" + padded(e + 1, 5);
    const int focus = static_cast<int>(pick(rng, spec.n_topics));
    truth.editor_focus[editor] = focus;
    std::vector<std::size_t> pool = by_topic[static_cast<std::size_t>(focus)];
    if (spec.editor_neighborhood > 0 && pool.size() > spec.editor_neighborhood) {
      const auto anchor = truth.concept_topics.row(static_cast<Eigen::Index>(pool[pick(rng, pool.size())]));
      auto dist = [&](std::size_t c) { return (truth.concept_topics.row(static_cast<Eigen::Index>(c)) - anchor).squaredNorm(); };
      std::stable_sort(pool.begin(), pool.end(), [&](std::size_t a, std::size_t b) { return dist(a) < dist(b); });
      pool.resize(spec.editor_neighborhood);
    }
    for (std::size_t i = 0; i < spec.edits_per_editor; ++i) {
      std::size_t c = (!pool.empty() && uniform(rng) < spec.editor_focus)
                          ? pool[pick(rng, pool.size())]
                          : source_concepts[pick(rng, source_concepts.size())];
      std::size_t l = 0;
      if (n_langs > 1 && uniform(rng) < spec.cross_language_edit_rate) {
        std::size_t other = 1 + pick(rng, n_langs - 1);
        if (sitelinked[other][c]) l = other;
      }
      std::int64_t bytes = uniform(rng) < spec.negative_edit_rate
                               ? -static_cast<std::int64_t>(1 + pick(rng, 500))
                               : 1 + static_cast<std::int64_t>(std::exp(5.0 + normal(rng, 1.5)));
      corpus.edit_events.push_back(
          {editor, spec.languages[l], synthetic_title(c, spec.languages[l]), bytes, ++clock});
    }
  }

  validate(corpus);
  return out;
}

void write_ground_truth(const GroundTruth& t, const std::filesystem::path& file) {
  nlohmann::json j;
  j["format_version"] = 1;
  j["source"] = t.source;
  j["missing"] = t.missing;
  j["concept_ids"] = t.concept_ids;
  j["concept_topics"] = matrix_to_json(t.concept_topics);
  j["dominant_topic"] = t.dominant_topic;
  j["topic_word"] = matrix_to_json(t.topic_word);
  j["vocabulary"] = t.vocabulary;
  j["popularity"] = std::vector<double>(t.popularity.data(), t.popularity.data() + t.popularity.size());
  j["editor_focus"] = t.editor_focus;
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::MissingFile, "cannot write " + file.string());
  out << j.dump() << '\n';
}

GroundTruth read_ground_truth(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, file.string());
  nlohmann::json j = nlohmann::json::parse(in);
  GroundTruth t;
  t.source = j.at("source").get<std::string>();
  t.missing = j.at("missing").get<std::map<LanguageCode, std::vector<ConceptId>>>();
  t.concept_ids = j.at("concept_ids").get<std::vector<ConceptId>>();
  t.concept_topics = matrix_from_json(j.at("concept_topics"));
  t.dominant_topic = j.at("dominant_topic").get<std::vector<int>>();
  t.topic_word = matrix_from_json(j.at("topic_word"));
  t.vocabulary = j.at("vocabulary").get<std::vector<std::string>>();
  auto pop = j.at("popularity").get<std::vector<double>>();
  t.popularity = Eigen::Map<Eigen::VectorXd>(pop.data(), static_cast<Eigen::Index>(pop.size()));
  t.editor_focus = j.at("editor_focus").get<std::map<std::string, int>>();
  return t;
}

}  // namespace gapfinder
