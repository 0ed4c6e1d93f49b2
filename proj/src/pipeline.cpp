#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <limits>
#include <sstream>

#include "gapfinder/concept_graph.hpp"
#include "gapfinder/error.hpp"
#include "gapfinder/hashing.hpp"
#include "gapfinder/matching.hpp"
#include "gapfinder/pipeline.hpp"
#include "gapfinder/ranking.hpp"
#include "gapfinder/synthetic.hpp"
#include "gapfinder/topics.hpp"
#include "gapfinder/tsv.hpp"

namespace gapfinder {

namespace fs = std::filesystem;
using nlohmann::json;
using namespace std::string_view_literals;

namespace {

constexpr std::array kCorpusFiles{"languages.tsv", "articles.tsv", "sitelinks.tsv", "langlinks.tsv",
                                  "pageviews.tsv", "pagelinks.tsv", "edits.tsv",     "tokens.tsv"};
constexpr std::array kComponentCols{"component"sv, "representative"sv, "source_title"sv, "target_title"sv,
                                    "size"sv};
constexpr std::array kTopicCols{"title"sv, "values"sv};
constexpr std::array kTargetCols{"concept_id"sv, "y"sv};
constexpr std::array kSplitCols{"concept_id"sv, "split"sv};

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream out;
  out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return out.str();
}

json metrics_json(const MetricReport& m) {
  return {{"rmse", m.rmse}, {"spearman", m.spearman ? json(*m.spearman) : json(nullptr)}, {"n", m.n}};
}

// Bookkeeping for one stage run: validates inputs against the stamps that
// produced them and stamps the outputs.
class StageRun {
 public:
  StageRun(std::string stage, const RunConfig& config, fs::path workdir, json scope)
      : config_(config), workdir_(std::move(workdir)), start_(std::chrono::steady_clock::now()) {
    stamp_.stage = std::move(stage);
    stamp_.config = config_json(config);
    stamp_.seed = nullptr;
    stamp_.summary = json::object();
    scope_ = std::move(scope);
    for (auto& s : read_stamps(workdir_)) {
      for (const auto& [path, digest] : s.outputs) producers_[path] = s;
    }
  }

  Stamp& stamp() { return stamp_; }

  fs::path input(const std::string& rel) {
    const fs::path p = workdir_ / rel;
    if (!fs::exists(p)) throw Error(Errc::MissingFile, p.string() + " (run the producing stage first)");
    const auto digest = file_digest(p);
    if (auto it = producers_.find(rel); it != producers_.end()) {
      const Stamp& producer = it->second;
      if (producer.outputs.at(rel) != digest) {
        throw Error(Errc::StaleArtifact, rel + " changed after " + producer.stage + " stamped it");
      }
      for (const auto& [upstream, recorded] : producer.inputs) {
        const fs::path up = workdir_ / upstream;
        if (!fs::exists(up) || file_digest(up) != recorded) {
          throw Error(Errc::StaleArtifact,
                      rel + " was built from an older " + upstream + "; re-run " + producer.stage);
        }
      }
      for (const auto& key : {"source", "target"}) {
        if (scope_.contains(key) && producer.scope.contains(key) && producer.scope[key] != scope_[key]) {
          throw Error(Errc::StaleArtifact, rel + " was built for " + key + "=" +
                                               producer.scope[key].get<std::string>());
        }
      }
    }
    stamp_.inputs[rel] = digest;
    return p;
  }

  bool has(const std::string& rel) const { return fs::exists(workdir_ / rel); }

  fs::path output(const std::string& rel) {
    const fs::path p = workdir_ / rel;
    fs::create_directories(p.parent_path());
    outputs_.push_back(rel);
    return p;
  }

  Stamp finish() {
    for (const auto& rel : outputs_) stamp_.outputs[rel] = file_digest(workdir_ / rel);
    stamp_.scope = scope_;
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    stamp_.timing = {{"finished_at", utc_now()}, {"duration_seconds", seconds}};
    const auto file = stamp_path(workdir_, stamp_.stage);
    fs::create_directories(file.parent_path());
    std::ofstream out(file, std::ios::binary | std::ios::trunc);
    out << stamp_.to_json().dump(2) << '\n';
    return stamp_;
  }

  std::string corpus_file(const char* name) const { return (fs::path(config_.corpus_root) / name).generic_string(); }

  fs::path corpus_inputs() {
    for (const char* f : kCorpusFiles) {
      if (has(corpus_file(f))) input(corpus_file(f));
    }
    return workdir_ / config_.corpus_root;
  }

 private:
  const RunConfig& config_;
  fs::path workdir_;
  std::chrono::steady_clock::time_point start_;
  Stamp stamp_;
  json scope_;
  std::map<std::string, Stamp> producers_;
  std::vector<std::string> outputs_;
};

json pair_scope(const RunConfig& c) { return {{"source", c.source}, {"target", c.target}}; }

std::vector<TokenBag> source_documents(const Corpus& corpus, const LanguageCode& source,
                                       std::vector<std::string>* titles) {
  std::unordered_map<std::string, const ArticleRecord*> articles;
  for (const auto& a : corpus.articles) {
    if (a.lang == source && !a.is_redirect) articles.emplace(a.title, &a);
  }
  std::vector<TokenBag> docs;
  for (const auto& d : corpus.token_docs) {
    if (d.lang != source || !articles.contains(d.title)) continue;
    docs.push_back(d.tokens);
    if (titles) titles->push_back(d.title);
  }
  return docs;
}

void write_targets(std::span<const ConceptId> ids, const Eigen::VectorXd& y, const fs::path& file) {
  tsv::Writer w(file, kTargetCols);
  for (std::size_t i = 0; i < ids.size(); ++i) w.row(ids[i], tsv::format_double(y(static_cast<Eigen::Index>(i))));
}

std::map<ConceptId, double> read_targets(const fs::path& file) {
  std::map<ConceptId, double> out;
  tsv::read(file, kTargetCols, {}, [&](std::size_t line, auto f) {
    out[std::string(f[0])] = tsv::parse_double(f[1], file, line, "y");
  });
  return out;
}

Eigen::VectorXd aligned_targets(const FeatureMatrix& m, const std::map<ConceptId, double>& targets,
                                const fs::path& file) {
  Eigen::VectorXd y(m.rows());
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    auto it = targets.find(m.concept_ids[static_cast<std::size_t>(r)]);
    if (it == targets.end()) {
      throw Error(Errc::StaleArtifact, file.string() + " lacks a target for " + m.concept_ids[static_cast<std::size_t>(r)]);
    }
    y(r) = it->second;
  }
  return y;
}

FeatureMatrix select_rows(const FeatureMatrix& m, std::span<const Eigen::Index> rows) {
  FeatureMatrix out;
  out.schema = m.schema;
  out.values = m.values(std::vector<Eigen::Index>(rows.begin(), rows.end()), Eigen::all);
  for (auto r : rows) out.concept_ids.push_back(m.concept_ids[static_cast<std::size_t>(r)]);
  return out;
}

std::map<ConceptId, std::string> read_split(const fs::path& file) {
  std::map<ConceptId, std::string> out;
  tsv::read(file, kSplitCols, {}, [&](std::size_t, auto f) { out[std::string(f[0])] = std::string(f[1]); });
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------

std::string file_digest(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, file.string());
  std::uint64_t h = fnv1a({});
  char buf[1 << 16];
  while (in) {
    in.read(buf, sizeof buf);
    h = fnv1a(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  }
  return hex64(h);
}

json Stamp::to_json() const {
  return {{"stage", stage}, {"inputs", inputs}, {"outputs", outputs}, {"config", config},
          {"scope", scope}, {"seed", seed},     {"summary", summary}, {"timing", timing}};
}

Stamp Stamp::from_json(const json& j) {
  Stamp s;
  s.stage = j.at("stage").get<std::string>();
  s.inputs = j.at("inputs").get<std::map<std::string, std::string>>();
  s.outputs = j.at("outputs").get<std::map<std::string, std::string>>();
  s.config = j.at("config");
  s.scope = j.value("scope", json::object());
  s.seed = j.at("seed");
  s.summary = j.value("summary", json::object());
  s.timing = j.value("timing", json::object());
  return s;
}

fs::path stamp_path(const fs::path& workdir, const std::string& stage) {
  return workdir / artifact::kStampDir / (stage + ".json");
}

std::vector<Stamp> read_stamps(const fs::path& workdir) {
  std::vector<Stamp> out;
  const auto dir = workdir / artifact::kStampDir;
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() == ".json") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    std::ifstream in(f);
    try {
      out.push_back(Stamp::from_json(json::parse(in)));
    } catch (const json::exception& e) {
      throw Error(Errc::StaleArtifact, f.string() + ": unreadable stamp (" + e.what() + ")");
    }
  }
  return out;
}

void write_article_topics(const ArticleTopics& topics, const fs::path& file) {
  tsv::Writer w(file, kTopicCols);
  for (Eigen::Index r = 0; r < topics.size(); ++r) {
    std::string values;
    for (Eigen::Index k = 0; k < topics.vectors().cols(); ++k) {
      if (k) values += ' ';
      values += tsv::format_double(topics.vectors()(r, k));
    }
    w.row(topics.titles()[static_cast<std::size_t>(r)], values);
  }
}

ArticleTopics read_article_topics(const fs::path& file) {
  std::vector<std::string> titles;
  std::vector<std::vector<double>> rows;
  tsv::read(file, kTopicCols, {}, [&](std::size_t line, auto f) {
    titles.emplace_back(f[0]);
    auto& row = rows.emplace_back();
    for (auto v : tsv::split(f[1], ' ')) row.push_back(tsv::parse_double(v, file, line, "values"));
    if (row.size() != rows.front().size()) {
      throw Error(Errc::MalformedRow, file.string() + ":" + std::to_string(line) + ": topic dimension differs");
    }
  });
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    rows.empty() ? 0 : static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t k = 0; k < rows[r].size(); ++k) m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = rows[r][k];
  }
  return ArticleTopics(std::move(titles), std::move(m));
}

std::vector<ComponentSummary> read_components(const fs::path& file) {
  std::vector<ComponentSummary> out;
  auto opt = [](std::string_view v) { return v.empty() ? std::nullopt : std::optional<std::string>(v); };
  tsv::read(file, kComponentCols, {}, [&](std::size_t line, auto f) {
    ComponentSummary s;
    s.component = static_cast<std::uint32_t>(tsv::parse_int(f[0], file, line, "component"));
    s.representative = opt(f[1]);
    s.source_title = opt(f[2]);
    s.target_title = opt(f[3]);
    s.size = static_cast<std::size_t>(tsv::parse_int(f[4], file, line, "size"));
    out.push_back(std::move(s));
  });
  return out;
}

// ---------------------------------------------------------------------------

Stamp stage_gen_synth(const RunConfig& config, const fs::path& workdir) {
  StageRun run("gen-synth", config, workdir, json::object());
  SyntheticSpec spec;
  spec.n_concepts = config.synth_concepts;
  spec.languages = config.synth_languages;
  spec.n_editors = config.synth_editors;
  spec.editor_neighborhood = config.synth_editor_neighborhood;
  spec.n_topics = config.synth_topics;
  const auto synth = generate_synthetic(spec, config.synth_seed);
  const auto root = workdir / config.corpus_root;
  fs::create_directories(root);
  write_corpus(synth.corpus, root);
  for (const char* f : kCorpusFiles) run.output(run.corpus_file(f));
  write_ground_truth(synth.truth, run.output(run.corpus_file(artifact::kGroundTruth)));
  run.stamp().seed = config.synth_seed;
  run.stamp().summary["concepts"] = spec.n_concepts;
  run.stamp().summary["articles"] = synth.corpus.articles.size();
  for (const auto& [lang, ids] : synth.truth.missing) run.stamp().summary["missing"][lang] = ids.size();
  return run.finish();
}

Stamp stage_build_graph(const RunConfig& config, const fs::path& workdir) {
  StageRun run("build-graph", config, workdir, pair_scope(config));
  Corpus corpus = load_corpus(run.corpus_inputs());
  auto graph = build_graph(corpus, config.source, config.target);
  weakly_connected_components(graph);
  {
    tsv::Writer w(run.output(artifact::kComponents), kComponentCols);
    for (const auto& s : summarize_components(graph)) {
      w.row(s.component, s.representative.value_or(""), s.source_title.value_or(""), s.target_title.value_or(""),
            s.size);
    }
  }
  auto& sum = run.stamp().summary;
  sum["nodes"] = graph.nodes().size();
  sum["components"] = graph.component_count();
  sum["edges"] = {{"sitelink", graph.edge_count(EdgeKind::Sitelink)},
                  {"interlanguage", graph.edge_count(EdgeKind::InterLanguage)},
                  {"redirect", graph.edge_count(EdgeKind::Redirect)}};
  sum["corpus_warnings"] = corpus.warnings.size();
  return run.finish();
}

Stamp stage_find_missing(const RunConfig& config, const fs::path& workdir) {
  StageRun run("find-missing", config, workdir, pair_scope(config));
  const auto components = read_components(run.input(artifact::kComponents));
  const auto missing = missing_from_components(components, config.source, config.target);
  write_missing(missing, run.output(artifact::kMissing));
  run.stamp().summary["missing"] = missing.entries.size();
  return run.finish();
}

Stamp stage_train_lda(const RunConfig& config, const fs::path& workdir) {
  StageRun run("train-lda", config, workdir, {{"source", config.source}});
  Corpus corpus = load_corpus(run.corpus_inputs());
  std::vector<std::string> titles;
  const auto docs = source_documents(corpus, config.source, &titles);
  LdaConfig lda;
  lda.n_topics = config.n_topics;
  lda.iterations = config.lda_iterations;
  lda.alpha = config.lda_alpha;
  lda.beta = config.lda_beta;
  lda.inference_sweeps = config.lda_inference_sweeps;
  lda.seed = config.lda_seed;
  const auto model = train_lda(docs, lda);
  model.save(run.output(artifact::kTopicModel));

  std::vector<std::string> kept;
  std::vector<TopicVector> vectors;
  for (std::size_t d = 0; d < docs.size(); ++d) {
    auto v = infer_topic_vector(model, docs[d]);
    if (v.squaredNorm() == 0.0) continue;
    kept.push_back(titles[d]);
    vectors.push_back(std::move(v));
  }
  Eigen::MatrixXd m(static_cast<Eigen::Index>(vectors.size()), model.n_topics());
  for (std::size_t r = 0; r < vectors.size(); ++r) m.row(static_cast<Eigen::Index>(r)) = vectors[r].transpose();
  write_article_topics(ArticleTopics(std::move(kept), std::move(m)), run.output(artifact::kArticleTopics));

  run.stamp().seed = config.lda_seed;
  auto& sum = run.stamp().summary;
  sum["documents"] = docs.size();
  sum["vocabulary"] = model.vocab_size();
  sum["articles_with_topics"] = vectors.size();
  if (!model.perplexity_trace.empty()) {
    sum["perplexity_first"] = model.perplexity_trace.front();
    sum["perplexity_last"] = model.perplexity_trace.back();
  }
  return run.finish();
}

Stamp stage_extract_features(const RunConfig& config, const fs::path& workdir) {
  StageRun run("extract-features", config, workdir, pair_scope(config));
  Corpus corpus = load_corpus(run.corpus_inputs());
  const auto model = TopicModel::load(run.input(artifact::kTopicModel));
  const auto missing = read_missing(run.input(artifact::kMissing), config.source, config.target);
  auto graph = build_graph(corpus, config.source, config.target);
  weakly_connected_components(graph);
  FeatureExtractor fx(corpus, graph, model);

  const auto ranks = compute_rank_targets(corpus, config.target);
  const auto pairs = training_pairs(graph, ranks);
  std::vector<ConceptId> train_ids;
  Eigen::VectorXd y(static_cast<Eigen::Index>(pairs.size()));
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    train_ids.push_back(pairs[i].concept_id);
    y(static_cast<Eigen::Index>(i)) = pairs[i].y;
  }
  write_features(to_matrix(fx.schema(), fx.extract(train_ids)), run.output(artifact::kFeaturesTrain));
  write_targets(train_ids, y, run.output(artifact::kTargets));

  std::unordered_map<std::string, const ArticleRecord*> source_articles;
  for (const auto& a : corpus.articles) {
    if (a.lang == config.source && !a.is_redirect) source_articles.emplace(a.title, &a);
  }
  const auto views = global_views(corpus);
  std::size_t short_articles = 0, unpopular = 0, disambiguation = 0;
  std::vector<ConceptId> candidates;
  for (const auto& e : missing.entries) {
    const ArticleRecord* a = source_articles.at(e.source_title);
    auto v = views.find({config.source, e.source_title});
    const std::int64_t n_views = v == views.end() ? 0 : v->second;
    if (a->is_disambiguation) {
      ++disambiguation;
    } else if (a->byte_length < config.min_bytes) {
      ++short_articles;
    } else if (n_views < config.min_views) {
      ++unpopular;
    } else {
      candidates.push_back(e.concept_id);
    }
  }
  write_features(to_matrix(fx.schema(), fx.extract(candidates)), run.output(artifact::kFeaturesMissing));

  auto& sum = run.stamp().summary;
  sum["schema_hash"] = fx.schema().hash;
  sum["columns"] = fx.schema().columns.size();
  sum["training_pairs"] = pairs.size();
  sum["missing"] = missing.entries.size();
  sum["candidates"] = candidates.size();
  sum["filtered"] = {{"disambiguation", disambiguation}, {"min_bytes", short_articles}, {"min_views", unpopular}};
  return run.finish();
}

Stamp stage_train_ranker(const RunConfig& config, const fs::path& workdir) {
  StageRun run("train-ranker", config, workdir, pair_scope(config));
  const auto features_file = run.input(artifact::kFeaturesTrain);
  const auto m = read_features(features_file);
  const auto targets_file = run.input(artifact::kTargets);
  const Eigen::VectorXd y = aligned_targets(m, read_targets(targets_file), targets_file);
  const auto [train, test] = stratified_split(y, config.test_fraction, config.split_seed);

  ForestConfig fc;
  fc.n_trees_grid = config.forest_trees;
  fc.max_depth_grid = config.forest_depths;
  fc.cv_folds = config.forest_cv_folds;
  fc.feature_fraction = config.forest_feature_fraction;
  fc.min_samples_leaf = config.forest_min_samples_leaf;
  fc.seed = config.forest_seed;
  const auto train_rows = select_rows(m, train);
  const auto model = train_forest(train_rows.values, y(train), fc, m.schema.hash);
  model.save(run.output(artifact::kRanker));

  {
    std::vector<std::string> split(static_cast<std::size_t>(m.rows()), "train");
    for (auto r : test) split[static_cast<std::size_t>(r)] = "test";
    tsv::Writer w(run.output(artifact::kSplit), kSplitCols);
    for (std::size_t r = 0; r < split.size(); ++r) w.row(m.concept_ids[r], split[r]);
  }
  const auto test_rows = select_rows(m, test);
  write_predictions(test_rows.concept_ids, predict(model, test_rows), run.output(artifact::kTestPredictions));

  run.stamp().seed = {{"forest_seed", config.forest_seed}, {"split_seed", config.split_seed}};
  auto& sum = run.stamp().summary;
  sum["train_rows"] = train.size();
  sum["test_rows"] = test.size();
  sum["n_trees"] = model.n_trees;
  sum["max_depth"] = model.max_depth;
  for (const auto& c : model.cv) sum["cv"].push_back({{"n_trees", c.n_trees}, {"max_depth", c.max_depth}, {"rmse", c.rmse}});
  return run.finish();
}

Stamp stage_rank(const RunConfig& config, const fs::path& workdir) {
  StageRun run("rank", config, workdir, pair_scope(config));
  const auto model = ForestModel::load(run.input(artifact::kRanker));
  const auto m = read_features(run.input(artifact::kFeaturesMissing));
  write_predictions(m.concept_ids, predict(model, m), run.output(artifact::kPredictions));
  run.stamp().summary["predictions"] = m.concept_ids.size();
  return run.finish();
}

Stamp stage_build_interests(const RunConfig& config, const fs::path& workdir) {
  StageRun run("build-interests", config, workdir, {{"source", config.source}});
  Corpus corpus = load_corpus(run.corpus_inputs());
  const auto topics = read_article_topics(run.input(artifact::kArticleTopics));
  const SourceArticleIndex index(corpus, config.source);
  const TopicLookup lookup = [&](const std::string& title) { return topics.find(title); };
  std::vector<InterestVector> out;
  std::size_t skipped = 0;
  const auto histories = build_histories(corpus, index);
  for (const auto& h : histories) {
    try {
      out.push_back(interest_vector(h, lookup, config.method, config.w));
    } catch (const Error& e) {
      if (e.code() != Errc::EmptyHistory) throw;
      ++skipped;
    }
  }
  write_interests(out, run.output(artifact::kInterests));
  auto& sum = run.stamp().summary;
  sum["editors"] = histories.size();
  sum["interest_vectors"] = out.size();
  sum["skipped_empty_history"] = skipped;
  return run.finish();
}

Stamp stage_match(const RunConfig& config, const fs::path& workdir) {
  StageRun run("match", config, workdir, pair_scope(config));
  const auto editors = read_interests(run.input(artifact::kInterests));
  const auto predictions = read_predictions(run.input(artifact::kPredictions));
  const auto missing = read_missing(run.input(artifact::kMissing), config.source, config.target);
  const auto topics = read_article_topics(run.input(artifact::kArticleTopics));

  std::vector<PoolItem> pool;
  std::vector<Candidate> candidates;
  std::size_t without_topics = 0;
  for (auto& item : candidate_pool(missing, predictions, config.top_K)) {
    const TopicVector* v = topics.find(item.source_title);
    if (!v) {
      ++without_topics;
      continue;
    }
    candidates.push_back({item.concept_id, *v});
    pool.push_back(std::move(item));
  }
  if (candidates.empty()) throw Error(Errc::EmptyPool, "no ranked missing article has a topic vector");
  if (editors.empty()) throw Error(Errc::NoEligibleEditors, "interests.tsv has no editors");
  const auto instance = build_instance(editors, candidates);
  const auto greedy = greedy_match(instance, config.k_per_editor);
  const auto plan =
      config.matcher == "greedy" ? greedy : optimal_match(instance, config.k_per_editor, config.max_pairs);
  write_plan(plan, pool, run.output(artifact::kPlan));

  auto& sum = run.stamp().summary;
  sum["matcher"] = config.matcher;
  sum["editors"] = editors.size();
  sum["pool"] = pool.size();
  sum["pool_without_topics"] = without_topics;
  sum["assignments"] = plan.assignments.size();
  sum["objective"] = plan.objective;
  sum["average_score"] = plan.average();
  sum["greedy_objective"] = greedy.objective;
  return run.finish();
}

Stamp stage_evaluate(const RunConfig& config, const fs::path& workdir) {
  StageRun run("evaluate", config, workdir, pair_scope(config));
  json report = {{"config", config_json(config)},
                 {"seeds",
                  {{"synth_seed", config.synth_seed},
                   {"lda_seed", config.lda_seed},
                   {"forest_seed", config.forest_seed},
                   {"split_seed", config.split_seed},
                   {"bootstrap_seed", config.bootstrap_seed}}}};
  bool evaluated = false;

  if (run.has(artifact::kTestPredictions) && run.has(artifact::kTargets)) {
    evaluated = true;
    const auto preds = read_predictions(run.input(artifact::kTestPredictions));
    const auto targets_file = run.input(artifact::kTargets);
    const auto targets = read_targets(targets_file);
    std::vector<ConceptId> ids;
    Eigen::VectorXd pred(static_cast<Eigen::Index>(preds.size())), truth(pred.size());
    for (const auto& [id, p] : preds) {
      auto it = targets.find(id);
      if (it == targets.end()) throw Error(Errc::StaleArtifact, targets_file.string() + " lacks " + id);
      pred(static_cast<Eigen::Index>(ids.size())) = p;
      truth(static_cast<Eigen::Index>(ids.size())) = it->second;
      ids.push_back(id);
    }
    json ranking;
    ranking["forest"] = metrics_json(rmse_spearman(pred, truth));
    ranking["mean_baseline"] = metrics_json(rmse_spearman(mean_baseline().predict(truth.size()), truth));
    if (run.has(artifact::kFeaturesTrain)) {
      const auto m = read_features(run.input(artifact::kFeaturesTrain));
      std::unordered_map<ConceptId, Eigen::Index> row;
      for (std::size_t r = 0; r < m.concept_ids.size(); ++r) row[m.concept_ids[r]] = static_cast<Eigen::Index>(r);
      std::vector<Eigen::Index> rows;
      for (const auto& id : ids) {
        auto it = row.find(id);
        if (it == row.end()) throw Error(Errc::StaleArtifact, "features lack held-out concept " + id);
        rows.push_back(it->second);
      }
      ranking["source_baseline"] = metrics_json(rmse_spearman(source_language_baseline(select_rows(m, rows)), truth));

      if (config.stepwise && run.has(artifact::kSplit)) {
        const auto split = read_split(run.input(artifact::kSplit));
        const Eigen::VectorXd y = aligned_targets(m, targets, targets_file);
        std::vector<Eigen::Index> train, test;
        for (std::size_t r = 0; r < m.concept_ids.size(); ++r) {
          (split.at(m.concept_ids[r]) == "test" ? test : train).push_back(static_cast<Eigen::Index>(r));
        }
        StepwiseConfig sc;
        sc.n_trees = config.stepwise_trees;
        sc.cv_folds = config.forest_cv_folds;
        sc.seed = config.forest_seed;
        const auto sets = family_feature_sets(m.schema);
        const auto steps = stepwise_feature_selection(sets, m.values(train, Eigen::all), y(train),
                                                      m.values(test, Eigen::all), y(test), sc);
        for (const auto& s : steps) {
          report["stepwise"].push_back({{"added", s.added}, {"cv_rmse", s.cv_rmse}, {"test", metrics_json(s.test)}});
        }
      }
    }
    report["ranking"] = ranking;
    run.stamp().summary["forest_rmse"] = ranking["forest"]["rmse"];
    run.stamp().summary["forest_spearman"] = ranking["forest"]["spearman"];
  }

  if (run.has(artifact::kArticleTopics) && run.has(run.corpus_file("edits.tsv"))) {
    evaluated = true;
    Corpus corpus = load_corpus(run.corpus_inputs());
    const auto topics = read_article_topics(run.input(artifact::kArticleTopics));
    const auto histories = build_histories(corpus, SourceArticleIndex(corpus, config.source));
    BootstrapConfig bc;
    bc.resamples = config.bootstrap_resamples;
    bc.seed = config.bootstrap_seed;
    std::vector<MrrSweepRow> rows;
    for (auto method : config.mrr_methods) {
      for (int w : config.mrr_ws) rows.push_back({method, w, mrr_holdout(histories, topics, method, w, bc)});
    }
    write_mrr_sweep(rows, run.output(artifact::kMrrSweep));
    double harmonic = 0.0;
    for (Eigen::Index i = 1; i <= topics.size(); ++i) harmonic += 1.0 / static_cast<double>(i);
    report["mrr"]["candidates"] = topics.size();
    report["mrr"]["random_expectation"] = harmonic / static_cast<double>(topics.size());
    for (const auto& r : rows) {
      report["mrr"]["sweep"].push_back({{"method", to_string(r.method)},
                                        {"w", r.w},
                                        {"mrr", r.report.mrr},
                                        {"ci_low", r.report.ci_low},
                                        {"ci_high", r.report.ci_high},
                                        {"n_editors", r.report.n_editors}});
    }
    const auto best = std::max_element(rows.begin(), rows.end(),
                                       [](const auto& a, const auto& b) { return a.report.mrr < b.report.mrr; });
    if (best != rows.end()) {
      run.stamp().summary["best_mrr"] = {{"method", to_string(best->method)}, {"w", best->w}, {"mrr", best->report.mrr}};
    }
  }

  if (run.has(artifact::kPlan)) {
    evaluated = true;
    run.input(artifact::kPlan);
    if (const auto stamps = read_stamps(workdir); !stamps.empty()) {
      for (const auto& s : stamps) {
        if (s.stage == "match") {
          report["matching"] = {{"objective", s.summary.value("objective", 0.0)},
                                {"greedy_objective", s.summary.value("greedy_objective", 0.0)},
                                {"average_score", s.summary.value("average_score", 0.0)},
                                {"assignments", s.summary.value("assignments", 0)}};
        }
      }
    }
  }

  if (!evaluated) {
    throw Error(Errc::MissingFile, "nothing to evaluate: need test_predictions.tsv and targets.tsv, or "
                                   "article_topics.tsv and the corpus edits");
  }
  {
    std::ofstream out(run.output(artifact::kReport), std::ios::binary | std::ios::trunc);
    out << report.dump(2) << '\n';
  }
  run.stamp().seed = config.bootstrap_seed;
  return run.finish();
}

Stamp stage_sample_precision(const RunConfig& config, const fs::path& workdir) {
  StageRun run("sample-precision", config, workdir, pair_scope(config));
  const auto predictions = read_predictions(run.input(artifact::kPredictions));
  const auto missing = read_missing(run.input(artifact::kMissing), config.source, config.target);
  const auto pool = candidate_pool(missing, predictions, std::numeric_limits<std::size_t>::max());
  const auto strata = precision_sample(pool);
  write_precision_sample(strata, run.output(artifact::kPrecisionSample));
  std::size_t rows = 0;
  for (const auto& s : strata) rows += s.entries.size();
  run.stamp().summary["pool"] = pool.size();
  run.stamp().summary["strata"] = strata.size();
  run.stamp().summary["rows"] = rows;
  return run.finish();
}

Stamp stage_tally_precision(const RunConfig& config, const fs::path& workdir, const fs::path& labelled) {
  StageRun run("tally-precision", config, workdir, pair_scope(config));
  const fs::path file = labelled.is_absolute() ? labelled : workdir / labelled;
  if (!fs::exists(file)) throw Error(Errc::MissingFile, file.string());
  const auto t = tally_precision(file);
  auto side = [](std::size_t n, std::size_t correct, std::pair<double, double> ci) {
    return json{{"n", n},
                {"correct", correct},
                {"precision", n ? static_cast<double>(correct) / static_cast<double>(n) : 0.0},
                {"ci_low", ci.first},
                {"ci_high", ci.second}};
  };
  const json out = {{"strict", side(t.strict_n, t.strict_correct, t.strict_interval)},
                    {"lenient", side(t.lenient_n, t.lenient_correct, t.lenient_interval)}};
  {
    std::ofstream f(run.output(artifact::kPrecisionTally), std::ios::binary | std::ios::trunc);
    f << out.dump(2) << '\n';
  }
  run.stamp().summary = out;
  return run.finish();
}

std::vector<Stamp> run_pipeline(const RunConfig& config, const fs::path& workdir) {
  std::vector<Stamp> out;
  for (auto stage : {stage_build_graph, stage_find_missing, stage_train_lda, stage_extract_features,
                     stage_train_ranker, stage_rank, stage_build_interests, stage_match, stage_evaluate,
                     stage_sample_precision}) {
    out.push_back(stage(config, workdir));
  }
  return out;
}

}  // namespace gapfinder
