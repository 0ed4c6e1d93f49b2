#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

#include "gapfinder/error.hpp"
#include "gapfinder/pipeline.hpp"
#include "gapfinder/tsv.hpp"

namespace gapfinder {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad(const std::string& key, const std::string& value, const char* what) {
  throw Error(Errc::ConfigError, "key '" + key + "': '" + value + "' is not " + what);
}

template <typename T>
T number(const std::string& key, const std::string& value) {
  T out{};
  const auto* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (value.empty() || ec != std::errc{} || ptr != end) bad(key, value, "a number");
  return out;
}

std::vector<std::string> items(const std::string& value) {
  std::vector<std::string> out;
  for (auto part : tsv::split(value, ',')) {
    auto t = trim(part);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

template <typename T>
std::string join(const std::vector<T>& v, const std::function<std::string(const T&)>& show) {
  std::string out;
  for (const auto& x : v) {
    if (!out.empty()) out += ',';
    out += show(x);
  }
  return out;
}

struct Field {
  std::string key;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename T>
Field scalar(std::string key, std::string help, T RunConfig::*member) {
  return {key, std::move(help),
          [key, member](RunConfig& c, const std::string& v) {
            if constexpr (std::is_same_v<T, std::string>) {
              if (v.empty()) bad(key, v, "a non-empty string");
              c.*member = v;
            } else if constexpr (std::is_same_v<T, bool>) {
              if (v == "true" || v == "1") {
                c.*member = true;
              } else if (v == "false" || v == "0") {
                c.*member = false;
              } else {
                bad(key, v, "a boolean");
              }
            } else {
              c.*member = number<T>(key, v);
            }
          },
          [member](const RunConfig& c) -> std::string {
            if constexpr (std::is_same_v<T, std::string>) {
              return c.*member;
            } else if constexpr (std::is_same_v<T, bool>) {
              return c.*member ? "true" : "false";
            } else if constexpr (std::is_floating_point_v<T>) {
              return tsv::format_double(c.*member);
            } else {
              return std::to_string(c.*member);
            }
          }};
}

Field int_list(std::string key, std::string help, std::vector<int> RunConfig::*member) {
  return {key, std::move(help),
          [key, member](RunConfig& c, const std::string& v) {
            std::vector<int> out;
            for (const auto& s : items(v)) out.push_back(number<int>(key, s));
            if (out.empty()) bad(key, v, "a non-empty list");
            c.*member = out;
          },
          [member](const RunConfig& c) {
            return join<int>(c.*member, [](const int& x) { return std::to_string(x); });
          }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = [] {
    std::vector<Field> f;
    f.push_back(scalar("corpus_root", "corpus directory, relative to the workdir", &RunConfig::corpus_root));
    f.push_back(scalar("source", "source language code", &RunConfig::source));
    f.push_back(scalar("target", "target language code", &RunConfig::target));
    f.push_back(scalar("synth_concepts", "gen-synth: number of concepts", &RunConfig::synth_concepts));
    f.push_back({"synth_languages", "gen-synth: comma-separated languages, source first",
                 [](RunConfig& c, const std::string& v) {
                   c.synth_languages = items(v);
                   if (c.synth_languages.empty()) bad("synth_languages", v, "a non-empty list");
                 },
                 [](const RunConfig& c) {
                   return join<std::string>(c.synth_languages, [](const std::string& s) { return s; });
                 }});
    f.push_back(scalar("synth_editors", "gen-synth: number of editors", &RunConfig::synth_editors));
    f.push_back(scalar("synth_editor_neighborhood", "gen-synth: articles per editor interest area, 0 is the whole topic",
                       &RunConfig::synth_editor_neighborhood));
    f.push_back(scalar("synth_topics", "gen-synth: planted topic count", &RunConfig::synth_topics));
    f.push_back(scalar("synth_seed", "gen-synth: seed", &RunConfig::synth_seed));
    f.push_back(scalar("n_topics", "LDA topic count", &RunConfig::n_topics));
    f.push_back(scalar("lda_iterations", "LDA Gibbs sweeps", &RunConfig::lda_iterations));
    f.push_back(scalar("lda_alpha", "document-topic prior, 0 means 50/n_topics", &RunConfig::lda_alpha));
    f.push_back(scalar("lda_beta", "topic-word prior", &RunConfig::lda_beta));
    f.push_back(scalar("lda_inference_sweeps", "sweeps when inferring a document", &RunConfig::lda_inference_sweeps));
    f.push_back(scalar("lda_seed", "LDA seed", &RunConfig::lda_seed));
    f.push_back(scalar("min_bytes", "drop candidates whose source article is shorter", &RunConfig::min_bytes));
    f.push_back(scalar("min_views", "drop candidates whose source article has fewer views", &RunConfig::min_views));
    f.push_back(int_list("forest_trees", "tree counts searched by cross-validation", &RunConfig::forest_trees));
    f.push_back(int_list("forest_depths", "depth caps searched, 0 is unlimited", &RunConfig::forest_depths));
    f.push_back(scalar("forest_cv_folds", "cross-validation folds", &RunConfig::forest_cv_folds));
    f.push_back(scalar("forest_feature_fraction", "share of features tried per split",
                       &RunConfig::forest_feature_fraction));
    f.push_back(scalar("forest_min_samples_leaf", "minimum rows per leaf", &RunConfig::forest_min_samples_leaf));
    f.push_back(scalar("forest_seed", "forest seed", &RunConfig::forest_seed));
    f.push_back(scalar("test_fraction", "held-out share of training pairs", &RunConfig::test_fraction));
    f.push_back(scalar("split_seed", "train/test split seed", &RunConfig::split_seed));
    f.push_back(scalar("w", "history size for interest vectors", &RunConfig::w));
    f.push_back({"method", "average | weighted_average | weighted_medoid",
                 [](RunConfig& c, const std::string& v) {
                   const auto m = parse_interest_method(v);
                   if (!m) bad("method", v, "an interest method");
                   c.method = *m;
                 },
                 [](const RunConfig& c) { return std::string(to_string(c.method)); }});
    f.push_back(scalar("top_K", "candidate pool size by predicted importance", &RunConfig::top_K));
    f.push_back(scalar("k_per_editor", "recommendations per editor", &RunConfig::k_per_editor));
    f.push_back({"matcher", "optimal | greedy",
                 [](RunConfig& c, const std::string& v) {
                   if (v != "optimal" && v != "greedy") bad("matcher", v, "optimal or greedy");
                   c.matcher = v;
                 },
                 [](const RunConfig& c) { return c.matcher; }});
    f.push_back(scalar("max_pairs", "largest editor x article instance for the optimal matcher",
                       &RunConfig::max_pairs));
    f.push_back(scalar("bootstrap_resamples", "bootstrap resamples for MRR intervals",
                       &RunConfig::bootstrap_resamples));
    f.push_back(scalar("bootstrap_seed", "bootstrap seed", &RunConfig::bootstrap_seed));
    f.push_back({"mrr_methods", "interest methods in the MRR sweep",
                 [](RunConfig& c, const std::string& v) {
                   std::vector<InterestMethod> out;
                   for (const auto& s : items(v)) {
                     const auto m = parse_interest_method(s);
                     if (!m) bad("mrr_methods", s, "an interest method");
                     out.push_back(*m);
                   }
                   if (out.empty()) bad("mrr_methods", v, "a non-empty list");
                   c.mrr_methods = out;
                 },
                 [](const RunConfig& c) {
                   return join<InterestMethod>(c.mrr_methods,
                                               [](const InterestMethod& m) { return std::string(to_string(m)); });
                 }});
    f.push_back(int_list("mrr_ws", "history sizes in the MRR sweep", &RunConfig::mrr_ws));
    f.push_back(scalar("stepwise", "run stepwise feature selection in evaluate", &RunConfig::stepwise));
    f.push_back(scalar("stepwise_trees", "trees per stepwise forest", &RunConfig::stepwise_trees));
    return f;
  }();
  return table;
}

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (f.key == key) return f;
  }
  throw Error(Errc::ConfigError, "unknown config key '" + key + "'");
}

}  // namespace

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = [] {
    std::vector<std::string> out;
    for (const auto& f : fields()) out.push_back(f.key);
    return out;
  }();
  return keys;
}

std::string config_help(const std::string& key) { return field(key).help; }

void set_config_value(RunConfig& config, const std::string& key, const std::string& value) {
  field(key).set(config, trim(value));
}

std::string get_config_value(const RunConfig& config, const std::string& key) { return field(key).get(config); }

RunConfig read_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::ConfigError, "cannot read config " + file.string());
  RunConfig config;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto text = trim(line);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw Error(Errc::ConfigError, file.string() + ":" + std::to_string(line_no) + ": expected key = value");
    }
    set_config_value(config, trim(text.substr(0, eq)), text.substr(eq + 1));
  }
  return config;
}

void write_config(const RunConfig& config, const std::filesystem::path& file) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::ConfigError, "cannot write " + file.string());
  for (const auto& f : fields()) out << "# " << f.help << '\n' << f.key << " = " << f.get(config) << '\n';
}

nlohmann::json config_json(const RunConfig& config) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& f : fields()) j[f.key] = f.get(config);
  return j;
}

}  // namespace gapfinder
