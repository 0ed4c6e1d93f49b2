#include <csignal>
#include <iostream>
#include <map>
#include <optional>
#include <thread>

#include <CLI11.hpp>

#include "gapfinder/error.hpp"
#include "gapfinder/pipeline.hpp"
#include "gapfinder/service.hpp"

// after Eigen: <resolv.h> defines _res
#include <httplib.h>

namespace fs = std::filesystem;
using namespace gapfinder;

namespace {

httplib::Server* g_server = nullptr;

void stop_server(int) {
  if (g_server) g_server->stop();
}

int serve(const RunConfig& config, const fs::path& artifacts, const std::string& host, int port) {
  RecommendationService service;
  httplib::Server server;
  service.mount(server);
  if (!server.bind_to_port(host, port)) {
    throw Error(Errc::ConfigError, "cannot listen on " + host + ":" + std::to_string(port));
  }
  g_server = &server;
  std::signal(SIGINT, stop_server);
  std::signal(SIGTERM, stop_server);
  std::thread listener([&] { server.listen_after_bind(); });
  std::cerr << "listening on " << host << ":" << port << ", loading " << artifacts.string() << '\n';
  try {
    service.install(std::make_shared<const Catalog>(load_catalog(artifacts, config.top_K)));
  } catch (...) {
    server.stop();
    listener.join();
    throw;
  }
  std::cerr << "artifacts loaded\n";
  listener.join();
  g_server = nullptr;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Find and rank articles missing from a target-language Wikipedia, and match them to editors."};
  app.require_subcommand(1);
  app.fallthrough();

  std::string workdir = ".";
  std::string config_file;
  std::string dump_config;
  app.add_option("--workdir", workdir, "directory holding corpus and artifacts");
  app.add_option("-c,--config", config_file, "config file of key = value lines")->check(CLI::ExistingFile);
  app.add_option("--dump-config", dump_config, "write the effective config to this file and continue");

  std::map<std::string, std::optional<std::string>> overrides;
  for (const auto& key : config_keys()) {
    app.add_option("--" + key, overrides[key], config_help(key))->group("Config overrides");
  }

  using StageFn = Stamp (*)(const RunConfig&, const fs::path&);
  const std::vector<std::pair<std::string, std::pair<StageFn, std::string>>> stages = {
      {"gen-synth", {stage_gen_synth, "write a synthetic corpus with known ground truth"}},
      {"build-graph", {stage_build_graph, "build the concept graph and its connected components"}},
      {"find-missing", {stage_find_missing, "list concepts with a source article and no target article"}},
      {"train-lda", {stage_train_lda, "fit the topic model and infer article topic vectors"}},
      {"extract-features", {stage_extract_features, "compute ranking features for training pairs and candidates"}},
      {"train-ranker", {stage_train_ranker, "fit the random forest by cross-validation"}},
      {"rank", {stage_rank, "predict importance of missing candidates"}},
      {"build-interests", {stage_build_interests, "aggregate editor histories into interest vectors"}},
      {"match", {stage_match, "assign k recommendations per editor"}},
      {"evaluate", {stage_evaluate, "write the evaluation report"}},
  };
  std::map<const CLI::App*, StageFn> stage_of;
  for (const auto& [name, entry] : stages) stage_of[app.add_subcommand(name, entry.second)] = entry.first;

  auto* sample = app.add_subcommand("sample-precision", "draw the stratified precision sample, or tally labels");
  std::string tally;
  sample->add_option("--tally", tally, "labelled sample to tally instead of sampling")->check(CLI::ExistingFile);

  auto* all = app.add_subcommand("run", "run every stage after gen-synth");

  auto* serve_cmd = app.add_subcommand("serve", "serve recommendations over HTTP");
  int port = 8080;
  std::string host = "127.0.0.1";
  std::string artifacts;
  serve_cmd->add_option("--port", port, "port")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--host", host, "address to bind");
  serve_cmd->add_option("--artifacts", artifacts, "workdir, or a directory of per-pair workdirs (default: --workdir)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    RunConfig config = config_file.empty() ? RunConfig{} : read_config(config_file);
    for (const auto& [key, value] : overrides) {
      if (value) set_config_value(config, key, *value);
    }
    if (!dump_config.empty()) write_config(config, dump_config);

    auto report = [](const Stamp& s) { std::cout << s.stage << ' ' << s.summary.dump() << '\n'; };
    for (const auto* sub : app.get_subcommands()) {
      if (auto it = stage_of.find(sub); it != stage_of.end()) {
        report(it->second(config, workdir));
      } else if (sub == sample) {
        report(tally.empty() ? stage_sample_precision(config, workdir) : stage_tally_precision(config, workdir, tally));
      } else if (sub == all) {
        for (const auto& s : run_pipeline(config, workdir)) report(s);
      } else if (sub == serve_cmd) {
        return serve(config, artifacts.empty() ? fs::path(workdir) : fs::path(artifacts), host, port);
      }
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  }
  return 0;
}
