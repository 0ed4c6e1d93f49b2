#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "gapfinder/corpus.hpp"

namespace gapfinder::testing {

// Scratch directory removed on scope exit.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("gapfinder_test_" + std::to_string(rd()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void spit(const std::filesystem::path& file, const std::string& text) {
  std::ofstream out(file, std::ios::binary);
  out << text;
}

inline ArticleRecord article(LanguageCode lang, std::string title, std::int64_t bytes = 2000) {
  ArticleRecord a;
  a.lang = std::move(lang);
  a.title = std::move(title);
  a.byte_length = bytes;
  a.editor_count = 1;
  return a;
}

inline ArticleRecord redirect(LanguageCode lang, std::string title, std::string target) {
  ArticleRecord a;
  a.lang = std::move(lang);
  a.title = std::move(title);
  a.byte_length = 40;
  a.is_redirect = true;
  a.redirect_target = std::move(target);
  return a;
}

// Tumor/Neoplasm example: Q133212 covers de, fr and hr; the neoplasm concept
// only en. An en-de inter-language link and a de redirect join the two.
inline Corpus neoplasm_corpus() {
  Corpus c;
  c.languages = {"de", "en", "fr", "hr"};
  c.articles = {article("de", "Tumor", 30000),      redirect("de", "Neoplasma", "Tumor"),
                article("fr", "Tumeur", 20000),     article("hr", "Novotvorina", 5000),
                article("en", "Neoplasm", 40000)};
  c.sitelinks = {{"Q133212", "de", "Tumor"},
                 {"Q133212", "fr", "Tumeur"},
                 {"Q133212", "hr", "Novotvorina"},
                 {"Q1216998", "en", "Neoplasm"}};
  c.interlanguage_links = {{"en", "Neoplasm", "de", "Neoplasma"}};
  return c;
}

}  // namespace gapfinder::testing
