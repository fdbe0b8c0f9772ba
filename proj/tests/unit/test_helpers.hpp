#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <sstream>
#include <string>

#include "skillguard/skill_model.hpp"

namespace testutil {

namespace fs = std::filesystem;

/// Temp directory removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<unsigned> counter{0};
    root_ = fs::temp_directory_path() /
            ("skillguard-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    fs::create_directories(root_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(root_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const fs::path& path() const { return root_; }

 private:
  fs::path root_;
};

inline void write_file(const fs::path& p, const std::string& content) {
  fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  out << content;
}

inline std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Writes SKILL.md plus extra files into dir and loads the package.
inline skillguard::LoadResult make_package(
    const fs::path& dir, const std::string& skill_md,
    const std::map<std::string, std::string>& files = {}) {
  write_file(dir / "SKILL.md", skill_md);
  for (const auto& [rel, content] : files) {
    write_file(dir / rel, content);
  }
  return skillguard::load_package(dir);
}

inline std::string table2_skill_md() {
  return
      "---\n"
      "name: pdf-processing\n"
      "description: Extract text and tables from PDF files. Use when working\n"
      "  with PDF files or when the user mentions PDFs.\n"
      "---\n"
      "\n"
      "## Instructions\n"
      "\n"
      "When the user asks to process a PDF, use the bundled extract.py script:\n"
      "\n"
      "    python extract.py --input <file> --output <dir>\n"
      "\n"
      "Read PDFs from the working directory and write results to the output\n"
      "directory. If the user requests merging, call merge.py with the list of\n"
      "input files. For network-hosted PDFs, download them first using the\n"
      "fetch tool before processing.\n";
}

inline std::string fixture_dir() {
#ifdef SKILLGUARD_FIXTURE_DIR
  return SKILLGUARD_FIXTURE_DIR;
#else
  return "tests/fixtures";
#endif
}

}  // namespace testutil
