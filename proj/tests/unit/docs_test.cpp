#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "jointgan/config.hpp"
#include "jointgan/objectives.hpp"
#include "support.hpp"

namespace jointgan {
namespace {

namespace fs = std::filesystem;

const fs::path kSource = JOINTGAN_SOURCE_DIR;

std::string slurp(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string trim(std::string s) {
  const auto a = s.find_first_not_of(" \t`");
  const auto b = s.find_last_not_of(" \t`");
  return a == std::string::npos ? "" : s.substr(a, b - a + 1);
}

struct Block {
  std::string info;  // text after the opening fence
  std::string body;
};

/// Fenced code blocks in document order.
std::vector<Block> blocks(const std::string& text) {
  std::vector<Block> out;
  std::istringstream in(text);
  std::string line;
  Block* open = nullptr;
  while (std::getline(in, line)) {
    if (line.rfind("```", 0) == 0) {
      if (open) {
        open = nullptr;
      } else {
        out.push_back({trim(line.substr(3)), ""});
        open = &out.back();
      }
    } else if (open) {
      open->body += line + "\n";
    }
  }
  return out;
}

std::vector<fs::path> documents() {
  std::vector<fs::path> docs{kSource / "README.md"};
  for (const auto& e : fs::directory_iterator(kSource / "docs")) {
    if (e.path().extension() == ".md") docs.push_back(e.path());
  }
  std::sort(docs.begin(), docs.end());
  return docs;
}

TEST(Docs, ConfigDefaultsMatchTheCode) {
  const auto text = slurp(kSource / "docs" / "configuration.md");
  std::istringstream in(text);
  std::string line;
  std::set<std::string> documented;
  while (std::getline(in, line)) {
    if (line.rfind("| ", 0) != 0) continue;
    std::vector<std::string> cells;
    std::stringstream row(line.substr(1));
    std::string cell;
    while (std::getline(row, cell, '|')) cells.push_back(trim(cell));
    if (cells.size() < 2 || cells[0] == "key" || cells[0].find("---") != std::string::npos) continue;
    documented.insert(cells[0]);
    ExperimentConfig c;
    ASSERT_NO_THROW(c.set(cells[0], cells[1])) << cells[0];
    EXPECT_EQ(c, ExperimentConfig{}) << "documented default of " << cells[0] << " is " << cells[1];
  }
  std::set<std::string> keys;
  for (const auto& [k, v] : ExperimentConfig{}.entries()) keys.insert(k);
  EXPECT_EQ(documented, keys);
}

TEST(Docs, EquilibriumValuesMatchTheCode) {
  const auto text = slurp(kSource / "docs" / "objectives.md");
  EXPECT_NE(text.find("K ln(1/K)"), std::string::npos);
  for (std::size_t k : {4u, 5u, 6u}) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", equilibrium_value(k));
    EXPECT_NE(text.find(buf), std::string::npos) << buf;
  }
}

TEST(Docs, ReproductionGuideCoversEveryCriterion) {
  const auto guide = blocks(slurp(kSource / "docs" / "reproduction.md"));
  for (int i = 1; i <= 10; ++i) {
    const std::string needle = "--only A" + std::to_string(i) + "\n";
    bool found = false, fast = false;
    for (const auto& b : guide) {
      if (b.body.find(needle) != std::string::npos) {
        found = true;
        fast = fast || b.info == "sh doctest";
      }
    }
    EXPECT_TRUE(found) << "A" << i;
    if (i == 1) EXPECT_TRUE(fast) << "the A1 command must run in the default doc test";
  }
}

/// Runs the blocks tagged `tag` of each document in one fresh directory per
/// document, with the built binaries first on PATH.
void run_blocks(const std::string& tag) {
  const auto bin = fs::path(JOINTGAN_CLI_PATH).parent_path();
  std::size_t ran = 0;
  for (const auto& doc : documents()) {
    jointgan::testing::TempDir dir;
    const auto work = dir.path() / doc.stem();
    fs::create_directories(work);
    for (const auto& b : blocks(slurp(doc))) {
      if (b.info != tag) continue;
      const auto script = work / "block.sh";
      std::ofstream(script) << "set -eu\nexport PATH='" << bin.string() << "':\"$PATH\"\ncd '" << work.string()
                            << "'\n"
                            << b.body;
      const auto log = work / "block.log";
      const int status = std::system(("bash '" + script.string() + "' > '" + log.string() + "' 2>&1").c_str());
      const int code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
      EXPECT_EQ(code, 0) << doc.filename() << " block:\n" << b.body << "output:\n" << slurp(log);
      ++ran;
    }
  }
  if (ran == 0) GTEST_SKIP() << "no blocks tagged " << tag;
}

TEST(Docs, FastCommandsRun) { run_blocks("sh doctest"); }

TEST(Docs, SlowCommandsRun) {
  const char* flag = std::getenv("JOINTGAN_DOCTEST_SLOW");
  if (!flag || std::string(flag) != "1") GTEST_SKIP() << "set JOINTGAN_DOCTEST_SLOW=1 to run the long commands";
  run_blocks("sh doctest-slow");
}

}  // namespace
}  // namespace jointgan
