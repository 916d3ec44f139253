#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "pyrseiz/evaluation.hpp"

using namespace pyrseiz;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path temp_dir(const std::string& name) {
  const auto d = fs::temp_directory_path() / ("pyrseiz_cli_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::stringstream s;
  s << std::ifstream(p, std::ios::binary).rdbuf();
  return s.str();
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> v;
  std::istringstream in(text);
  for (std::string l; std::getline(in, l);) v.push_back(l);
  return v;
}

}  // namespace

TEST_CASE("params lists every model") {
  const auto r = run({"params", "--all"});
  REQUIRE(r.code == 0);
  for (const char* v : {"21366", "21387", "41106", "41147", "8326", "8347", "14946", "14987"})
    CHECK(r.out.find(v) != std::string::npos);
  CHECK(r.out.find("63.64%") != std::string::npos);
  CHECK(lines_of(run({"params", "M5"}).out).size() >= 2);
}

TEST_CASE("unknown model is a one-line error") {
  const auto r = run({"params", "M9"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
  CHECK(r.err.find("M8") != std::string::npos);
  CHECK(lines_of(r.err).size() == 1);
}

TEST_CASE("synth is deterministic") {
  const auto d = temp_dir("synth");
  REQUIRE(run({"synth", "--classes", "3", "--records", "20", "--seed", "1", "--out", (d / "a").string()}).code == 0);
  REQUIRE(run({"synth", "--classes", "3", "--records", "20", "--seed", "1", "--out", (d / "b").string()}).code == 0);
  int files = 0;
  for (const auto& e : fs::recursive_directory_iterator(d / "a")) {
    if (!e.is_regular_file()) continue;
    ++files;
    const auto twin = d / "b" / fs::relative(e.path(), d / "a");
    REQUIRE(fs::exists(twin));
    CHECK(slurp(e.path()) == slurp(twin));
  }
  CHECK(files == 60);
}

TEST_CASE("missing dataset is reported") {
  const auto r = run({"cv", "--case", "A-B", "--data-root", "/nonexistent/pyrseiz"});
  CHECK(r.code == 1);
  CHECK(r.err.rfind("error: ", 0) == 0);
}

TEST_CASE("train, cv and predict on a synthetic set") {
  const auto d = temp_dir("pipeline");
  const std::string data = (d / "data").string(), out = (d / "runs").string();
  REQUIRE(run({"synth", "--classes", "2", "--records", "4", "--seed", "3", "--out", data}).code == 0);

  const auto t = run({"train", "--data-root", data, "--case", "A-B", "--epochs", "1", "--seed", "2", "--out", out});
  REQUIRE_MESSAGE(t.code == 0, t.err);
  const auto ckpt = fs::path(out) / "train_A-B_M5_scheme1_seed2.ckpt";
  CHECK(fs::exists(ckpt));
  CHECK(fs::exists(fs::path(out) / "train_A-B_M5_scheme1_seed2_history.csv"));
  CHECK(fs::exists(fs::path(out) / "train_A-B_M5_scheme1_seed2.config.json"));

  const auto c = run({"cv", "--data-root", data, "--case", "A-B", "--folds", "2", "--epochs", "1", "--seed", "2",
                      "--out", out, "--vote-log"});
  REQUIRE_MESSAGE(c.code == 0, c.err);
  const auto report = lines_of(slurp(fs::path(out) / "cv_A-B_M5_scheme1_seed2.csv"));
  REQUIRE(report.size() == 1 + 2 + 2);
  CHECK(report[0] == kReportCsvHeader);
  CHECK(fs::exists(fs::path(out) / "cv_A-B_M5_scheme1_seed2_fold01.ckpt"));
  CHECK(fs::exists(fs::path(out) / "cv_A-B_M5_scheme1_seed2_fold02.ckpt"));
  const auto votes = lines_of(slurp(fs::path(out) / "cv_A-B_M5_scheme1_seed2_votes.csv"));
  CHECK(votes.size() == 1 + 8 * 4);

  const auto input = (fs::path(data) / "B" / "B002.txt").string();
  const auto p = run({"predict", "--checkpoint", ckpt.string(), "--input", input, "--case", "A-B"});
  REQUIRE_MESSAGE(p.code == 0, p.err);
  const auto lines = lines_of(p.out);
  REQUIRE(lines.size() == 5);
  CHECK(lines[0] == kVoteLogHeader);
  for (int i = 1; i <= 4; ++i) {
    CHECK(lines[i].rfind("B002," + std::to_string(i - 1) + ",", 0) == 0);
    const auto votes_field = lines[i].substr(7, 5);
    CHECK(std::count(votes_field.begin(), votes_field.end(), '|') == 2);
  }
  const auto p2 = run({"predict", "--checkpoint", ckpt.string(), "--input", input, "--scheme", "2"});
  REQUIRE(p2.code == 0);
  CHECK(lines_of(p2.out)[1].substr(7, 9).find_first_not_of("01|") == std::string::npos);

  const auto mismatch = run({"predict", "--checkpoint", ckpt.string(), "--input", input, "--case", "A-B-E"});
  CHECK(mismatch.code == 1);
  CHECK(mismatch.err.find("classes") != std::string::npos);
}

TEST_CASE("json format and bad flags") {
  const auto d = temp_dir("json");
  const std::string data = (d / "data").string(), out = (d / "runs").string();
  REQUIRE(run({"synth", "--classes", "2", "--records", "2", "--seed", "4", "--out", data}).code == 0);
  const auto c = run({"cv", "--data-root", data, "--case", "A-B", "--folds", "2", "--epochs", "1", "--format", "json",
                      "--out", out});
  REQUIRE_MESSAGE(c.code == 0, c.err);
  const auto r = parse_report_json(slurp(fs::path(out) / "cv_A-B_M5_scheme1_seed1.json"));
  CHECK(r.folds.size() == 2);
  CHECK(r.run.model == "M5");

  CHECK(run({"cv", "--data-root", data, "--case", "A-B", "--scheme", "3"}).code != 0);
  CHECK(run({"cv", "--data-root", data, "--case", "A-Q"}).code == 1);
  CHECK(run({}).code != 0);
}
