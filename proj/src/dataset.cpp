#include "pyrseiz/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

namespace pyrseiz {

namespace fs = std::filesystem;

namespace {

bool is_set_letter(char c) { return kSetLetters.find(c) != std::string_view::npos; }

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

char resolve_set(char c, const std::map<char, char>& aliases) {
  c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  if (is_set_letter(c)) return c;
  if (auto it = aliases.find(c); it != aliases.end()) return it->second;
  return '\0';
}

int trailing_number(const std::string& stem) {
  std::size_t end = stem.size();
  while (end > 0 && !std::isdigit(static_cast<unsigned char>(stem[end - 1]))) --end;
  std::size_t begin = end;
  while (begin > 0 && std::isdigit(static_cast<unsigned char>(stem[begin - 1]))) --begin;
  if (begin == end) return 0;
  int value = 0;
  std::from_chars(stem.data() + begin, stem.data() + end, value);
  return value;
}

}  // namespace

std::string EegRecord::id() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%c%03d", set_label, index);
  return buf;
}

EegRecord make_record(char set_label, int index, Vector<double> samples, Index expected_length) {
  if (!is_set_letter(set_label)) throw Error(std::string("unknown set label '") + set_label + "'");
  if (index < 1 || index > 100) throw Error("record index " + std::to_string(index) + " outside 1..100");
  if (expected_length > 0 && samples.size() != expected_length)
    throw Error("wrong length: expected " + std::to_string(expected_length) + " samples, got " +
                std::to_string(samples.size()));
  if (expected_length == 0 && samples.size() < 512)
    throw Error("record shorter than 512 samples");
  return EegRecord{set_label, index, std::move(samples)};
}

EegRecord load_record(const fs::path& path, char set_label, int index) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open record file " + path.string());
  std::vector<double> values;
  values.reserve(kBonnRecordLength);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty()) continue;
    double v = 0.0;
    const char* first = t.data();
    const char* last = t.data() + t.size();
    if (*first == '+') ++first;
    auto [ptr, ec] = std::from_chars(first, last, v);
    if (ec != std::errc() || ptr != last)
      throw Error(path.string() + ":" + std::to_string(line_no) + ": non-numeric sample '" + t + "'");
    values.push_back(v);
  }
  try {
    return make_record(set_label, index, Eigen::Map<Vector<double>>(values.data(), Index(values.size())));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void write_record(const EegRecord& record, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error("cannot write record file " + path.string());
  char buf[32];
  for (Index i = 0; i < record.samples.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g\n", record.samples(i));
    out << buf;
  }
  if (!out) throw Error("failed writing " + path.string());
}

std::map<char, char> default_set_aliases() {
  return {{'Z', 'A'}, {'O', 'B'}, {'N', 'C'}, {'F', 'D'}, {'S', 'E'}};
}

std::vector<EegRecord> load_bonn_directory(const fs::path& root, const std::map<char, char>& aliases) {
  if (!fs::is_directory(root)) throw Error("dataset directory not found: " + root.string());
  std::map<char, fs::path> set_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (!entry.is_directory()) continue;
    const std::string name = entry.path().filename().string();
    if (name.size() != 1) continue;
    const char set = resolve_set(name[0], aliases);
    if (set == '\0') continue;
    if (set_dirs.contains(set)) throw Error("set " + std::string(1, set) + " appears twice under " + root.string());
    set_dirs[set] = entry.path();
  }
  if (set_dirs.empty()) throw Error("no set directories (A-E or Z/O/N/F/S) under " + root.string());

  std::vector<EegRecord> records;
  for (const auto& [set, dir] : set_dirs) {
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(dir))
      if (entry.is_regular_file() && entry.path().filename().string().front() != '.') files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    for (std::size_t i = 0; i < files.size(); ++i) {
      int index = trailing_number(files[i].stem().string());
      if (index == 0) index = static_cast<int>(i) + 1;
      records.push_back(load_record(files[i], set, index));
    }
  }
  return records;
}

std::vector<EegRecord> load_manifest(const fs::path& manifest, const std::map<char, char>& aliases) {
  std::ifstream in(manifest);
  if (!in) throw Error("cannot open manifest " + manifest.string());
  std::map<char, int> next_index;
  std::vector<EegRecord> records;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto comma = t.find(',');
    const std::string letter = comma == std::string::npos ? "" : trim(t.substr(0, comma));
    const char set = letter.size() == 1 ? resolve_set(letter[0], aliases) : '\0';
    if (set == '\0')
      throw Error(manifest.string() + ":" + std::to_string(line_no) + ": expected 'set_letter,path'");
    fs::path p = trim(t.substr(comma + 1));
    if (p.is_relative()) p = manifest.parent_path() / p;
    records.push_back(load_record(p, set, ++next_index[set]));
  }
  return records;
}

std::vector<EegRecord> load_dataset(const fs::path& root) {
  if (fs::is_regular_file(root)) return load_manifest(root);
  return load_bonn_directory(root);
}

// ---------------------------------------------------------------------------

int ExperimentCase::class_of(char set_label) const {
  auto it = class_of_set.find(set_label);
  if (it == class_of_set.end()) throw Error("set " + std::string(1, set_label) + " is not part of case " + name);
  return it->second;
}

std::string ExperimentCase::sets_of_class(int cls) const {
  std::string out;
  for (char c : name)
    if (c != '-' && class_of_set.at(c) == cls) out += c;
  return out;
}

ExperimentCase define_case(std::string_view spec) {
  std::string normalized;
  std::string s(spec);
  for (std::size_t pos; (pos = s.find(" vs ")) != std::string::npos;) s.replace(pos, 4, "-");
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) continue;
    normalized += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  }

  ExperimentCase ec;
  std::vector<std::string> groups(1);
  for (char c : normalized) {
    if (c == '-') {
      groups.emplace_back();
      continue;
    }
    if (!is_set_letter(c)) throw Error("unknown set letter '" + std::string(1, c) + "' in case '" + s + "'");
    groups.back() += c;
  }
  if (groups.size() < 2) throw Error("case '" + s + "' needs at least two groups");
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (groups[g].empty()) throw Error("case '" + s + "' has an empty group");
    for (char c : groups[g]) {
      if (ec.class_of_set.contains(c))
        throw Error("set letter '" + std::string(1, c) + "' appears more than once in case '" + s + "'");
      ec.class_of_set[c] = static_cast<int>(g);
    }
    ec.name += (g ? "-" : "") + groups[g];
  }
  ec.num_classes = static_cast<int>(groups.size());
  return ec;
}

namespace {

struct ReferenceRow {
  const char* name;
  double accuracy;
};

constexpr ReferenceRow kReference[] = {
    {"AB-CD-E", 99.1}, {"AB-CD", 99.9},  {"AB-E", 99.8},   {"A-E", 100.0},   {"B-E", 99.8},  {"CD-E", 99.7},
    {"C-E", 99.1},     {"D-E", 99.4},    {"BCD-E", 99.3},  {"BC-E", 99.5},   {"BD-E", 99.6}, {"AC-E", 99.7},
    {"ABCD-E", 99.7},  {"AB-CDE", 99.5}, {"ABC-E", 99.97}, {"ACD-E", 99.8},
};

}  // namespace

const std::vector<std::string>& standard_cases() {
  static const std::vector<std::string> cases = [] {
    std::vector<std::string> v;
    for (const auto& r : kReference) v.emplace_back(r.name);
    return v;
  }();
  return cases;
}

double reference_accuracy(std::string_view case_name) {
  const std::string canonical = define_case(case_name).name;
  for (const auto& r : kReference)
    if (canonical == r.name) return r.accuracy;
  throw Error("no reference accuracy for case " + canonical);
}

// ---------------------------------------------------------------------------

std::vector<std::string> FoldPlan::test_ids(int fold) const {
  if (fold < 0 || fold >= k) throw Error("fold index out of range");
  std::vector<std::string> ids;
  for (const auto& [stratum, g] : groups) ids.insert(ids.end(), g[fold].begin(), g[fold].end());
  return ids;
}

std::vector<std::string> FoldPlan::train_ids(int fold) const {
  if (fold < 0 || fold >= k) throw Error("fold index out of range");
  std::vector<std::string> ids;
  for (const auto& [stratum, g] : groups)
    for (int f = 0; f < k; ++f)
      if (f != fold) ids.insert(ids.end(), g[f].begin(), g[f].end());
  return ids;
}

FoldPlan plan_folds(const std::map<std::string, std::vector<std::string>>& records_per_stratum, int k, Seed seed) {
  if (k < 2) throw Error("k must be at least 2");
  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  Rng rng(seed);
  for (const auto& [stratum, ids] : records_per_stratum) {
    if (static_cast<int>(ids.size()) < k)
      throw Error("stratum " + stratum + " has " + std::to_string(ids.size()) + " records, fewer than k=" +
                  std::to_string(k));
    std::vector<std::string> shuffled = ids;
    std::sort(shuffled.begin(), shuffled.end());
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    auto& g = plan.groups[stratum];
    g.resize(k);
    const std::size_t n = shuffled.size();
    for (int f = 0; f < k; ++f) {
      const std::size_t begin = n * f / k, end = n * (f + 1) / k;
      g[f].assign(shuffled.begin() + begin, shuffled.begin() + end);
    }
  }
  return plan;
}

std::map<std::string, std::vector<std::string>> strata_for_case(const std::vector<EegRecord>& records,
                                                               const ExperimentCase& ec) {
  std::map<std::string, std::vector<std::string>> strata;
  for (const auto& r : records)
    if (ec.contains(r.set_label)) strata[std::string(1, r.set_label)].push_back(r.id());
  for (const auto& [set, cls] : ec.class_of_set)
    if (!strata.contains(std::string(1, set)))
      throw Error("dataset has no records for set " + std::string(1, set) + " used by case " + ec.name);
  return strata;
}

// ---------------------------------------------------------------------------

std::vector<BandProfile> default_profiles(int classes) {
  static const BandProfile bands[] = {
      {2.0, 4.0, 3, 1.0}, {9.0, 13.0, 3, 1.0}, {20.0, 30.0, 3, 1.0}, {38.0, 46.0, 3, 1.0}, {55.0, 70.0, 3, 1.0},
  };
  if (classes < 2 || classes > 5) throw Error("synthetic datasets support 2 to 5 classes");
  return {bands, bands + classes};
}

std::vector<EegRecord> synthesize_dataset(const SynthesisSpec& spec) {
  if (spec.profiles.size() < 2) throw Error("at least two class profiles are required");
  if (spec.profiles.size() > kSetLetters.size()) throw Error("at most five class profiles are supported");
  if (spec.length <= 0) throw Error("record length must be positive");
  if (spec.length < 512) throw Error("record length must be at least 512");
  if (spec.records_per_class < 1 || spec.records_per_class > 100)
    throw Error("records per class must lie in 1..100");
  if (spec.sample_rate_hz <= 0.0) throw Error("sample rate must be positive");

  Rng rng(spec.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::vector<EegRecord> records;
  for (std::size_t c = 0; c < spec.profiles.size(); ++c) {
    const BandProfile& band = spec.profiles[c];
    if (band.high_hz < band.low_hz || band.low_hz < 0.0 || band.components < 1)
      throw Error("invalid band profile");
    for (int r = 0; r < spec.records_per_class; ++r) {
      Vector<double> x = Vector<double>::Zero(spec.length);
      for (int k = 0; k < band.components; ++k) {
        const double f = band.low_hz + (band.high_hz - band.low_hz) * unit(rng);
        const double phase = 2.0 * std::numbers::pi * unit(rng);
        const double omega = 2.0 * std::numbers::pi * f / spec.sample_rate_hz;
        for (Index i = 0; i < spec.length; ++i) x(i) += band.amplitude * std::sin(omega * double(i) + phase);
      }
      if (spec.noise_level > 0.0)
        for (Index i = 0; i < spec.length; ++i) x(i) += spec.noise_level * gauss(rng);
      records.push_back(make_record(kSetLetters[c], r + 1, std::move(x), 0));
    }
  }
  return records;
}

void write_dataset(const std::vector<EegRecord>& records, const fs::path& dir) {
  for (const auto& r : records) write_record(r, dir / std::string(1, r.set_label) / (r.id() + ".txt"));
}

}  // namespace pyrseiz
