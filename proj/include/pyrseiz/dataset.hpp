#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "pyrseiz/types.hpp"

namespace pyrseiz {

inline constexpr Index kBonnRecordLength = 4097;
inline constexpr std::string_view kSetLetters = "ABCDE";

/// One single-channel EEG recording.
struct EegRecord {
  char set_label = 'A';
  int index = 1;
  Vector<double> samples;

  /// Stable identifier such as "A007".
  std::string id() const;
};

/// Builds a record after checking the label, index and sample count.
/// `expected_length` of 0 accepts any length of at least 512 samples.
EegRecord make_record(char set_label, int index, Vector<double> samples,
                      Index expected_length = kBonnRecordLength);

/// Reads a Bonn text file: one decimal number per line, exactly 4097 lines.
EegRecord load_record(const std::filesystem::path& path, char set_label, int index);

/// Writes one sample per line with 17 significant digits.
void write_record(const EegRecord& record, const std::filesystem::path& path);

/// Default archive aliases: Z->A, O->B, N->C, F->D, S->E.
std::map<char, char> default_set_aliases();

/// Loads a directory with one subdirectory per set, named by set letter or
/// alias (case-insensitive). Files within a set are taken in lexicographic
/// order; the record index is the trailing number in the file stem when
/// present, else the 1-based position.
std::vector<EegRecord> load_bonn_directory(const std::filesystem::path& root,
                                           const std::map<char, char>& aliases = default_set_aliases());

/// Loads records listed in a manifest of `set_letter,path` lines. Relative
/// paths resolve against the manifest's directory. Blank lines and lines
/// starting with '#' are skipped.
std::vector<EegRecord> load_manifest(const std::filesystem::path& manifest,
                                     const std::map<char, char>& aliases = default_set_aliases());

/// Loads from `root` as a manifest file or a set directory.
std::vector<EegRecord> load_dataset(const std::filesystem::path& root);

// ---------------------------------------------------------------------------
// Experiment cases
// ---------------------------------------------------------------------------

struct ExperimentCase {
  std::string name;                 // canonical form, e.g. "AB-CD-E"
  std::map<char, int> class_of_set;
  int num_classes = 0;

  bool contains(char set_label) const { return class_of_set.contains(set_label); }
  int class_of(char set_label) const;
  /// Set letters of one class, in spec order.
  std::string sets_of_class(int cls) const;
};

/// Parses groups of set letters separated by '-' ("AB-CD-E"). Group position
/// is the class index. Lower-case letters and the separator " vs " are accepted.
ExperimentCase define_case(std::string_view spec);

/// The sixteen standard experiment cases, ternary case first.
const std::vector<std::string>& standard_cases();

/// Reference accuracies (percent, after voting) paired with standard_cases().
double reference_accuracy(std::string_view case_name);

// ---------------------------------------------------------------------------
// Folds
// ---------------------------------------------------------------------------

/// Stratified k-fold partition. Each stratum (normally a set letter) is
/// shuffled with the seed and sliced into k near-equal groups.
struct FoldPlan {
  int k = 10;
  Seed seed = 0;
  std::map<std::string, std::vector<std::vector<std::string>>> groups;

  std::vector<std::string> test_ids(int fold) const;
  std::vector<std::string> train_ids(int fold) const;
};

FoldPlan plan_folds(const std::map<std::string, std::vector<std::string>>& records_per_stratum, int k, Seed seed);

/// Strata keyed by set letter for every record the case uses.
std::map<std::string, std::vector<std::string>> strata_for_case(const std::vector<EegRecord>& records,
                                                               const ExperimentCase& ec);

// ---------------------------------------------------------------------------
// Synthetic data
// ---------------------------------------------------------------------------

/// Frequency band of one synthetic class.
struct BandProfile {
  double low_hz = 1.0;
  double high_hz = 4.0;
  int components = 3;
  double amplitude = 1.0;
};

struct SynthesisSpec {
  int records_per_class = 20;
  std::vector<BandProfile> profiles;
  Index length = kBonnRecordLength;
  double noise_level = 0.3;
  double sample_rate_hz = 173.61;
  Seed seed = 1;
};

/// The first `classes` of five well-separated bands: 2-4, 9-13, 20-30, 38-46
/// and 55-70 Hz.
std::vector<BandProfile> default_profiles(int classes);

/// Each record is a sum of sinusoids with frequencies drawn from its class's
/// band, random phases and white Gaussian noise. Class i is labelled with set
/// letter 'A' + i.
std::vector<EegRecord> synthesize_dataset(const SynthesisSpec& spec);

/// Writes records as <dir>/<set>/<id>.txt.
void write_dataset(const std::vector<EegRecord>& records, const std::filesystem::path& dir);

}  // namespace pyrseiz
