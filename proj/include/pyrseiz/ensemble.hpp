#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "pyrseiz/network.hpp"
#include "pyrseiz/windowing.hpp"

namespace pyrseiz {

struct WindowPrediction {
  int cls = 0;
  Vector<double> probabilities;
};

struct VoteOutcome {
  int cls = 0;
  bool tie_broken = false;
};

/// Result of classifying one test instance.
struct VoteRecord {
  std::string record_id;
  int subsignal = 0;
  int label = 0;
  std::vector<WindowPrediction> votes;
  int final_class = 0;
  bool tie_broken = false;
};

/// Lowest index among the maxima.
int argmax(const Eigen::Ref<const Vector<double>>& probabilities);

WindowPrediction predict_window(const ModelConfig& config, const NetworkParameters<double>& params,
                                const Window& window);

/// Most votes wins; among tied leaders the highest summed probability wins,
/// then the lowest class index. `tie_broken` is set whenever counts alone did
/// not decide.
VoteOutcome majority_vote(std::span<const int> votes, std::span<const Vector<double>> probabilities);

/// Classifies every window of the instance with one copy of the model per
/// window and fuses the decisions. `experts` may hold one parameter set shared
/// by all windows or one per window.
VoteRecord predict_instance(const ModelConfig& config, std::span<const NetworkParameters<double>> experts,
                            const TestInstance& instance, const SchemeSpec& scheme);

VoteRecord predict_instance(const ModelConfig& config, const NetworkParameters<double>& params,
                            const TestInstance& instance, const SchemeSpec& scheme);

/// CSV: record_id,subsignal_index,votes,final,tie_broken (votes joined by '|').
void write_vote_log(std::span<const VoteRecord> records, const std::filesystem::path& path);
std::string vote_log_line(const VoteRecord& record);
inline constexpr const char* kVoteLogHeader = "record_id,subsignal_index,votes,final,tie_broken";

}  // namespace pyrseiz
