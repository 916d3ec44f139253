#include "pyrseiz/ensemble.hpp"

#include <fstream>
#include <map>

namespace pyrseiz {

int argmax(const Eigen::Ref<const Vector<double>>& probabilities) {
  if (probabilities.size() == 0) throw Error("argmax of empty vector");
  Index best = 0;
  for (Index i = 1; i < probabilities.size(); ++i)
    if (probabilities(i) > probabilities(best)) best = i;
  return static_cast<int>(best);
}

WindowPrediction predict_window(const ModelConfig& config, const NetworkParameters<double>& params,
                                const Window& window) {
  Matrix<double> input = window.values;
  const Matrix<double> probs = forward_inference(config, params, input);
  return {argmax(probs.col(0)), probs.col(0)};
}

VoteOutcome majority_vote(std::span<const int> votes, std::span<const Vector<double>> probabilities) {
  if (votes.empty()) throw Error("majority_vote: empty vote list");
  if (!probabilities.empty() && probabilities.size() != votes.size())
    throw Error("majority_vote: vote and probability counts differ");

  std::map<int, int> counts;
  for (int v : votes) ++counts[v];
  int top = 0;
  for (const auto& [cls, n] : counts) top = std::max(top, n);
  std::vector<int> leaders;
  for (const auto& [cls, n] : counts)
    if (n == top) leaders.push_back(cls);  // ascending class order
  if (leaders.size() == 1) return {leaders.front(), false};

  int best = leaders.front();
  if (!probabilities.empty()) {
    auto mass = [&](int cls) {
      double s = 0.0;
      for (const auto& p : probabilities) {
        if (cls < 0 || cls >= p.size()) throw Error("majority_vote: vote outside probability vector");
        s += p(cls);
      }
      return s;
    };
    double best_mass = mass(best);
    for (std::size_t i = 1; i < leaders.size(); ++i) {
      const double m = mass(leaders[i]);
      if (m > best_mass) {
        best = leaders[i];
        best_mass = m;
      }
    }
  }
  return {best, true};
}

VoteRecord predict_instance(const ModelConfig& config, std::span<const NetworkParameters<double>> experts,
                            const TestInstance& instance, const SchemeSpec& scheme) {
  const Index width = scheme.ensemble_width();
  if (static_cast<Index>(instance.windows.size()) != width)
    throw Error("instance has " + std::to_string(instance.windows.size()) + " windows, scheme expects " +
                std::to_string(width));
  if (experts.empty() || (experts.size() != 1 && static_cast<Index>(experts.size()) != width))
    throw Error("expert count must be 1 or the ensemble width");

  VoteRecord r;
  r.record_id = instance.record_id;
  r.subsignal = instance.subsignal;
  r.label = instance.label;
  std::vector<int> classes;
  std::vector<Vector<double>> probs;
  if (experts.size() == 1) {
    const Matrix<double> batch = stack_windows(instance.windows);
    const Matrix<double> p = forward_inference(config, experts.front(), batch);
    for (Index w = 0; w < p.cols(); ++w) r.votes.push_back({argmax(p.col(w)), p.col(w)});
  } else {
    for (Index w = 0; w < width; ++w) r.votes.push_back(predict_window(config, experts[w], instance.windows[w]));
  }
  for (const auto& v : r.votes) {
    classes.push_back(v.cls);
    probs.push_back(v.probabilities);
  }
  const auto outcome = majority_vote(classes, probs);
  r.final_class = outcome.cls;
  r.tie_broken = outcome.tie_broken;
  return r;
}

VoteRecord predict_instance(const ModelConfig& config, const NetworkParameters<double>& params,
                            const TestInstance& instance, const SchemeSpec& scheme) {
  return predict_instance(config, std::span<const NetworkParameters<double>>(&params, 1), instance, scheme);
}

std::string vote_log_line(const VoteRecord& r) {
  std::string votes;
  for (std::size_t i = 0; i < r.votes.size(); ++i) votes += (i ? "|" : "") + std::to_string(r.votes[i].cls);
  return r.record_id + "," + std::to_string(r.subsignal) + "," + votes + "," + std::to_string(r.final_class) + "," +
         (r.tie_broken ? "1" : "0");
}

void write_vote_log(std::span<const VoteRecord> records, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << kVoteLogHeader << '\n';
  for (const auto& r : records) out << vote_log_line(r) << '\n';
  if (!out) throw Error("failed writing " + path.string());
}

}  // namespace pyrseiz
