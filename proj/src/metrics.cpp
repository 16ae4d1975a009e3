#include "d2i/metrics.hpp"

#include <algorithm>
#include <map>

#include "d2i/errors.hpp"

namespace d2i::metrics {

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) throw ConfigError("accuracy: size mismatch");
  if (preds.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hits += preds[i] == labels[i];
  return double(hits) / double(preds.size());
}

double f1_binary(const std::vector<int>& preds, const std::vector<int>& labels) {
  if (preds.size() != labels.size()) throw ConfigError("f1_binary: size mismatch");
  long tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i] == 1 && labels[i] == 1) ++tp;
    if (preds[i] == 1 && labels[i] != 1) ++fp;
    if (preds[i] != 1 && labels[i] == 1) ++fn;
  }
  const double denom = 2.0 * tp + fp + fn;  // equals P+R denominator folded together
  return denom > 0.0 ? 2.0 * tp / denom : 0.0;
}

double mse_labels(const Eigen::MatrixXd& probs, const std::vector<int>& labels) {
  if (labels.size() != std::size_t(probs.rows())) throw ConfigError("mse_labels: size mismatch");
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (Eigen::Index r = 0; r < probs.rows(); ++r) {
    double row = 0.0;
    for (Eigen::Index c = 0; c < probs.cols(); ++c) {
      const double target = labels[std::size_t(r)] == int(c) ? 1.0 : 0.0;
      const double diff = probs(r, c) - target;
      row += diff * diff;
    }
    total += row / double(probs.cols());
  }
  return total / double(probs.rows());
}

MrrResult grouped_mrr(const std::vector<std::string>& group_ids, const std::vector<double>& scores,
                      const std::vector<int>& labels) {
  if (group_ids.size() != scores.size() || group_ids.size() != labels.size()) {
    throw ConfigError("grouped_mrr: size mismatch");
  }
  // Group members in input order; std::map keeps group output order stable.
  std::map<std::string, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < group_ids.size(); ++i) groups[group_ids[i]].push_back(i);

  MrrResult result;
  double sum = 0.0;
  std::size_t scored_groups = 0;
  for (auto& [gid, members] : groups) {
    std::stable_sort(members.begin(), members.end(),
                     [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
    GroupDiag diag;
    diag.group_id = gid;
    diag.size = static_cast<int>(members.size());
    for (std::size_t rank = 0; rank < members.size(); ++rank) {
      if (labels[members[rank]] == 1) {
        ++diag.num_positive;
        if (diag.first_positive_rank == 0) diag.first_positive_rank = static_cast<int>(rank + 1);
      }
    }
    if (diag.first_positive_rank > 0) {
      sum += 1.0 / diag.first_positive_rank;
      ++scored_groups;
    }
    result.groups.push_back(std::move(diag));
  }
  if (scored_groups > 0) result.mrr = sum / double(scored_groups);
  return result;
}

}  // namespace d2i::metrics
