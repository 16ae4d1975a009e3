#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

namespace d2i::metrics {

double accuracy(const std::vector<int>& preds, const std::vector<int>& labels);

// F1 on the positive class (label 1): 2PR/(P+R), 0 when P+R is 0.
double f1_binary(const std::vector<int>& preds, const std::vector<int>& labels);

// Mean over examples of the per-class mean squared error between the
// probability row and the one-hot label.
double mse_labels(const Eigen::MatrixXd& probs, const std::vector<int>& labels);

struct GroupDiag {
  std::string group_id;
  int size = 0;
  int num_positive = 0;
  int first_positive_rank = 0;  // 1-based; 0 when the group has no positive
};

struct MrrResult {
  std::optional<double> mrr;  // absent when no group has a positive
  std::vector<GroupDiag> groups;
};

// Grouped mean reciprocal rank: candidates are ranked within each group_id
// by score descending (ties keep input order); groups with at least one
// positive label contribute 1/rank-of-first-positive, the rest are skipped.
MrrResult grouped_mrr(const std::vector<std::string>& group_ids, const std::vector<double>& scores,
                      const std::vector<int>& labels);

}  // namespace d2i::metrics
