#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "d2i/text.hpp"

namespace d2i::glove {

// Directed co-occurrence counts over a symmetric window. Position pairs
// whose tokens are the same vocabulary entry are skipped, which keeps the
// diagonal at zero by construction.
struct CooccurrenceMatrix {
  int window = 0;
  std::vector<std::string> vocab;  // sorted; row/col index == vocab index
  Eigen::MatrixXd counts;          // V x V

  int vocab_size() const { return static_cast<int>(vocab.size()); }
  int index_of(const std::string& token) const;  // -1 when absent
};

CooccurrenceMatrix count_cooccurrence(const std::vector<TokenSequence>& corpus, int window);

// Saturating frequency weight: (x/x_max)^alpha below x_max, exactly 1 above.
double glove_weight(double count, double x_max, double alpha);

struct GloveParams {
  Eigen::MatrixXd vectors;  // V x d, one embedding per row
  Eigen::VectorXd biases;   // V
  double x_max = 10.0;
  double alpha = 0.75;

  int vocab_size() const { return static_cast<int>(vectors.rows()); }
  int dim() const { return static_cast<int>(vectors.cols()); }
  double bias_pair(int i, int j) const { return biases[i] + biases[j]; }
  double inner(int i, int j) const { return vectors.row(i).dot(vectors.row(j)); }
};

struct GloveTrainOptions {
  int dim = 10;
  int epochs = 100;
  double lr = 0.05;
  std::uint64_t seed = 0;
  double x_max = 10.0;
  double alpha = 0.75;
};

struct GloveTrainResult {
  GloveParams params;
  double initial_loss = 0.0;
  std::vector<double> epoch_loss;  // full objective after each epoch
};

// Plain SGD over the shuffled nonzero pairs of the objective
// sum f(X_ij) (v_i.v_j + b_i + b_j - ln X_ij)^2. Deterministic given the
// seed. Throws DivergenceError if the loss exceeds ten times its initial
// value (try a smaller learning rate).
GloveTrainResult train_glove(const CooccurrenceMatrix& x, const GloveTrainOptions& opts);

double glove_loss(const CooccurrenceMatrix& x, const GloveParams& params);

// Full analytic gradient, flat layout [vectors row-major | biases];
// the finite-difference verification surface for the objective.
Eigen::VectorXd glove_loss_gradient(const CooccurrenceMatrix& x, const GloveParams& params);

// Scaled reconstruction cost of word `word` from its co-occurrence
// neighborhood {j : X_ij > 0}. The unconstrained variant treats the
// neighbor weights as fully free, so it is 0 as soon as any neighbor inner
// product is nonzero and 1 otherwise. The constrained variant solves the
// vector least-squares problem with the weights summing to one and scales
// the residual by the center's self inner product. Throws DataError on an
// empty neighborhood.
double lle_recon_cost(const GloveParams& params, const CooccurrenceMatrix& x, int word, bool constrained);

struct WordCost {
  double j_cost = 0.0;   // per-center-word objective at the trained params
  double c_scale = 0.0;  // sum over usable pairs of (ln X_ij - b_ij)^2
  std::vector<std::pair<int, double>> wg;  // neighbor -> 1/(ln X_ij - b_ij)
  int excluded = 0;      // pairs dropped because |ln X_ij - b_ij| < 1e-6
};

// Throws DataError when the neighborhood is empty or c_scale degenerates
// (below 1e-12).
WordCost glove_word_cost(const GloveParams& params, const CooccurrenceMatrix& x, int word);

struct BoundRecord {
  int word = -1;
  std::string token;
  int neighborhood = 0;
  bool evaluable = false;       // nonempty neighborhood and usable scale
  bool has_nonzero_inner = false;
  bool sealed = false;          // every neighbor count >= the seal threshold
  double eps_unconstrained = 0.0;
  double eps_constrained = 0.0;
  double j_cost = 0.0;
  double c_scale = 0.0;
  double ratio = 0.0;           // j_cost / c_scale
  double wg_residual = 0.0;     // (1 - sum_j wg_ij x_ij)^2
  int excluded_pairs = 0;
  bool holds_unconstrained = false;  // ratio >= eps_unconstrained - 1e-9
  bool holds_constrained = false;    // ratio >= eps_constrained - 1e-9
  bool dominance_holds = false;      // eps_unconstrained <= wg_residual + 1e-12
};

struct BoundSummary {
  int words = 0;
  int evaluable = 0;
  int with_nonzero_inner = 0;
  int sealed = 0;
  int excluded_pairs = 0;
  double fraction_unconstrained_holds = 0.0;  // over words with a nonzero inner product
  double fraction_constrained_holds_sealed = 0.0;  // over sealed evaluable words
  double fraction_dominance_holds = 0.0;      // over evaluable words
};

struct BoundReport {
  std::vector<BoundRecord> words;
  BoundSummary summary;

  nlohmann::json to_json() const;
  std::string to_text() const;  // aligned plain-text summary table
};

// Evaluates both reconstruction-cost variants and the trained-cost ratio
// for every word and reports where the ratio dominates them.
BoundReport check_bound(const GloveParams& params, const CooccurrenceMatrix& x, double seal_threshold);

}  // namespace d2i::glove
