#include "d2i/glove.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "d2i/errors.hpp"

namespace d2i::glove {

int CooccurrenceMatrix::index_of(const std::string& token) const {
  auto it = std::lower_bound(vocab.begin(), vocab.end(), token);
  if (it == vocab.end() || *it != token) return -1;
  return static_cast<int>(it - vocab.begin());
}

CooccurrenceMatrix count_cooccurrence(const std::vector<TokenSequence>& corpus, int window) {
  if (window < 1) throw ConfigError("count_cooccurrence: window must be >= 1");
  CooccurrenceMatrix out;
  out.window = window;

  std::set<std::string> unique;
  for (const auto& doc : corpus) unique.insert(doc.tokens.begin(), doc.tokens.end());
  out.vocab.assign(unique.begin(), unique.end());
  const int v = out.vocab_size();
  out.counts = Eigen::MatrixXd::Zero(v, v);

  for (const auto& doc : corpus) {
    const int n = static_cast<int>(doc.size());
    std::vector<int> ids(n);
    for (int p = 0; p < n; ++p) ids[p] = out.index_of(doc.tokens[p]);
    for (int p = 0; p < n; ++p) {
      const int lo = std::max(0, p - window);
      const int hi = std::min(n - 1, p + window);
      for (int q = lo; q <= hi; ++q) {
        if (q == p || ids[q] == ids[p]) continue;
        out.counts(ids[p], ids[q]) += 1.0;
      }
    }
  }
  return out;
}

double glove_weight(double count, double x_max, double alpha) {
  if (count < 0.0) throw ConfigError("glove_weight: negative count");
  if (count >= x_max) return 1.0;
  return std::pow(count / x_max, alpha);
}

namespace {

std::vector<std::pair<int, int>> nonzero_pairs(const CooccurrenceMatrix& x) {
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < x.vocab_size(); ++i) {
    for (int j = 0; j < x.vocab_size(); ++j) {
      if (x.counts(i, j) > 0.0) pairs.emplace_back(i, j);
    }
  }
  return pairs;
}

std::vector<int> neighborhood(const CooccurrenceMatrix& x, int word) {
  if (word < 0 || word >= x.vocab_size()) throw ConfigError("word index out of range");
  std::vector<int> out;
  for (int j = 0; j < x.vocab_size(); ++j) {
    if (j != word && x.counts(word, j) > 0.0) out.push_back(j);
  }
  return out;
}

}  // namespace

double glove_loss(const CooccurrenceMatrix& x, const GloveParams& params) {
  double loss = 0.0;
  for (int i = 0; i < x.vocab_size(); ++i) {
    for (int j = 0; j < x.vocab_size(); ++j) {
      const double count = x.counts(i, j);
      if (count <= 0.0) continue;
      const double err = params.inner(i, j) + params.bias_pair(i, j) - std::log(count);
      loss += glove_weight(count, params.x_max, params.alpha) * err * err;
    }
  }
  return loss;
}

Eigen::VectorXd glove_loss_gradient(const CooccurrenceMatrix& x, const GloveParams& params) {
  const int v = params.vocab_size();
  const int d = params.dim();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(std::size_t(v) * d + v);
  auto vec_grad = [&](int i) { return grad.segment(std::size_t(i) * d, d); };
  for (int i = 0; i < v; ++i) {
    for (int j = 0; j < v; ++j) {
      const double count = x.counts(i, j);
      if (count <= 0.0) continue;
      const double err = params.inner(i, j) + params.bias_pair(i, j) - std::log(count);
      const double coeff = 2.0 * glove_weight(count, params.x_max, params.alpha) * err;
      vec_grad(i) += coeff * params.vectors.row(j).transpose();
      vec_grad(j) += coeff * params.vectors.row(i).transpose();
      grad[std::size_t(v) * d + i] += coeff;
      grad[std::size_t(v) * d + j] += coeff;
    }
  }
  return grad;
}

GloveTrainResult train_glove(const CooccurrenceMatrix& x, const GloveTrainOptions& opts) {
  if (x.vocab_size() < 2) throw DataError("train_glove: need at least two vocabulary entries");
  if (opts.dim < 1) throw ConfigError("train_glove: dim must be >= 1");
  auto pairs = nonzero_pairs(x);
  if (pairs.empty()) throw DataError("train_glove: no nonzero co-occurrence counts");

  GloveTrainResult result;
  GloveParams& params = result.params;
  params.x_max = opts.x_max;
  params.alpha = opts.alpha;

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> init(0.0, 0.1);
  params.vectors.resize(x.vocab_size(), opts.dim);
  for (int i = 0; i < params.vectors.rows(); ++i) {
    for (int j = 0; j < params.vectors.cols(); ++j) params.vectors(i, j) = init(rng);
  }
  params.biases = Eigen::VectorXd::Zero(x.vocab_size());

  result.initial_loss = glove_loss(x, params);
  const double divergence_cap = result.initial_loss * 10.0;

  Eigen::VectorXd vi_saved(opts.dim);
  for (int epoch = 0; epoch < opts.epochs; ++epoch) {
    std::shuffle(pairs.begin(), pairs.end(), rng);
    for (const auto& [i, j] : pairs) {
      const double count = x.counts(i, j);
      const double err = params.inner(i, j) + params.bias_pair(i, j) - std::log(count);
      const double coeff = 2.0 * glove_weight(count, params.x_max, params.alpha) * err * opts.lr;
      vi_saved = params.vectors.row(i);
      params.vectors.row(i) -= coeff * params.vectors.row(j);
      params.vectors.row(j) -= coeff * vi_saved.transpose();
      params.biases[i] -= coeff;
      params.biases[j] -= coeff;
    }
    const double loss = glove_loss(x, params);
    result.epoch_loss.push_back(loss);
    if (!std::isfinite(loss) || loss > divergence_cap) {
      throw DivergenceError("train_glove: loss diverged at epoch " + std::to_string(epoch) +
                            "; try a smaller learning rate");
    }
  }
  return result;
}

double lle_recon_cost(const GloveParams& params, const CooccurrenceMatrix& x, int word, bool constrained) {
  const auto nbrs = neighborhood(x, word);
  if (nbrs.empty()) throw DataError("lle_recon_cost: empty neighborhood for word " + std::to_string(word));

  if (!constrained) {
    // One free weight already reaches zero residual unless every inner
    // product vanishes, in which case the residual is the constant 1.
    for (int j : nbrs) {
      if (params.inner(word, j) != 0.0) return 0.0;
    }
    return 1.0;
  }

  const double self = params.inner(word, word);
  if (self < 1e-300) throw DataError("lle_recon_cost: degenerate center vector");

  // Classic local LLE solve: G w = 1 over the shifted Gram matrix, then
  // normalize the weights to sum to one. residual = w^T G w.
  const int m = static_cast<int>(nbrs.size());
  Eigen::MatrixXd shifted(m, params.dim());
  for (int a = 0; a < m; ++a) {
    shifted.row(a) = params.vectors.row(word) - params.vectors.row(nbrs[a]);
  }
  Eigen::MatrixXd gram = shifted * shifted.transpose();
  const double trace = gram.trace();
  for (double ridge : {1e-12, 1e-8, 1e-4}) {
    Eigen::MatrixXd reg = gram;
    if (trace > 0.0) reg.diagonal().array() += ridge * trace;
    Eigen::VectorXd w = reg.ldlt().solve(Eigen::VectorXd::Ones(m));
    const double sum = w.sum();
    if (std::abs(sum) < 1e-12 || !w.allFinite()) continue;
    w /= sum;
    const double residual = w.dot(gram * w);
    return std::max(0.0, residual) / self;
  }
  throw DataError("lle_recon_cost: singular neighborhood system for word " + std::to_string(word));
}

WordCost glove_word_cost(const GloveParams& params, const CooccurrenceMatrix& x, int word) {
  const auto nbrs = neighborhood(x, word);
  if (nbrs.empty()) throw DataError("glove_word_cost: empty neighborhood for word " + std::to_string(word));

  WordCost out;
  for (int j : nbrs) {
    const double count = x.counts(word, j);
    const double log_diff = std::log(count) - params.bias_pair(word, j);
    const double err = params.inner(word, j) - log_diff;
    out.j_cost += glove_weight(count, params.x_max, params.alpha) * err * err;
    if (std::abs(log_diff) < 1e-6) {
      ++out.excluded;  // the induced weight 1/log_diff is undefined here
      continue;
    }
    out.c_scale += log_diff * log_diff;
    out.wg.emplace_back(j, 1.0 / log_diff);
  }
  if (out.c_scale < 1e-12) {
    throw DataError("glove_word_cost: degenerate scale for word " + std::to_string(word));
  }
  return out;
}

BoundReport check_bound(const GloveParams& params, const CooccurrenceMatrix& x, double seal_threshold) {
  BoundReport report;
  auto& summary = report.summary;
  summary.words = x.vocab_size();

  int dominance_evaluable = 0;
  int sealed_evaluable = 0;
  int holds_sealed = 0;
  int holds_nonzero = 0;
  int dominance_ok = 0;

  for (int i = 0; i < x.vocab_size(); ++i) {
    BoundRecord rec;
    rec.word = i;
    rec.token = x.vocab[i];
    const auto nbrs = neighborhood(x, i);
    rec.neighborhood = static_cast<int>(nbrs.size());
    if (nbrs.empty()) {
      report.words.push_back(std::move(rec));
      continue;
    }

    for (int j : nbrs) {
      if (params.inner(i, j) != 0.0) rec.has_nonzero_inner = true;
    }
    rec.sealed = std::all_of(nbrs.begin(), nbrs.end(),
                             [&](int j) { return x.counts(i, j) >= seal_threshold; });
    rec.eps_unconstrained = lle_recon_cost(params, x, i, false);
    rec.eps_constrained = lle_recon_cost(params, x, i, true);

    WordCost cost;
    try {
      cost = glove_word_cost(params, x, i);
    } catch (const DataError&) {
      report.words.push_back(std::move(rec));
      continue;
    }
    rec.evaluable = true;
    rec.j_cost = cost.j_cost;
    rec.c_scale = cost.c_scale;
    rec.ratio = cost.j_cost / cost.c_scale;
    rec.excluded_pairs = cost.excluded;
    summary.excluded_pairs += cost.excluded;

    double weighted = 0.0;
    for (const auto& [j, wg] : cost.wg) weighted += wg * params.inner(i, j);
    rec.wg_residual = (1.0 - weighted) * (1.0 - weighted);

    rec.holds_unconstrained = rec.ratio >= rec.eps_unconstrained - 1e-9;
    rec.holds_constrained = rec.ratio >= rec.eps_constrained - 1e-9;
    rec.dominance_holds = !cost.wg.empty() && rec.eps_unconstrained <= rec.wg_residual + 1e-12;

    ++summary.evaluable;
    if (rec.has_nonzero_inner) {
      ++summary.with_nonzero_inner;
      holds_nonzero += rec.holds_unconstrained;
    }
    if (rec.sealed) {
      ++summary.sealed;
      ++sealed_evaluable;
      holds_sealed += rec.holds_constrained;
    }
    if (!cost.wg.empty()) {
      ++dominance_evaluable;
      dominance_ok += rec.dominance_holds;
    }
    report.words.push_back(std::move(rec));
  }

  if (summary.with_nonzero_inner > 0) {
    summary.fraction_unconstrained_holds = double(holds_nonzero) / summary.with_nonzero_inner;
  }
  if (sealed_evaluable > 0) {
    summary.fraction_constrained_holds_sealed = double(holds_sealed) / sealed_evaluable;
  }
  if (dominance_evaluable > 0) {
    summary.fraction_dominance_holds = double(dominance_ok) / dominance_evaluable;
  }
  return report;
}

nlohmann::json BoundReport::to_json() const {
  nlohmann::json words_json = nlohmann::json::array();
  for (const auto& w : words) {
    words_json.push_back({{"word", w.word},
                          {"token", w.token},
                          {"neighborhood", w.neighborhood},
                          {"evaluable", w.evaluable},
                          {"has_nonzero_inner", w.has_nonzero_inner},
                          {"sealed", w.sealed},
                          {"eps_unconstrained", w.eps_unconstrained},
                          {"eps_constrained", w.eps_constrained},
                          {"j_cost", w.j_cost},
                          {"c_scale", w.c_scale},
                          {"ratio", w.ratio},
                          {"wg_residual", w.wg_residual},
                          {"excluded_pairs", w.excluded_pairs},
                          {"holds_unconstrained", w.holds_unconstrained},
                          {"holds_constrained", w.holds_constrained},
                          {"dominance_holds", w.dominance_holds}});
  }
  return {{"summary",
           {{"words", summary.words},
            {"evaluable", summary.evaluable},
            {"with_nonzero_inner", summary.with_nonzero_inner},
            {"sealed", summary.sealed},
            {"excluded_pairs", summary.excluded_pairs},
            {"fraction_unconstrained_holds", summary.fraction_unconstrained_holds},
            {"fraction_constrained_holds_sealed", summary.fraction_constrained_holds_sealed},
            {"fraction_dominance_holds", summary.fraction_dominance_holds}}},
          {"words", words_json}};
}

std::string BoundReport::to_text() const {
  std::ostringstream out;
  char line[160];
  std::snprintf(line, sizeof(line), "%-6s %-12s %5s %6s %12s %12s %12s %6s %6s\n", "word", "token",
                "nbrs", "sealed", "ratio", "eps_unc", "eps_con", "holdU", "holdC");
  out << line;
  for (const auto& w : words) {
    std::snprintf(line, sizeof(line), "%-6d %-12s %5d %6s %12.4e %12.4e %12.4e %6s %6s\n", w.word,
                  w.token.c_str(), w.neighborhood, w.sealed ? "yes" : "no", w.ratio,
                  w.eps_unconstrained, w.eps_constrained, w.holds_unconstrained ? "ok" : "-",
                  w.holds_constrained ? "ok" : "-");
    out << line;
  }
  std::snprintf(line, sizeof(line),
                "words=%d evaluable=%d nonzero_inner=%d sealed=%d excluded_pairs=%d\n", summary.words,
                summary.evaluable, summary.with_nonzero_inner, summary.sealed, summary.excluded_pairs);
  out << line;
  std::snprintf(line, sizeof(line),
                "holds: unconstrained=%.4f constrained_sealed=%.4f dominance=%.4f\n",
                summary.fraction_unconstrained_holds, summary.fraction_constrained_holds_sealed,
                summary.fraction_dominance_holds);
  out << line;
  return out.str();
}

}  // namespace d2i::glove
