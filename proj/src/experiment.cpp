#include "d2i/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "d2i/errors.hpp"
#include "d2i/nn/optimizer.hpp"
#include "d2i/text.hpp"

namespace d2i::exp {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

template <class T>
T enum_from_string(const std::string& s, std::initializer_list<std::pair<const char*, T>> table,
                   const char* what) {
  for (const auto& [name, value] : table) {
    if (s == name) return value;
  }
  throw ConfigError(std::string("unknown ") + what + " '" + s + "'");
}

const char* boundary_name(Boundary b) { return b == Boundary::zero_pad ? "zero" : "circular"; }
const char* normalize_name(Normalize n) {
  switch (n) {
    case Normalize::none: return "none";
    case Normalize::per_image_standardize: return "standardize";
    case Normalize::cosine: return "cosine";
  }
  return "none";
}
const char* resize_name(ResizeMethod m) {
  return m == ResizeMethod::bilinear ? "bilinear" : "crop_or_pad";
}
const char* pair_name(PairEncoding p) { return p == PairEncoding::concat ? "concat" : "single"; }
const char* optimizer_name(OptimizerKind o) { return o == OptimizerKind::adam ? "adam" : "sgd"; }
const char* freeze_name(Freeze f) { return f == Freeze::conv_frozen ? "conv" : "none"; }

void check_keys(const nlohmann::json& j, std::initializer_list<const char*> allowed, const char* where) {
  for (const auto& [key, _] : j.items()) {
    if (std::find_if(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; }) == allowed.end()) {
      throw ConfigError(std::string("unknown config key '") + key + "' in " + where);
    }
  }
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const nlohmann::json& j) {
  ExperimentConfig cfg;
  check_keys(j, {"d2i", "resize", "input", "model", "train", "pair", "seed", "transfer"}, "config");
  if (j.contains("d2i")) {
    const auto& d = j.at("d2i");
    check_keys(d, {"k", "boundary", "drop_zero_rows", "normalize"}, "d2i");
    cfg.d2i.k = d.value("k", cfg.d2i.k);
    if (d.contains("boundary")) {
      cfg.d2i.boundary = enum_from_string<Boundary>(
          d.at("boundary"), {{"zero", Boundary::zero_pad}, {"circular", Boundary::circular}}, "boundary");
    }
    cfg.d2i.drop_zero_rows = d.value("drop_zero_rows", cfg.d2i.drop_zero_rows);
    if (d.contains("normalize")) {
      cfg.d2i.normalize = enum_from_string<Normalize>(d.at("normalize"),
                                                      {{"none", Normalize::none},
                                                       {"standardize", Normalize::per_image_standardize},
                                                       {"cosine", Normalize::cosine}},
                                                      "normalize");
    }
  }
  if (j.contains("resize")) {
    cfg.resize_method = enum_from_string<ResizeMethod>(
        j.at("resize"), {{"bilinear", ResizeMethod::bilinear}, {"crop_or_pad", ResizeMethod::crop_or_pad}},
        "resize method");
  }
  if (j.contains("input")) {
    const auto& in = j.at("input");
    check_keys(in, {"height", "width"}, "input");
    cfg.input_h = in.value("height", cfg.input_h);
    cfg.input_w = in.value("width", cfg.input_w);
  }
  if (j.contains("model")) {
    const auto& m = j.at("model");
    check_keys(m, {"conv1", "conv2", "kernel", "dense", "dropout"}, "model");
    cfg.model.conv1_channels = m.value("conv1", cfg.model.conv1_channels);
    cfg.model.conv2_channels = m.value("conv2", cfg.model.conv2_channels);
    cfg.model.kernel = m.value("kernel", cfg.model.kernel);
    cfg.model.dense_units = m.value("dense", cfg.model.dense_units);
    cfg.model.dropout_rate = m.value("dropout", cfg.model.dropout_rate);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, {"optimizer", "lr", "batch", "epochs", "val_fraction"}, "train");
    if (t.contains("optimizer")) {
      cfg.train.optimizer = enum_from_string<OptimizerKind>(
          t.at("optimizer"), {{"adam", OptimizerKind::adam}, {"sgd", OptimizerKind::sgd}}, "optimizer");
    }
    cfg.train.lr = t.value("lr", cfg.train.lr);
    cfg.train.batch_size = t.value("batch", cfg.train.batch_size);
    cfg.train.epochs = t.value("epochs", cfg.train.epochs);
    cfg.train.val_fraction = t.value("val_fraction", cfg.train.val_fraction);
  }
  if (j.contains("pair")) {
    cfg.pair_encoding = enum_from_string<PairEncoding>(
        j.at("pair"), {{"concat", PairEncoding::concat}, {"single", PairEncoding::single}}, "pair encoding");
  }
  cfg.seed = j.value("seed", cfg.seed);
  if (j.contains("transfer")) {
    const auto& t = j.at("transfer");
    check_keys(t, {"checkpoint", "freeze"}, "transfer");
    TransferConfig tc;
    tc.checkpoint = t.value("checkpoint", std::string());
    if (t.contains("freeze")) {
      tc.freeze = enum_from_string<Freeze>(
          t.at("freeze"), {{"conv", Freeze::conv_frozen}, {"none", Freeze::none}}, "freeze mode");
    }
    cfg.transfer = tc;
  }
  if (cfg.d2i.k < 1) throw ConfigError("config: d2i.k must be >= 1");
  if (cfg.input_h < 1 || cfg.input_w < 1) throw ConfigError("config: input dims must be positive");
  if (cfg.train.batch_size < 1) throw ConfigError("config: train.batch must be >= 1");
  if (cfg.train.epochs < 0) throw ConfigError("config: train.epochs must be >= 0");
  if (cfg.train.val_fraction < 0.0 || cfg.train.val_fraction >= 1.0) {
    throw ConfigError("config: train.val_fraction must lie in [0, 1)");
  }
  return cfg;
}

nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j{{"d2i",
                    {{"k", d2i.k},
                     {"boundary", boundary_name(d2i.boundary)},
                     {"drop_zero_rows", d2i.drop_zero_rows},
                     {"normalize", normalize_name(d2i.normalize)}}},
                   {"resize", resize_name(resize_method)},
                   {"input", {{"height", input_h}, {"width", input_w}}},
                   {"model",
                    {{"conv1", model.conv1_channels},
                     {"conv2", model.conv2_channels},
                     {"kernel", model.kernel},
                     {"dense", model.dense_units},
                     {"dropout", model.dropout_rate}}},
                   {"train",
                    {{"optimizer", optimizer_name(train.optimizer)},
                     {"lr", train.lr},
                     {"batch", train.batch_size},
                     {"epochs", train.epochs},
                     {"val_fraction", train.val_fraction}}},
                   {"pair", pair_name(pair_encoding)},
                   {"seed", seed}};
  if (transfer) {
    j["transfer"] = {{"checkpoint", transfer->checkpoint}, {"freeze", freeze_name(transfer->freeze)}};
  }
  return j;
}

D2IImage encode_example(const PairRecord& rec, const EmbeddingTable& table, const D2IConfig& cfg,
                        PairEncoding encoding) {
  TokenSequence seq = tokenize(rec.text_a, rec.group_id);
  if (encoding == PairEncoding::concat && rec.text_b) {
    TokenSequence tail = tokenize(*rec.text_b);
    seq.tokens.insert(seq.tokens.end(), tail.tokens.begin(), tail.tokens.end());
  }
  if (seq.empty()) {
    // An all-empty text behaves like a fully elided image, not a hard error.
    D2IImage img;
    img.k = cfg.k;
    img.config = cfg;
    img.data.resize(0, 2 * cfg.k);
    return img;
  }
  return transform(seq, table, cfg);
}

int EncodedDataset::num_classes() const {
  int max_label = -1;
  for (int l : labels) max_label = std::max(max_label, l);
  return max_label + 1;
}

EncodedDataset encode_dataset(const PairDataset& ds, const EmbeddingTable& table,
                              const ExperimentConfig& cfg) {
  EncodedDataset out;
  out.height = cfg.input_h;
  out.width = cfg.input_w;
  for (const auto& rec : ds.records) {
    D2IImage img = encode_example(rec, table, cfg.d2i, cfg.pair_encoding);
    if (img.empty()) {
      out.skipped.push_back(rec.group_id);
      continue;
    }
    img = resize(img, cfg.input_h, cfg.input_w, cfg.resize_method);
    std::vector<float> flat(std::size_t(cfg.input_h) * cfg.input_w);
    for (int r = 0; r < cfg.input_h; ++r) {
      for (int c = 0; c < cfg.input_w; ++c) flat[std::size_t(r) * cfg.input_w + c] = float(img.data(r, c));
    }
    out.examples.push_back(std::move(flat));
    out.labels.push_back(rec.label);
    out.group_ids.push_back(rec.group_id);
  }
  return out;
}

EncodedDataset encode_images(const ImageDataset& ds, const ExperimentConfig& cfg) {
  EncodedDataset out;
  out.height = cfg.input_h;
  out.width = cfg.input_w;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    std::vector<float> flat;
    if (ds.height == cfg.input_h && ds.width == cfg.input_w) {
      flat = ds.images[i];
    } else {
      D2IImage img;
      img.data.resize(ds.height, ds.width);
      for (int r = 0; r < ds.height; ++r) {
        for (int c = 0; c < ds.width; ++c) img.data(r, c) = ds.images[i][std::size_t(r) * ds.width + c];
      }
      img = resize(img, cfg.input_h, cfg.input_w, cfg.resize_method);
      flat.resize(std::size_t(cfg.input_h) * cfg.input_w);
      for (int r = 0; r < cfg.input_h; ++r) {
        for (int c = 0; c < cfg.input_w; ++c) flat[std::size_t(r) * cfg.input_w + c] = float(img.data(r, c));
      }
    }
    out.examples.push_back(std::move(flat));
    out.labels.push_back(ds.labels[i]);
    out.group_ids.push_back("img" + std::to_string(i));
  }
  return out;
}

namespace {

nn::Tensor4<float> make_batch(const EncodedDataset& data, const std::vector<std::size_t>& idx,
                              std::size_t begin, std::size_t end, std::vector<int>& labels_out) {
  const int b = static_cast<int>(end - begin);
  nn::Tensor4<float> batch(b, 1, data.height, data.width);
  labels_out.resize(b);
  for (int i = 0; i < b; ++i) {
    const auto& ex = data.examples[idx[begin + i]];
    std::copy(ex.begin(), ex.end(), batch.v.begin() + std::size_t(i) * ex.size());
    labels_out[i] = data.labels[idx[begin + i]];
  }
  return batch;
}

double accuracy_on(nn::Cnn<float>& model, const EncodedDataset& data,
                   const std::vector<std::size_t>& idx, int batch_size) {
  if (idx.empty()) return 0.0;
  std::size_t hits = 0;
  std::vector<int> labels;
  for (std::size_t at = 0; at < idx.size(); at += batch_size) {
    const std::size_t end = std::min(idx.size(), at + batch_size);
    nn::Tensor4<float> batch = make_batch(data, idx, at, end, labels);
    nn::Tensor4<float> probs = model.forward(batch, false);
    for (int i = 0; i < probs.n; ++i) {
      const float* row = probs.v.data() + std::size_t(i) * probs.c;
      const int pred = int(std::max_element(row, row + probs.c) - row);
      hits += pred == labels[i];
    }
  }
  return double(hits) / double(idx.size());
}

}  // namespace

void train_model(nn::Cnn<float>& model, const EncodedDataset& data, const TrainConfig& tcfg,
                 std::uint64_t seed, std::vector<EpochStats>& history) {
  if (data.size() == 0) throw DataError("train: no usable examples (all records skipped?)");

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> indices(data.size());
  for (std::size_t i = 0; i < indices.size(); ++i) indices[i] = i;
  std::shuffle(indices.begin(), indices.end(), rng);

  const std::size_t val_count = std::size_t(tcfg.val_fraction * double(data.size()));
  std::vector<std::size_t> val_idx(indices.begin(), indices.begin() + val_count);
  std::vector<std::size_t> train_idx(indices.begin() + val_count, indices.end());
  if (train_idx.empty()) throw DataError("train: validation split leaves no training data");

  std::unique_ptr<nn::Optimizer<float>> opt;
  if (tcfg.optimizer == OptimizerKind::adam) {
    opt = std::make_unique<nn::Adam<float>>(float(tcfg.lr));
  } else {
    opt = std::make_unique<nn::Sgd<float>>(float(tcfg.lr));
  }
  auto params = model.params();

  double best_val = -1.0;
  std::vector<float> best_params;
  std::uint64_t step = 0;
  std::vector<int> labels;

  for (int epoch = 0; epoch < tcfg.epochs; ++epoch) {
    std::shuffle(train_idx.begin(), train_idx.end(), rng);
    double loss_sum = 0.0;
    std::size_t batches = 0, hits = 0;
    for (std::size_t at = 0; at < train_idx.size(); at += tcfg.batch_size) {
      const std::size_t end = std::min(train_idx.size(), at + std::size_t(tcfg.batch_size));
      nn::Tensor4<float> batch = make_batch(data, train_idx, at, end, labels);
      model.zero_grads();
      loss_sum += model.loss_and_backward(batch, labels, splitmix64(seed ^ (step + 1)));
      opt->step(params);
      ++step;
      ++batches;
      const auto& probs = model.last_probs();
      for (int i = 0; i < probs.n; ++i) {
        const float* row = probs.v.data() + std::size_t(i) * probs.c;
        hits += int(std::max_element(row, row + probs.c) - row) == labels[i];
      }
    }
    EpochStats stats;
    stats.epoch = epoch;
    stats.loss = batches > 0 ? loss_sum / double(batches) : 0.0;
    stats.train_accuracy = train_idx.empty() ? 0.0 : double(hits) / double(train_idx.size());
    if (!val_idx.empty()) {
      stats.val_accuracy = accuracy_on(model, data, val_idx, tcfg.batch_size);
      if (*stats.val_accuracy > best_val) {
        best_val = *stats.val_accuracy;
        best_params = model.flatten_params();
      }
    }
    history.push_back(stats);
  }
  if (!best_params.empty()) model.load_flat_params(best_params);
}

TrainResult train(const ExperimentConfig& cfg, const EncodedDataset& data, const std::string& tag) {
  if (data.size() == 0) throw DataError("train: no usable examples (all records skipped?)");
  const int classes = data.num_classes();
  if (classes < 2) throw DataError("train: need at least two classes, got " + std::to_string(classes));

  nn::Cnn<float> model({1, data.height, data.width},
                       nn::standard_specs(cfg.model.conv1_channels, cfg.model.conv2_channels,
                                          cfg.model.kernel, cfg.model.dense_units,
                                          cfg.model.dropout_rate, classes),
                       cfg.seed);
  TrainResult result{std::move(model), {}, {}, data.skipped, 0, 0};
  train_model(result.model, data, cfg.train, cfg.seed, result.history);
  for (auto* p : result.model.params()) result.trainable_params += p->size();
  result.meta.seed = cfg.seed;
  result.meta.epochs = static_cast<std::uint32_t>(cfg.train.epochs);
  result.meta.dataset_tag = tag;
  return result;
}

EvalReport evaluate(nn::Cnn<float>& model, const EncodedDataset& data, int batch_size) {
  if (data.size() == 0) throw DataError("evaluate: empty dataset");
  const int classes = model.num_classes();
  Eigen::MatrixXd probs(data.size(), classes);
  std::vector<int> preds(data.size());

  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::vector<int> labels;
  for (std::size_t at = 0; at < idx.size(); at += batch_size) {
    const std::size_t end = std::min(idx.size(), at + std::size_t(batch_size));
    nn::Tensor4<float> batch = make_batch(data, idx, at, end, labels);
    nn::Tensor4<float> out = model.forward(batch, false);
    for (int i = 0; i < out.n; ++i) {
      const float* row = out.v.data() + std::size_t(i) * classes;
      for (int c = 0; c < classes; ++c) probs(at + i, c) = row[c];
      preds[at + i] = int(std::max_element(row, row + classes) - row);
    }
  }

  EvalReport report;
  report.accuracy = metrics::accuracy(preds, data.labels);
  report.mse = metrics::mse_labels(probs, data.labels);
  if (classes == 2) {
    // Positive class decided by the 0.5 threshold on its probability; for
    // two classes that coincides with argmax.
    std::vector<int> thresholded(preds.size());
    for (std::size_t i = 0; i < preds.size(); ++i) thresholded[i] = probs(i, 1) >= 0.5 ? 1 : 0;
    report.f1_positive = metrics::f1_binary(thresholded, data.labels);
  }
  if (classes >= 2) {
    std::vector<double> scores(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) scores[i] = probs(i, 1);
    auto mrr = metrics::grouped_mrr(data.group_ids, scores, data.labels);
    report.mrr = mrr.mrr;
    report.groups = std::move(mrr.groups);
  }
  return report;
}

TransferResult transfer_finetune(nn::LoadedCheckpoint& source, const ExperimentConfig& cfg,
                                 const EncodedDataset& train_data, const EncodedDataset& eval_data,
                                 const std::string& tag) {
  const nn::Shape3 in = source.model.input_shape();
  if (in.h != cfg.input_h || in.w != cfg.input_w || in.c != 1) {
    throw ConfigError("transfer: source checkpoint expects " + std::to_string(in.h) + "x" +
                      std::to_string(in.w) + " input but config asks for " +
                      std::to_string(cfg.input_h) + "x" + std::to_string(cfg.input_w));
  }
  const int classes = train_data.num_classes();
  if (classes < 2) throw DataError("transfer: need at least two classes");

  // Rebuild the source model so the caller's copy stays untouched.
  nn::Cnn<float> model(in, source.model.specs(), source.model.init_seed());
  model.load_flat_params(source.model.flatten_params());
  model.replace_head(classes, splitmix64(cfg.seed ^ 0x7472616e73666572ULL));

  const Freeze freeze = cfg.transfer ? cfg.transfer->freeze : Freeze::conv_frozen;
  if (freeze == Freeze::conv_frozen) model.set_conv_trainable(false);

  TransferResult result{TrainResult{std::move(model), {}, {}, train_data.skipped, 0, 0}, {}};
  for (auto* p : result.training.model.params()) {
    (p->trainable ? result.training.trainable_params : result.training.frozen_params) += p->size();
  }
  train_model(result.training.model, train_data, cfg.train, cfg.seed, result.training.history);
  result.training.meta.seed = cfg.seed;
  result.training.meta.epochs = static_cast<std::uint32_t>(cfg.train.epochs);
  result.training.meta.dataset_tag = tag;
  result.metrics = evaluate(result.training.model, eval_data, std::max(64, cfg.train.batch_size));
  return result;
}

nlohmann::json TrainResult::history_json() const {
  nlohmann::json epochs = nlohmann::json::array();
  for (const auto& e : history) {
    nlohmann::json j{{"epoch", e.epoch}, {"loss", e.loss}, {"train_accuracy", e.train_accuracy}};
    if (e.val_accuracy) j["val_accuracy"] = *e.val_accuracy;
    epochs.push_back(std::move(j));
  }
  return {{"epochs", epochs},
          {"skipped_records", skipped},
          {"frozen_params", frozen_params},
          {"trainable_params", trainable_params}};
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json j{{"accuracy", accuracy}, {"mse", mse}};
  j["f1_positive"] = f1_positive ? nlohmann::json(*f1_positive) : nlohmann::json();
  j["mrr"] = mrr ? nlohmann::json(*mrr) : nlohmann::json();
  nlohmann::json groups_json = nlohmann::json::array();
  for (const auto& g : groups) {
    groups_json.push_back({{"group_id", g.group_id},
                           {"size", g.size},
                           {"num_positive", g.num_positive},
                           {"first_positive_rank", g.first_positive_rank}});
  }
  j["groups"] = std::move(groups_json);
  return j;
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  char line[96];
  std::snprintf(line, sizeof(line), "%-12s %10.4f\n", "accuracy", accuracy);
  out << line;
  std::snprintf(line, sizeof(line), "%-12s %10.4f\n", "mse", mse);
  out << line;
  if (f1_positive) {
    std::snprintf(line, sizeof(line), "%-12s %10.4f\n", "f1_positive", *f1_positive);
    out << line;
  }
  if (mrr) {
    std::snprintf(line, sizeof(line), "%-12s %10.4f\n", "mrr", *mrr);
    out << line;
  }
  std::snprintf(line, sizeof(line), "%-12s %10zu\n", "groups", groups.size());
  out << line;
  return out.str();
}

}  // namespace d2i::exp
