#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "d2i/d2i.hpp"
#include "d2i/embedding.hpp"
#include "d2i/metrics.hpp"
#include "d2i/mnist.hpp"
#include "d2i/nn/checkpoint.hpp"
#include "d2i/nn/model.hpp"
#include "d2i/pair_dataset.hpp"

namespace d2i::exp {

enum class PairEncoding { concat, single };
enum class OptimizerKind { adam, sgd };
enum class Freeze { conv_frozen, none };

struct ModelConfig {
  int conv1_channels = 32;
  int conv2_channels = 64;
  int kernel = 5;
  int dense_units = 1024;
  float dropout_rate = 0.4f;
};

struct TrainConfig {
  OptimizerKind optimizer = OptimizerKind::adam;
  double lr = 1e-3;
  int batch_size = 32;
  int epochs = 10;
  double val_fraction = 0.0;  // > 0 holds out a seeded validation split
};

struct TransferConfig {
  std::string checkpoint;
  Freeze freeze = Freeze::conv_frozen;
};

struct ExperimentConfig {
  D2IConfig d2i;
  ResizeMethod resize_method = ResizeMethod::bilinear;
  int input_h = 50;
  int input_w = 50;  // 2k for the default k=25
  ModelConfig model;
  TrainConfig train;
  PairEncoding pair_encoding = PairEncoding::concat;
  std::uint64_t seed = 0;
  std::optional<TransferConfig> transfer;

  // Unknown keys are rejected so a typo cannot silently fall back to a
  // default. to_json emits every resolved value (the manifest payload).
  static ExperimentConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

// Sentence pair -> one token sequence (concat joins text_a then text_b,
// single ignores text_b) -> banded transform. No resizing here.
D2IImage encode_example(const PairRecord& rec, const EmbeddingTable& table, const D2IConfig& cfg,
                        PairEncoding encoding);

// Text records encoded, resized to the configured input geometry and kept
// alongside labels/groups. Records whose image came back empty are skipped
// and listed by group_id.
struct EncodedDataset {
  int height = 0, width = 0;
  std::vector<std::vector<float>> examples;  // flat h*w per example
  std::vector<int> labels;
  std::vector<std::string> group_ids;
  std::vector<std::string> skipped;

  std::size_t size() const { return examples.size(); }
  int num_classes() const;
};

EncodedDataset encode_dataset(const PairDataset& ds, const EmbeddingTable& table,
                              const ExperimentConfig& cfg);
EncodedDataset encode_images(const ImageDataset& ds, const ExperimentConfig& cfg);

struct EpochStats {
  int epoch = 0;
  double loss = 0.0;
  double train_accuracy = 0.0;
  std::optional<double> val_accuracy;
};

struct TrainResult {
  nn::Cnn<float> model;
  nn::CheckpointMeta meta;
  std::vector<EpochStats> history;
  std::vector<std::string> skipped;
  std::size_t frozen_params = 0;
  std::size_t trainable_params = 0;

  nlohmann::json history_json() const;
};

// Fresh model trained on the encoded data. Deterministic given (seed,
// config, data); throws DataError when every record was skipped or fewer
// than two classes are present.
TrainResult train(const ExperimentConfig& cfg, const EncodedDataset& data, const std::string& tag);

// Continues training an existing model (the transfer path shares this).
void train_model(nn::Cnn<float>& model, const EncodedDataset& data, const TrainConfig& tcfg,
                 std::uint64_t seed, std::vector<EpochStats>& history);

struct EvalReport {
  double accuracy = 0.0;
  double mse = 0.0;
  std::optional<double> f1_positive;  // binary tasks only
  std::optional<double> mrr;          // grouped tasks with >= 1 positive
  std::vector<metrics::GroupDiag> groups;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

EvalReport evaluate(nn::Cnn<float>& model, const EncodedDataset& data, int batch_size = 64);

// Loads the source checkpoint, swaps the classifier head for the new class
// count, optionally freezes the conv stack, fine-tunes and reports. The
// source input geometry must match the config. Frozen tensors stay bitwise
// identical.
struct TransferResult {
  TrainResult training;
  EvalReport metrics;
};

TransferResult transfer_finetune(nn::LoadedCheckpoint& source, const ExperimentConfig& cfg,
                                 const EncodedDataset& train_data, const EncodedDataset& eval_data,
                                 const std::string& tag);

}  // namespace d2i::exp
