#include "d2i/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "d2i/d2i.hpp"
#include "d2i/embedding.hpp"
#include "d2i/errors.hpp"
#include "d2i/experiment.hpp"
#include "d2i/glove.hpp"
#include "d2i/mnist.hpp"
#include "d2i/nn/checkpoint.hpp"
#include "d2i/pair_dataset.hpp"
#include "d2i/synth.hpp"
#include "d2i/version.hpp"

namespace d2i::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Flag values shared by the data-driven subcommands. A value counts as
// "set" only when the flag appeared, so config-file values survive.
struct CommonFlags {
  std::string embeddings;
  std::string input;
  std::string test;
  std::string mnist_images;
  std::string mnist_labels;
  std::string config_path;
  std::string checkpoint;
  std::string out_dir = ".";
  int k = 25;
  std::string boundary = "zero";
  std::string normalize = "none";
  std::string pair = "concat";
  std::string freeze = "conv";
  std::uint64_t seed = 0;
  int threads = 0;
};

void add_d2i_flags(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--k", f.k, "Half-window size (image width is 2k)")->check(CLI::PositiveNumber);
  cmd->add_option("--boundary", f.boundary, "Boundary handling")
      ->check(CLI::IsMember({"zero", "circular"}));
  cmd->add_option("--normalize", f.normalize, "Pixel normalization")
      ->check(CLI::IsMember({"none", "standardize", "cosine"}));
  cmd->add_option("--seed", f.seed, "Run seed");
}

std::ifstream open_or_throw(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open: " + path);
  return in;
}

EmbeddingTable load_embeddings(const std::string& path) {
  auto in = open_or_throw(path);
  return parse_embedding_file(in);
}

PairDataset load_tsv(const std::string& path) {
  auto in = open_or_throw(path);
  return parse_pair_tsv(in);
}

ImageDataset load_idx_pair(const std::string& images, const std::string& labels) {
  auto img = open_or_throw(images);
  auto lbl = open_or_throw(labels);
  return load_mnist(img, lbl);
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write: " + path.string());
  out << content;
}

// count() on an option the subcommand never registered would throw.
int flag_count(const CLI::App* cmd, const std::string& name) {
  const CLI::Option* opt = cmd->get_option_no_throw(name);
  return opt ? static_cast<int>(opt->count()) : 0;
}

void write_json_file(const fs::path& path, const json& j) { write_file(path, j.dump(2) + "\n"); }

// Resolved config = config file (when given) overridden by explicit flags.
exp::ExperimentConfig resolve_config(const CLI::App* cmd, const CommonFlags& f,
                                     bool* input_explicit = nullptr) {
  json base = json::object();
  if (!f.config_path.empty()) {
    auto in = open_or_throw(f.config_path);
    try {
      base = json::parse(in);
    } catch (const json::parse_error& e) {
      throw FormatError("config file " + f.config_path + ": " + e.what());
    }
  }
  if (input_explicit) *input_explicit = base.contains("input");
  exp::ExperimentConfig cfg = exp::ExperimentConfig::from_json(base);
  if (flag_count(cmd, "--k")) cfg.d2i.k = f.k;
  if (flag_count(cmd, "--boundary")) {
    cfg.d2i.boundary = f.boundary == "circular" ? Boundary::circular : Boundary::zero_pad;
  }
  if (flag_count(cmd, "--normalize")) {
    cfg.d2i.normalize = f.normalize == "standardize" ? Normalize::per_image_standardize
                        : f.normalize == "cosine"    ? Normalize::cosine
                                                     : Normalize::none;
  }
  if (flag_count(cmd, "--pair")) {
    cfg.pair_encoding = f.pair == "single" ? exp::PairEncoding::single : exp::PairEncoding::concat;
  }
  if (flag_count(cmd, "--seed")) cfg.seed = f.seed;
  return cfg;
}

json manifest_base(const std::string& subcommand, const exp::ExperimentConfig& cfg) {
  return {{"tool", "d2i"},
          {"version", kVersion},
          {"subcommand", subcommand},
          {"seed", cfg.seed},
          {"config", cfg.to_json()}};
}

fs::path prepare_out_dir(const std::string& dir) {
  fs::path p(dir);
  fs::create_directories(p);
  return p;
}

// ---- subcommand bodies ----------------------------------------------------

int run_transform(const CLI::App* cmd, const CommonFlags& f) {
  exp::ExperimentConfig cfg = resolve_config(cmd, f);
  const EmbeddingTable table = load_embeddings(f.embeddings);
  const PairDataset data = load_tsv(f.input);
  const fs::path out = prepare_out_dir(f.out_dir);

  json records = json::array();
  std::size_t written = 0;
  for (std::size_t i = 0; i < data.records.size(); ++i) {
    const auto& rec = data.records[i];
    D2IImage img = exp::encode_example(rec, table, cfg.d2i, cfg.pair_encoding);
    char name[32];
    std::snprintf(name, sizeof(name), "img_%06zu.pgm", i);
    json entry{{"index", i}, {"group_id", rec.group_id}, {"label", rec.label}};
    if (img.empty()) {
      entry["skipped"] = "empty image after elision";
    } else {
      const auto bytes = export_pgm(img);
      std::ofstream file(out / name, std::ios::binary);
      if (!file) throw IoError("cannot write: " + (out / name).string());
      file.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
      entry["file"] = name;
      entry["rows"] = img.data.rows();
      entry["cols"] = img.data.cols();
      ++written;
    }
    records.push_back(std::move(entry));
  }

  json manifest = manifest_base("transform", cfg);
  manifest["inputs"] = {{"embeddings", f.embeddings}, {"input", f.input}};
  manifest["records"] = std::move(records);
  manifest["written"] = written;
  write_json_file(out / "manifest.json", manifest);
  std::cout << "wrote " << written << "/" << data.size() << " images to " << out.string() << "\n";
  return 0;
}

struct LoadedData {
  exp::EncodedDataset train;
  std::optional<exp::EncodedDataset> test;
  std::string tag;
  json inputs;
};

// Text mode wants --embeddings/--input; MNIST mode wants the IDX pair.
// In MNIST mode the input geometry follows the file unless the config set
// it explicitly (in which case encode_images resizes).
LoadedData load_train_data(CommonFlags& f, exp::ExperimentConfig& cfg, bool input_explicit) {
  const bool text_mode = !f.input.empty();
  const bool mnist_mode = !f.mnist_images.empty() || !f.mnist_labels.empty();
  if (text_mode == mnist_mode) {
    throw CLI::ValidationError("data", "give either --input (with --embeddings) or the "
                                       "--mnist-images/--mnist-labels pair");
  }
  LoadedData out;
  if (text_mode) {
    if (f.embeddings.empty()) {
      throw CLI::ValidationError("data", "--input requires --embeddings");
    }
    const EmbeddingTable table = load_embeddings(f.embeddings);
    out.train = exp::encode_dataset(load_tsv(f.input), table, cfg);
    if (!f.test.empty()) out.test = exp::encode_dataset(load_tsv(f.test), table, cfg);
    out.tag = fs::path(f.input).filename().string();
    out.inputs = {{"embeddings", f.embeddings}, {"input", f.input}};
    if (!f.test.empty()) out.inputs["test"] = f.test;
  } else {
    if (f.mnist_images.empty() || f.mnist_labels.empty()) {
      throw CLI::ValidationError("data", "--mnist-images and --mnist-labels go together");
    }
    const ImageDataset ds = load_idx_pair(f.mnist_images, f.mnist_labels);
    if (!input_explicit) {
      cfg.input_h = ds.height;
      cfg.input_w = ds.width;
    }
    out.train = exp::encode_images(ds, cfg);
    out.tag = fs::path(f.mnist_images).filename().string();
    out.inputs = {{"mnist_images", f.mnist_images}, {"mnist_labels", f.mnist_labels}};
  }
  return out;
}

int run_train(const CLI::App* cmd, CommonFlags& f) {
  bool input_explicit = false;
  exp::ExperimentConfig cfg = resolve_config(cmd, f, &input_explicit);
  LoadedData data = load_train_data(f, cfg, input_explicit);
  const fs::path out = prepare_out_dir(f.out_dir);

  exp::TrainResult result = exp::train(cfg, data.train, data.tag);
  const fs::path ckpt_path = f.checkpoint.empty() ? out / "checkpoint.bin" : fs::path(f.checkpoint);
  nn::save_checkpoint(result.model, result.meta, ckpt_path);
  write_json_file(out / "history.json", result.history_json());

  json manifest = manifest_base("train", cfg);
  manifest["inputs"] = data.inputs;
  manifest["outputs"] = {{"checkpoint", f.checkpoint.empty() ? "checkpoint.bin" : f.checkpoint},
                         {"history", "history.json"}};
  if (data.test) {
    exp::EvalReport report = exp::evaluate(result.model, *data.test);
    write_json_file(out / "metrics.json", report.to_json());
    write_file(out / "metrics.txt", report.to_text());
    manifest["outputs"].push_back({"metrics", "metrics.json"});
  }
  write_json_file(out / "manifest.json", manifest);
  std::cout << "trained " << data.train.size() << " examples for " << cfg.train.epochs
            << " epochs; checkpoint at " << ckpt_path.string() << "\n";
  return 0;
}

int run_eval(const CLI::App* cmd, CommonFlags& f) {
  exp::ExperimentConfig cfg = resolve_config(cmd, f);
  nn::LoadedCheckpoint source = nn::load_checkpoint(f.checkpoint);
  cfg.input_h = source.model.input_shape().h;
  cfg.input_w = source.model.input_shape().w;
  LoadedData data = load_train_data(f, cfg, true);
  const fs::path out = prepare_out_dir(f.out_dir);

  exp::EvalReport report = exp::evaluate(source.model, data.train);
  write_json_file(out / "metrics.json", report.to_json());
  write_file(out / "metrics.txt", report.to_text());

  json manifest = manifest_base("eval", cfg);
  manifest["inputs"] = data.inputs;
  manifest["inputs"]["checkpoint"] = f.checkpoint;
  manifest["outputs"] = {{"metrics", "metrics.json"}};
  write_json_file(out / "manifest.json", manifest);
  std::cout << report.to_text();
  return 0;
}

int run_transfer(const CLI::App* cmd, CommonFlags& f) {
  exp::ExperimentConfig cfg = resolve_config(cmd, f);
  nn::LoadedCheckpoint source = nn::load_checkpoint(f.checkpoint);
  cfg.input_h = source.model.input_shape().h;
  cfg.input_w = source.model.input_shape().w;
  cfg.transfer = exp::TransferConfig{
      f.checkpoint, f.freeze == "none" ? exp::Freeze::none : exp::Freeze::conv_frozen};

  LoadedData data = load_train_data(f, cfg, true);
  const fs::path out = prepare_out_dir(f.out_dir);

  const exp::EncodedDataset& eval_data = data.test ? *data.test : data.train;
  exp::TransferResult result = exp::transfer_finetune(source, cfg, data.train, eval_data, data.tag);

  const fs::path ckpt_path = out / "checkpoint.bin";
  nn::save_checkpoint(result.training.model, result.training.meta, ckpt_path);
  write_json_file(out / "history.json", result.training.history_json());
  write_json_file(out / "metrics.json", result.metrics.to_json());
  write_file(out / "metrics.txt", result.metrics.to_text());

  json manifest = manifest_base("transfer", cfg);
  manifest["inputs"] = data.inputs;
  manifest["inputs"]["source_checkpoint"] = f.checkpoint;
  manifest["outputs"] = {{"checkpoint", "checkpoint.bin"},
                         {"history", "history.json"},
                         {"metrics", "metrics.json"}};
  write_json_file(out / "manifest.json", manifest);
  std::cout << result.metrics.to_text();
  return 0;
}

int run_verify_bound(const CLI::App*, const CommonFlags& f, int vocab, long tokens, int window,
                     int dim, int epochs, double lr, double x_max, double alpha) {
  synth::ZipfCorpusOptions corpus_opts;
  corpus_opts.vocab = vocab;
  corpus_opts.tokens = tokens;
  corpus_opts.seed = f.seed;

  glove::GloveTrainOptions train_opts;
  train_opts.dim = dim;
  train_opts.epochs = epochs;
  train_opts.lr = lr;
  train_opts.seed = f.seed;
  train_opts.x_max = x_max;
  train_opts.alpha = alpha;

  const auto corpus = synth::zipf_corpus(corpus_opts);
  const auto counts = glove::count_cooccurrence(corpus, window);
  const auto trained = glove::train_glove(counts, train_opts);
  const auto report = glove::check_bound(trained.params, counts, x_max);

  const fs::path out = prepare_out_dir(f.out_dir);
  write_json_file(out / "bound_report.json", report.to_json());
  write_file(out / "bound_report.txt", report.to_text());

  json manifest{{"tool", "d2i"},
                {"version", kVersion},
                {"subcommand", "verify-bound"},
                {"seed", f.seed},
                {"config",
                 {{"vocab", vocab},
                  {"tokens", tokens},
                  {"window", window},
                  {"dim", dim},
                  {"epochs", epochs},
                  {"lr", lr},
                  {"x_max", x_max},
                  {"alpha", alpha}}},
                {"training",
                 {{"initial_loss", trained.initial_loss},
                  {"final_loss", trained.epoch_loss.back()},
                  {"reduction", 1.0 - trained.epoch_loss.back() / trained.initial_loss}}},
                {"outputs", {"bound_report.json", "bound_report.txt"}}};
  write_json_file(out / "manifest.json", manifest);
  std::cout << report.to_text();
  return 0;
}

int run_export_image(const CLI::App* cmd, const CommonFlags& f, const std::string& text,
                     const std::string& out_file) {
  exp::ExperimentConfig cfg = resolve_config(cmd, f);
  const EmbeddingTable table = load_embeddings(f.embeddings);

  std::string doc = text;
  if (doc.empty()) {
    auto in = open_or_throw(f.input);
    std::ostringstream buf;
    buf << in.rdbuf();
    doc = buf.str();
  }
  const TokenSequence seq = tokenize(doc, "export");
  if (seq.empty()) throw DataError("export-image: no tokens in input");
  D2IImage img = transform(seq, table, cfg.d2i);
  if (img.empty()) throw DataError("export-image: image empty after elision");

  const fs::path out_path = out_file.empty() ? fs::path(f.out_dir) / "image.pgm" : fs::path(out_file);
  if (out_path.has_parent_path()) fs::create_directories(out_path.parent_path());
  const auto bytes = export_pgm(img);
  std::ofstream file(out_path, std::ios::binary);
  if (!file) throw IoError("cannot write: " + out_path.string());
  file.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));

  json manifest = manifest_base("export-image", cfg);
  manifest["inputs"] = {{"embeddings", f.embeddings}};
  if (!f.input.empty()) manifest["inputs"]["input"] = f.input;
  manifest["outputs"] = {{"image", out_path.filename().string()},
                         {"rows", img.data.rows()},
                         {"cols", img.data.cols()}};
  write_json_file((out_path.has_parent_path() ? out_path.parent_path() : fs::path(".")) /
                      "manifest.json",
                  manifest);
  std::cout << "wrote " << out_path.string() << " (" << img.data.rows() << "x" << img.data.cols()
            << ")\n";
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"document-to-image text classification toolkit"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonFlags f;
  std::string export_text, export_out;
  int vocab = 50, window = 5, dim = 10, glove_epochs = 60;
  long tokens = 100000;
  double lr = 0.05, x_max = 10.0, alpha = 0.75;

  auto* transform = app.add_subcommand("transform", "Convert a TSV of documents into PGM images");
  transform->add_option("--embeddings", f.embeddings, "Embedding file")->required();
  transform->add_option("--input", f.input, "Pair TSV")->required();
  transform->add_option("--out-dir", f.out_dir, "Output directory");
  transform->add_option("--pair", f.pair, "Pair encoding")->check(CLI::IsMember({"concat", "single"}));
  transform->add_option("--config", f.config_path, "JSON config file");
  add_d2i_flags(transform, f);

  auto* train = app.add_subcommand("train", "Train the five-layer network");
  train->add_option("--embeddings", f.embeddings, "Embedding file");
  train->add_option("--input", f.input, "Training pair TSV");
  train->add_option("--test", f.test, "Held-out pair TSV for metrics");
  train->add_option("--mnist-images", f.mnist_images, "IDX image file");
  train->add_option("--mnist-labels", f.mnist_labels, "IDX label file");
  train->add_option("--config", f.config_path, "JSON config file");
  train->add_option("--checkpoint", f.checkpoint, "Checkpoint output path");
  train->add_option("--out-dir", f.out_dir, "Output directory");
  train->add_option("--pair", f.pair, "Pair encoding")->check(CLI::IsMember({"concat", "single"}));
  add_d2i_flags(train, f);

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint");
  eval->add_option("--checkpoint", f.checkpoint, "Checkpoint path")->required();
  eval->add_option("--embeddings", f.embeddings, "Embedding file");
  eval->add_option("--input", f.input, "Pair TSV to score");
  eval->add_option("--mnist-images", f.mnist_images, "IDX image file");
  eval->add_option("--mnist-labels", f.mnist_labels, "IDX label file");
  eval->add_option("--config", f.config_path, "JSON config file");
  eval->add_option("--out-dir", f.out_dir, "Output directory");
  eval->add_option("--pair", f.pair, "Pair encoding")->check(CLI::IsMember({"concat", "single"}));
  add_d2i_flags(eval, f);

  auto* transfer = app.add_subcommand("transfer", "Fine-tune a pretrained checkpoint");
  transfer->add_option("--checkpoint", f.checkpoint, "Source checkpoint")->required();
  transfer->add_option("--embeddings", f.embeddings, "Embedding file");
  transfer->add_option("--input", f.input, "Fine-tuning pair TSV");
  transfer->add_option("--test", f.test, "Held-out pair TSV for metrics");
  transfer->add_option("--mnist-images", f.mnist_images, "IDX image file");
  transfer->add_option("--mnist-labels", f.mnist_labels, "IDX label file");
  transfer->add_option("--freeze", f.freeze, "Freeze mode")->check(CLI::IsMember({"conv", "none"}));
  transfer->add_option("--config", f.config_path, "JSON config file");
  transfer->add_option("--out-dir", f.out_dir, "Output directory");
  transfer->add_option("--pair", f.pair, "Pair encoding")->check(CLI::IsMember({"concat", "single"}));
  add_d2i_flags(transfer, f);

  auto* verify = app.add_subcommand("verify-bound", "Numerically exercise the reconstruction bound");
  verify->add_option("--vocab", vocab, "Synthetic vocabulary size")->check(CLI::PositiveNumber);
  verify->add_option("--tokens", tokens, "Synthetic corpus length")->check(CLI::PositiveNumber);
  verify->add_option("--window", window, "Co-occurrence window")->check(CLI::PositiveNumber);
  verify->add_option("--dim", dim, "Embedding dimension")->check(CLI::PositiveNumber);
  verify->add_option("--epochs", glove_epochs, "Training epochs")->check(CLI::PositiveNumber);
  verify->add_option("--lr", lr, "Learning rate");
  verify->add_option("--x-max", x_max, "Weighting saturation point");
  verify->add_option("--alpha", alpha, "Weighting exponent");
  verify->add_option("--seed", f.seed, "Run seed");
  verify->add_option("--out-dir", f.out_dir, "Output directory");

  auto* export_img = app.add_subcommand("export-image", "Transform one document to a PGM");
  export_img->add_option("--embeddings", f.embeddings, "Embedding file")->required();
  export_img->add_option("--input", f.input, "Plain-text file (one document)");
  export_img->add_option("--text", export_text, "Inline document text");
  export_img->add_option("--out", export_out, "Output PGM path");
  export_img->add_option("--out-dir", f.out_dir, "Output directory");
  export_img->add_option("--config", f.config_path, "JSON config file");
  add_d2i_flags(export_img, f);

  std::vector<char*> argv;
  std::vector<std::string> storage = args;
  std::string prog = "d2i";
  argv.push_back(prog.data());
  for (auto& a : storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
    if (*transform) return run_transform(transform, f);
    if (*train) return run_train(train, f);
    if (*eval) return run_eval(eval, f);
    if (*transfer) return run_transfer(transfer, f);
    if (*verify) {
      return run_verify_bound(verify, f, vocab, tokens, window, dim, glove_epochs, lr, x_max, alpha);
    }
    if (*export_img) {
      if (f.input.empty() == export_text.empty()) {
        throw CLI::ValidationError("export-image", "give exactly one of --input or --text");
      }
      return run_export_image(export_img, f, export_text, export_out);
    }
    return 1;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help/usage text
    return code == 0 ? 0 : 1;
  } catch (const DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

}  // namespace d2i::cli
