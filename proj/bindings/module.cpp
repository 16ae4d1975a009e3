#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>

#include "d2i/cli.hpp"
#include "d2i/d2i.hpp"
#include "d2i/embedding.hpp"
#include "d2i/errors.hpp"
#include "d2i/glove.hpp"
#include "d2i/metrics.hpp"
#include "d2i/synth.hpp"
#include "d2i/text.hpp"
#include "d2i/version.hpp"

namespace py = pybind11;

namespace {

d2i::D2IConfig make_config(int k, const std::string& boundary, bool drop_zero_rows,
                           const std::string& normalize) {
  d2i::D2IConfig cfg;
  cfg.k = k;
  if (boundary == "zero") {
    cfg.boundary = d2i::Boundary::zero_pad;
  } else if (boundary == "circular") {
    cfg.boundary = d2i::Boundary::circular;
  } else {
    throw d2i::ConfigError("boundary must be 'zero' or 'circular'");
  }
  cfg.drop_zero_rows = drop_zero_rows;
  if (normalize == "none") {
    cfg.normalize = d2i::Normalize::none;
  } else if (normalize == "standardize") {
    cfg.normalize = d2i::Normalize::per_image_standardize;
  } else if (normalize == "cosine") {
    cfg.normalize = d2i::Normalize::cosine;
  } else {
    throw d2i::ConfigError("normalize must be 'none', 'standardize' or 'cosine'");
  }
  return cfg;
}

d2i::TokenSequence as_sequence(const std::vector<std::string>& tokens) {
  d2i::TokenSequence seq;
  seq.tokens = tokens;
  return seq;
}

py::object json_to_py(const nlohmann::json& j) {
  return py::module_::import("json").attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Banded word-embedding self-attention images, a small CNN engine, "
            "and the embedding-reconstruction bound lab.";
  m.attr("__version__") = d2i::kVersion;

  py::register_exception<d2i::Error>(m, "D2IError");

  m.def(
      "tokenize",
      [](const std::string& text) { return d2i::tokenize(text).tokens; },
      py::arg("text"),
      "Lowercase, split on whitespace, strip edge punctuation per token.");

  py::class_<d2i::EmbeddingTable>(m, "EmbeddingTable")
      .def_static(
          "load",
          [](const std::string& path) {
            std::ifstream in(path, std::ios::binary);
            if (!in) throw d2i::IoError("cannot open: " + path);
            return d2i::parse_embedding_file(in);
          },
          py::arg("path"))
      .def_static(
          "from_dict",
          [](int dim, const std::unordered_map<std::string, std::vector<float>>& entries) {
            return d2i::EmbeddingTable(dim, entries);
          },
          py::arg("dim"), py::arg("entries"))
      .def_property_readonly("dim", &d2i::EmbeddingTable::dim)
      .def("__len__", &d2i::EmbeddingTable::size)
      .def("__contains__", &d2i::EmbeddingTable::contains)
      .def(
          "lookup",
          [](const d2i::EmbeddingTable& t, const std::string& token) { return t.lookup(token); },
          py::arg("token"), "Vector for the token; zeros when unknown.");

  m.def(
      "self_attention",
      [](const std::vector<std::string>& tokens, const d2i::EmbeddingTable& table) {
        return d2i::self_attention_full(as_sequence(tokens), table);
      },
      py::arg("tokens"), py::arg("table"), "Full N x N inner-product matrix.");

  m.def(
      "d2i_image",
      [](const std::vector<std::string>& tokens, const d2i::EmbeddingTable& table, int k,
         const std::string& boundary, bool drop_zero_rows, const std::string& normalize) {
        auto img = d2i::transform(as_sequence(tokens), table, make_config(k, boundary, drop_zero_rows, normalize));
        return py::make_tuple(img.data, img.kept_word_indices);
      },
      py::arg("tokens"), py::arg("table"), py::arg("k") = 25, py::arg("boundary") = "zero",
      py::arg("drop_zero_rows") = true, py::arg("normalize") = "none",
      "Banded self-attention image; returns (matrix, kept_word_indices).");

  m.def(
      "resize",
      [](const Eigen::MatrixXd& data, int height, int width, const std::string& method) {
        d2i::D2IImage img;
        img.data = data;
        img.k = 1;
        const auto m2 = method == "bilinear"      ? d2i::ResizeMethod::bilinear
                        : method == "crop_or_pad" ? d2i::ResizeMethod::crop_or_pad
                                                  : throw d2i::ConfigError("bad resize method");
        return d2i::resize(img, height, width, m2).data;
      },
      py::arg("matrix"), py::arg("height"), py::arg("width"), py::arg("method") = "bilinear");

  m.def(
      "write_pgm",
      [](const Eigen::MatrixXd& data, const std::string& path) {
        d2i::D2IImage img;
        img.data = data;
        img.k = 1;
        const auto bytes = d2i::export_pgm(img);
        std::ofstream out(path, std::ios::binary);
        if (!out) throw d2i::IoError("cannot write: " + path);
        out.write(reinterpret_cast<const char*>(bytes.data()), std::streamsize(bytes.size()));
      },
      py::arg("matrix"), py::arg("path"), "Grayscale PGM with per-image min/max mapping.");

  m.def("f1_binary", &d2i::metrics::f1_binary, py::arg("preds"), py::arg("labels"));
  m.def(
      "grouped_mrr",
      [](const std::vector<std::string>& groups, const std::vector<double>& scores,
         const std::vector<int>& labels) {
        return d2i::metrics::grouped_mrr(groups, scores, labels).mrr;
      },
      py::arg("group_ids"), py::arg("scores"), py::arg("labels"),
      "Mean reciprocal rank over groups with a positive; None when undefined.");
  m.def("mse_labels", &d2i::metrics::mse_labels, py::arg("probs"), py::arg("labels"));

  m.def("glove_weight", &d2i::glove::glove_weight, py::arg("count"), py::arg("x_max") = 10.0,
        py::arg("alpha") = 0.75);

  m.def(
      "verify_bound",
      [](int vocab, long tokens, int window, int dim, int epochs, double lr, double x_max,
         double alpha, std::uint64_t seed) {
        d2i::synth::ZipfCorpusOptions corpus_opts;
        corpus_opts.vocab = vocab;
        corpus_opts.tokens = tokens;
        corpus_opts.seed = seed;
        d2i::glove::GloveTrainOptions train_opts;
        train_opts.dim = dim;
        train_opts.epochs = epochs;
        train_opts.lr = lr;
        train_opts.seed = seed;
        train_opts.x_max = x_max;
        train_opts.alpha = alpha;
        const auto corpus = d2i::synth::zipf_corpus(corpus_opts);
        const auto counts = d2i::glove::count_cooccurrence(corpus, window);
        const auto trained = d2i::glove::train_glove(counts, train_opts);
        auto report = d2i::glove::check_bound(trained.params, counts, x_max).to_json();
        report["training"] = {{"initial_loss", trained.initial_loss},
                              {"final_loss", trained.epoch_loss.back()}};
        return json_to_py(report);
      },
      py::arg("vocab") = 50, py::arg("tokens") = 100000, py::arg("window") = 5, py::arg("dim") = 10,
      py::arg("epochs") = 60, py::arg("lr") = 0.05, py::arg("x_max") = 10.0, py::arg("alpha") = 0.75,
      py::arg("seed") = 0,
      "Run the synthetic-corpus reconstruction-bound lab; returns the report as a dict.");

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) { return d2i::cli::run(args); },
      py::arg("args"), "Invoke the command-line interface; returns its exit code.");
}
