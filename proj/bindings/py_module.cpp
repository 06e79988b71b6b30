#include <pybind11/functional.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "timedit/attention.hpp"
#include "timedit/baseline.hpp"
#include "timedit/checkpoint.hpp"
#include "timedit/debias.hpp"
#include "timedit/edit.hpp"
#include "timedit/errors.hpp"
#include "timedit/eval.hpp"
#include "timedit/linalg.hpp"
#include "timedit/tensor_store.hpp"
#include "timedit/version.hpp"

namespace py = pybind11;
using namespace timedit;

namespace {

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& array) {
  if (array.ndim() != 2) throw py::value_error("expected a 2-D array");
  Matrix m(static_cast<std::size_t>(array.shape(0)), static_cast<std::size_t>(array.shape(1)));
  const auto view = array.unchecked<2>();
  for (py::ssize_t i = 0; i < array.shape(0); ++i)
    for (py::ssize_t j = 0; j < array.shape(1); ++j)
      m(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = view(i, j);
  return m;
}

py::array_t<double> from_matrix(const Matrix& m) {
  py::array_t<double> array({m.rows(), m.cols()});
  auto view = array.mutable_unchecked<2>();
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j)
      view(static_cast<py::ssize_t>(i), static_cast<py::ssize_t>(j)) = m(i, j);
  return array;
}

std::vector<Vec> to_vectors(const py::array_t<double, py::array::c_style | py::array::forcecast>& array) {
  const Matrix m = to_matrix(array);
  std::vector<Vec> rows;
  rows.reserve(m.rows());
  for (std::size_t i = 0; i < m.rows(); ++i) {
    Vec row(m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) row[j] = m(i, j);
    rows.push_back(std::move(row));
  }
  return rows;
}

RidgeProblem make_problem(const py::array_t<double, py::array::c_style | py::array::forcecast>& original,
                          const py::array_t<double, py::array::c_style | py::array::forcecast>& inputs,
                          const py::array_t<double, py::array::c_style | py::array::forcecast>& targets,
                          double lambda) {
  RidgeProblem problem;
  problem.original = to_matrix(original);
  problem.inputs = to_vectors(inputs);
  problem.targets = to_vectors(targets);
  problem.lambda = lambda;
  return problem;
}

EmbeddingSequence make_sequence(const std::vector<std::string>& tokens,
                                const py::array_t<double, py::array::c_style | py::array::forcecast>& rows) {
  EmbeddingSequence seq;
  seq.tokens = tokens;
  seq.embeddings = to_vectors(rows);
  seq.validate();
  return seq;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Closed-form editing of cross-attention key/value projections";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "TimeditError");

  // linear algebra ------------------------------------------------------
  m.def(
      "spd_solve",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& b) {
        return from_matrix(spd_solve(to_matrix(a), to_matrix(b)));
      },
      py::arg("a"), py::arg("b"),
      "Solve A X = B for symmetric positive-definite A via Cholesky.");

  m.def(
      "ridge_closed_form",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& original,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& inputs,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& targets,
         double lam) {
        return from_matrix(ridge_closed_form(make_problem(original, inputs, targets, lam)));
      },
      py::arg("original"), py::arg("inputs"), py::arg("targets"), py::arg("lam"),
      "Unique minimizer of the regularized projection objective. Rows of "
      "'inputs'/'targets' are the paired vectors.");

  m.def(
      "ridge_loss",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& original,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& inputs,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& targets,
         double lam,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& candidate) {
        return ridge_loss(make_problem(original, inputs, targets, lam), to_matrix(candidate));
      },
      py::arg("original"), py::arg("inputs"), py::arg("targets"), py::arg("lam"),
      py::arg("candidate"));

  m.def(
      "gd_minimize",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& original,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& inputs,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& targets,
         double lam, double learning_rate, int iterations, double weight_decay,
         double convergence_tolerance) {
        OptimizerConfig config;
        config.learning_rate = learning_rate;
        config.iterations = iterations;
        config.weight_decay = weight_decay;
        config.convergence_tolerance = convergence_tolerance;
        const RidgeProblem problem = make_problem(original, inputs, targets, lam);
        const GdResult result = gd_minimize(problem, config, problem.original);
        return py::make_tuple(from_matrix(result.solution), result.final_loss,
                              result.iterations_used);
      },
      py::arg("original"), py::arg("inputs"), py::arg("targets"), py::arg("lam"),
      py::arg("learning_rate") = 0.0, py::arg("iterations") = 10000,
      py::arg("weight_decay") = 0.0, py::arg("convergence_tolerance") = 1e-10,
      "Gradient-descent oracle for the same objective; returns (solution, "
      "loss, iterations). learning_rate <= 0 selects a safe step.");

  // edit engine ---------------------------------------------------------
  m.def(
      "align_tokens",
      [](const std::vector<std::string>& source, const std::vector<std::string>& destination) {
        EmbeddingSequence src, dst;
        src.tokens = source;
        dst.tokens = destination;
        src.embeddings.assign(source.size(), Vec{0.0});
        dst.embeddings.assign(destination.size(), Vec{0.0});
        return align_tokens(src, dst).pairs;
      },
      py::arg("source_tokens"), py::arg("destination_tokens"),
      "Greedy in-order token alignment; returns (source, destination) index pairs.");

  m.def(
      "edit_layer",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& w_k,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& w_v,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& source_vectors,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& destination_vectors,
         double lam) {
        LayerWeights layer;
        layer.w_k = to_matrix(w_k);
        layer.w_v = to_matrix(w_v);
        EditContext context;
        context.source_vectors = to_vectors(source_vectors);
        context.destination_vectors = to_vectors(destination_vectors);
        context.lambda = lam;
        const LayerWeights edited = edit_layer(layer, context);
        return py::make_tuple(from_matrix(edited.w_k), from_matrix(edited.w_v));
      },
      py::arg("w_k"), py::arg("w_v"), py::arg("source_vectors"), py::arg("destination_vectors"),
      py::arg("lam"),
      "Edit one layer: targets come from the original projections applied to "
      "the destination vectors; returns (w_k', w_v').");

  // attention simulator -------------------------------------------------
  m.def(
      "attention_map",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& queries,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& keys) {
        return from_matrix(attention_map(to_matrix(queries), to_matrix(keys)));
      },
      py::arg("queries"), py::arg("keys"));

  m.def(
      "attention_output",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& map,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& values) {
        return from_matrix(attention_output(to_matrix(map), to_matrix(values)));
      },
      py::arg("map"), py::arg("values"));

  m.def(
      "generate_feature",
      [](const std::vector<std::pair<py::array_t<double, py::array::c_style | py::array::forcecast>,
                                     py::array_t<double, py::array::c_style | py::array::forcecast>>>& layers,
         const std::vector<std::string>& tokens,
         const py::array_t<double, py::array::c_style | py::array::forcecast>& embeddings,
         std::size_t query_count, std::uint64_t seed) {
        ModelWeights model;
        for (const auto& [w_k, w_v] : layers) {
          LayerWeights layer;
          layer.w_k = to_matrix(w_k);
          layer.w_v = to_matrix(w_v);
          model.layers.push_back(std::move(layer));
        }
        const EmbeddingSequence prompt = make_sequence(tokens, embeddings);
        AttentionConfig config;
        if (!model.layers.empty()) {
          config.key_dim = model.layers.front().w_k.rows();
          config.value_dim = model.layers.front().w_v.rows();
          config.embed_dim = model.layers.front().w_k.cols();
        }
        config.query_count = query_count;
        return generate_feature(model, prompt, config, seed);
      },
      py::arg("layers"), py::arg("tokens"), py::arg("embeddings"), py::arg("query_count") = 8,
      py::arg("seed") = 0,
      "Seeded mean-pooled attention output over [(w_k, w_v), ...] layers.");

  m.def(
      "classify",
      [](const Vec& feature, const Vec& reference_a, const Vec& reference_b) {
        return classify(feature, reference_a, reference_b) == Choice::A ? "a" : "b";
      },
      py::arg("feature"), py::arg("reference_a"), py::arg("reference_b"),
      "Nearest reference by cosine similarity ('a' or 'b'; ties pick 'a').");

  // metrics -------------------------------------------------------------
  m.def("harmonic_mean", &harmonic_mean, py::arg("generality"), py::arg("specificity"));
  m.def("delta_p", &delta_p, py::arg("female_fraction_percent"),
        "|F_p - 50| / 50 for a percentage in [0, 100].");

  m.def(
      "search_lambda",
      [](const std::function<double(double)>& oracle, double lambda_low, double lambda_high,
         int max_iterations, double tolerance, int samples_per_probe) {
        SearchConfig config;
        config.lambda_low = lambda_low;
        config.lambda_high = lambda_high;
        config.max_iterations = max_iterations;
        config.tolerance = tolerance;
        config.samples_per_probe = samples_per_probe;
        config.oracle = oracle;
        const SearchResult result = search_lambda(config);
        py::dict out;
        out["lambda"] = result.lambda_p;
        out["fraction"] = result.achieved.female_fraction;
        out["converged"] = result.converged;
        out["non_monotone_warning"] = result.non_monotone_warning;
        out["iterations"] = result.iterations_used;
        return out;
      },
      py::arg("oracle"), py::arg("lambda_low") = 1e-4, py::arg("lambda_high") = 1e8,
      py::arg("max_iterations") = 30, py::arg("tolerance") = 0.1,
      py::arg("samples_per_probe") = 1,
      "Bisection in log10(lambda) against an oracle mapping lambda to a "
      "percentage assumed non-increasing in lambda; targets 50.");

  // tensor container ----------------------------------------------------
  m.def(
      "load_tensors",
      [](const std::string& path) {
        const TensorFile file = load_tensor_file(path);
        py::dict out;
        for (const TensorHeaderEntry& entry : file.entries()) {
          if (entry.shape.size() != 2) continue;  // matrices only on this surface
          out[py::str(entry.name)] = from_matrix(read_matrix(file, entry.name));
        }
        return out;
      },
      py::arg("path"), "Load every rank-2 tensor of a .safetensors file as float64 arrays.");

  m.def(
      "save_tensors",
      [](const std::string& path, const py::dict& tensors, const std::string& dtype) {
        Dtype d;
        if (dtype == "F32")
          d = Dtype::F32;
        else if (dtype == "F64")
          d = Dtype::F64;
        else
          fail(ErrorCode::UnsupportedDtype, "dtype '" + dtype + "'");
        std::map<std::string, Matrix> matrices;
        for (const auto& item : tensors)
          matrices[item.first.cast<std::string>()] =
              to_matrix(item.second.cast<
                        py::array_t<double, py::array::c_style | py::array::forcecast>>());
        write_file_bytes(path, write_file(matrices, d));
      },
      py::arg("path"), py::arg("tensors"), py::arg("dtype") = "F32",
      "Write named 2-D arrays as a canonical .safetensors file.");
}
