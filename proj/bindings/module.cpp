// Python bindings for the core operations: dataset IO and synthesis, encoder
// construction and checkpoints, task-tree encoding, pretraining,
// specialization, and the evaluation protocols.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "tasktree/common.hpp"
#include "tasktree/dataset.hpp"
#include "tasktree/encoder.hpp"
#include "tasktree/eval.hpp"
#include "tasktree/pretrain.hpp"
#include "tasktree/specialize.hpp"
#include "tasktree/synth.hpp"
#include "tasktree/task_tree.hpp"
#include "tasktree/theory.hpp"

namespace py = pybind11;
using namespace tasktree;

namespace {

py::array_t<double> to_numpy(const Matrix& m) {
  py::array_t<double> out({m.rows, m.cols});
  double* dst = out.mutable_data();
  for (size_t i = 0; i < m.a.size(); ++i) dst[i] = m.a[i];
  return out;
}

Matrix from_numpy(const py::array_t<double, py::array::c_style | py::array::forcecast>& arr) {
  if (arr.ndim() != 2) throw ValidationError("expected a 2-d float array");
  Matrix m = Matrix::zeros(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)));
  const double* src = arr.data();
  for (size_t i = 0; i < m.a.size(); ++i) m.a[i] = src[i];
  return m;
}

Activation activation_from(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "identity") return Activation::kIdentity;
  throw ValidationError("unknown activation " + s);
}

}  // namespace

PYBIND11_MODULE(_tasktree, m) {
  m.doc() = "task-tree graph pretraining core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<NumericError>(m, "NumericError", PyExc_ArithmeticError);

  py::class_<TaskInstance>(m, "TaskInstance")
      .def_property_readonly("kind",
                             [](const TaskInstance& t) { return to_string(t.kind); })
      .def_readonly("relevant", &TaskInstance::relevant)
      .def_readonly("label", &TaskInstance::label);

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("name", &Dataset::name)
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_property_readonly("num_nodes",
                             [](const Dataset& d) { return d.graph.num_nodes; })
      .def_property_readonly("num_tasks",
                             [](const Dataset& d) { return d.tasks.size(); })
      .def_property_readonly("tasks", [](const Dataset& d) { return d.tasks; })
      .def("split", [](const Dataset& d, const std::string& name) { return d.split(name); })
      .def_property_readonly("split_names",
                             [](const Dataset& d) {
                               std::vector<std::string> names;
                               for (const auto& [k, v] : d.splits) names.push_back(k);
                               return names;
                             })
      .def_property_readonly("labels",
                             [](const Dataset& d) {
                               std::vector<int> idx(d.tasks.size());
                               for (size_t i = 0; i < idx.size(); ++i)
                                 idx[i] = static_cast<int>(i);
                               return labels_of(d, idx);
                             })
      .def_property_readonly("class_vectors",
                             [](const Dataset& d) -> std::optional<py::array_t<double>> {
                               if (!d.has_class_vectors()) return std::nullopt;
                               return to_numpy(d.class_vectors);
                             })
      .def_property_readonly("features",
                             [](const Dataset& d) { return to_numpy(d.graph.features); });

  py::class_<EncoderParams>(m, "EncoderParams")
      .def_readonly("feature_dim", &EncoderParams::feature_dim)
      .def_readonly("hidden_dim", &EncoderParams::hidden_dim)
      .def_readonly("num_layers", &EncoderParams::num_layers)
      .def_readonly("dropout_rate", &EncoderParams::dropout_rate)
      .def_readonly("tied_weights", &EncoderParams::tied_weights);

  py::class_<EvalReport>(m, "EvalReport")
      .def_readonly("protocol", &EvalReport::protocol)
      .def_readonly("metric", &EvalReport::metric)
      .def_readonly("value", &EvalReport::value)
      .def_readonly("num_tasks", &EvalReport::num_tasks)
      .def_readonly("seed", &EvalReport::seed)
      .def("line", &EvalReport::line)
      .def("__repr__", [](const EvalReport& r) { return "<EvalReport " + r.line() + ">"; });

  m.def("load_dataset", &load_dataset, py::arg("dir"));
  m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("dir"));
  m.def(
      "synth",
      [](const std::string& out_dir, uint64_t seed, int feature_dim, int a_num_nodes,
         int b_num_graphs, int hidden, int layers) {
        SynthParams p;
        p.feature_dim = feature_dim;
        p.a_num_nodes = a_num_nodes;
        p.b_num_graphs = b_num_graphs;
        p.hidden_dim = hidden;
        p.num_layers = layers;
        synth(p, seed, out_dir);
      },
      py::arg("out_dir"), py::arg("seed") = 0, py::arg("feature_dim") = 8,
      py::arg("a_num_nodes") = 200, py::arg("b_num_graphs") = 200,
      py::arg("hidden") = 16, py::arg("layers") = 2);

  m.def(
      "init_params",
      [](int feature_dim, int hidden, int layers, uint64_t seed,
         const std::string& activation, double dropout, bool tied) {
        return init_params(feature_dim, hidden, layers, seed,
                           activation_from(activation), dropout, tied);
      },
      py::arg("feature_dim"), py::arg("hidden"), py::arg("layers"),
      py::arg("seed") = 0, py::arg("activation") = "relu",
      py::arg("dropout") = 0.15, py::arg("tied") = false);
  m.def("save_checkpoint", &save_checkpoint, py::arg("params"), py::arg("path"));
  m.def("load_checkpoint", &load_checkpoint, py::arg("path"));

  m.def(
      "encode_tasks",
      [](const EncoderParams& p, const Dataset& d, bool projected) {
        Matrix z = projected ? encode_task_trees_projected(p, d.graph, d.tasks)
                             : encode_task_trees(p, d.graph, d.tasks);
        return to_numpy(z);
      },
      py::arg("params"), py::arg("dataset"), py::arg("projected") = true);

  m.def(
      "pretrain",
      [](const std::vector<Dataset>& datasets, int epochs, int batch, double lr,
         double weight_decay, double lam, int fanout, uint64_t seed, int hidden,
         int layers, double dropout, const std::string& activation,
         double corruption_edge, double corruption_feature) {
        PretrainConfig pc;
        pc.epochs = epochs;
        pc.batch_size = batch;
        pc.learning_rate = lr;
        pc.weight_decay = weight_decay;
        pc.lambda = lam;
        pc.fanout = fanout;
        pc.seed = seed;
        pc.hidden_dim = hidden;
        pc.num_layers = layers;
        pc.dropout_rate = dropout;
        pc.activation = activation_from(activation);
        CorruptionConfig cc{corruption_edge, corruption_feature};
        PretrainResult res = pretrain(datasets, pc, cc);
        std::vector<std::tuple<double, double, double>> log;
        log.reserve(res.log.size());
        for (const LossBreakdown& l : res.log) log.emplace_back(l.recon, l.kl, l.total);
        return py::make_tuple(res.params, log);
      },
      py::arg("datasets"), py::arg("epochs") = 10, py::arg("batch") = 4096,
      py::arg("lr") = 1e-7, py::arg("weight_decay") = 1e-8, py::arg("lam") = 10.0,
      py::arg("fanout") = 10, py::arg("seed") = 0, py::arg("hidden") = 768,
      py::arg("layers") = 2, py::arg("dropout") = 0.15, py::arg("activation") = "relu",
      py::arg("corruption_edge") = 0.2, py::arg("corruption_feature") = 0.2);

  m.def(
      "specialize",
      [](const EncoderParams& params, const Dataset& data, int epochs, double lr,
         int batch, uint64_t seed) {
        SFTConfig sc{epochs, lr, batch, seed};
        SpecializeResult res = specialize(params, data, sc);
        return py::make_tuple(res.params, res.log);
      },
      py::arg("params"), py::arg("dataset"), py::arg("epochs") = 30,
      py::arg("lr") = 1e-3, py::arg("batch") = 64, py::arg("seed") = 0);

  m.def(
      "finetune",
      [](const EncoderParams& params, const Dataset& data, int epochs, double lr,
         uint64_t seed, int patience) {
        return finetune(params, data, epochs, lr, seed, patience).report;
      },
      py::arg("params"), py::arg("dataset"), py::arg("epochs") = 100,
      py::arg("lr") = 1e-3, py::arg("seed") = 0, py::arg("patience") = -1);
  m.def("in_context", &in_context_eval, py::arg("params"), py::arg("dataset"),
        py::arg("ways") = 5, py::arg("shots") = 3, py::arg("episodes") = 500,
        py::arg("seed") = 0, py::arg("cosine") = false);
  m.def(
      "zero_shot",
      [](const EncoderParams& p, const Dataset& d,
         const std::optional<py::array_t<double, py::array::c_style |
                                                     py::array::forcecast>>& vectors,
         int episodes, int ways, uint64_t seed, bool cosine) {
        Matrix cv = vectors ? from_numpy(*vectors) : d.class_vectors;
        return zero_shot_eval(p, d, cv, episodes, ways, seed, cosine);
      },
      py::arg("params"), py::arg("dataset"), py::arg("class_vectors") = std::nullopt,
      py::arg("episodes") = 500, py::arg("ways") = 5, py::arg("seed") = 0,
      py::arg("cosine") = false);

  m.def(
      "distribution_gap",
      [](const EncoderParams& p, const Dataset& a, const Dataset& b) {
        return distribution_gap(p, a, b).gap;
      },
      py::arg("params"), py::arg("dataset_p"), py::arg("dataset_t"));
}
