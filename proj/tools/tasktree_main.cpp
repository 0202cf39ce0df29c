// Command-line driver: pretrain / specialize / eval / verify / bench / synth.
// Settings come from an optional "key = value" config file; the flags below
// override file values.  Exit codes: 0 success, 1 validation failure,
// 2 numeric failure, 64 usage error (unknown flag, missing file).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "tasktree/bench.hpp"
#include "tasktree/common.hpp"
#include "tasktree/config.hpp"
#include "tasktree/dataset.hpp"
#include "tasktree/encoder.hpp"
#include "tasktree/eval.hpp"
#include "tasktree/pretrain.hpp"
#include "tasktree/specialize.hpp"
#include "tasktree/synth.hpp"
#include "tasktree/theory.hpp"

namespace fs = std::filesystem;
using namespace tasktree;

namespace {

constexpr int kExitValidation = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitUsage = 64;

// Missing files and absent required settings are usage errors (exit 64),
// distinct from malformed-content validation errors (exit 1).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> split_csv(const std::string& s) {
  std::vector<std::string> out;
  size_t start = 0;
  while (start <= s.size()) {
    size_t comma = s.find(',', start);
    if (comma == std::string::npos) comma = s.size();
    std::string part = s.substr(start, comma - start);
    size_t b = part.find_first_not_of(" \t");
    size_t e = part.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(part.substr(b, e - b + 1));
    start = comma + 1;
  }
  return out;
}

std::vector<std::string> dataset_dirs(const Config& cfg) {
  std::string list = cfg.get_str("datasets", cfg.get_str("dataset", ""));
  std::vector<std::string> dirs = split_csv(list);
  if (dirs.empty()) throw UsageError("no dataset configured (key: dataset or datasets)");
  for (const std::string& d : dirs)
    if (!fs::exists(d)) throw UsageError("missing dataset directory " + d);
  return dirs;
}

std::string require_out(const Config& cfg, const std::string& command) {
  std::string out = cfg.get_str("out", "");
  if (out.empty()) throw UsageError(command + " requires --out");
  return out;
}

std::string require_checkpoint(const Config& cfg) {
  std::string ck = cfg.get_str("checkpoint", "");
  if (ck.empty()) throw UsageError("no checkpoint configured (key: checkpoint)");
  if (!fs::exists(ck)) throw UsageError("missing checkpoint file " + ck);
  return ck;
}

Activation activation_from(const std::string& s) {
  if (s == "relu") return Activation::kRelu;
  if (s == "identity") return Activation::kIdentity;
  throw ValidationError("config error: unknown activation " + s);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("load error: cannot write " + path);
  out << text;
}

void echo_config(const std::vector<std::pair<std::string, std::string>>& kv) {
  for (const auto& [k, v] : kv) std::cout << "config " << k << " = " << v << "\n";
}

// ---------------------------------------------------------------------------

int run_pretrain(const Config& cfg) {
  std::string out = require_out(cfg, "pretrain");
  std::vector<Dataset> datasets;
  for (const std::string& dir : dataset_dirs(cfg)) datasets.push_back(load_dataset(dir));

  PretrainConfig pc;
  pc.epochs = static_cast<int>(cfg.get_int("epochs", pc.epochs));
  pc.batch_size = static_cast<int>(cfg.get_int("batch", pc.batch_size));
  pc.learning_rate = cfg.get_double("lr", pc.learning_rate);
  pc.weight_decay = cfg.get_double("wd", pc.weight_decay);
  pc.lambda = cfg.get_double("lambda", pc.lambda);
  pc.fanout = static_cast<int>(cfg.get_int("fanout", pc.fanout));
  pc.seed = cfg.get_u64("seed", 0);
  pc.hidden_dim = static_cast<int>(cfg.get_int("hidden", pc.hidden_dim));
  pc.num_layers = static_cast<int>(cfg.get_int("layers", pc.num_layers));
  pc.dropout_rate = cfg.get_double("dropout", pc.dropout_rate);
  pc.activation = activation_from(cfg.get_str("activation", "relu"));
  CorruptionConfig cc;
  cc.edge_drop_rate = cfg.get_double("corruption_edge", cc.edge_drop_rate);
  cc.feature_mask_rate = cfg.get_double("corruption_feature", cc.feature_mask_rate);

  echo_config({{"epochs", std::to_string(pc.epochs)},
               {"batch", std::to_string(pc.batch_size)},
               {"lr", fmt_g(pc.learning_rate)},
               {"wd", fmt_g(pc.weight_decay)},
               {"lambda", fmt_g(pc.lambda)},
               {"fanout", std::to_string(pc.fanout)},
               {"seed", std::to_string(pc.seed)},
               {"hidden", std::to_string(pc.hidden_dim)},
               {"layers", std::to_string(pc.num_layers)},
               {"dropout", fmt_g(pc.dropout_rate)},
               {"corruption_edge", fmt_g(cc.edge_drop_rate)},
               {"corruption_feature", fmt_g(cc.feature_mask_rate)}});

  PretrainResult res = pretrain(datasets, pc, cc);
  fs::create_directories(out);
  save_checkpoint(res.params, out + "/checkpoint.bin");
  std::string log;
  for (size_t e = 0; e < res.log.size(); ++e)
    log += std::to_string(e + 1) + " " + fmt_g(res.log[e].recon) + " " +
           fmt_g(res.log[e].kl) + " " + fmt_g(res.log[e].total) + "\n";
  write_text(out + "/pretrain_log.txt", log);
  std::cout << log;
  std::cout << "checkpoint " << out << "/checkpoint.bin\n";
  return 0;
}

int run_specialize(const Config& cfg) {
  std::string out = require_out(cfg, "specialize");
  EncoderParams params = load_checkpoint(require_checkpoint(cfg));
  Dataset data = load_dataset(dataset_dirs(cfg).front());

  SFTConfig sc;
  sc.epochs = static_cast<int>(cfg.get_int("epochs", sc.epochs));
  sc.learning_rate = cfg.get_double("lr", sc.learning_rate);
  sc.batch_size = static_cast<int>(cfg.get_int("batch", sc.batch_size));
  sc.seed = cfg.get_u64("seed", 0);

  SpecializeResult res = specialize(params, data, sc);
  fs::create_directories(out);
  save_checkpoint(res.params, out + "/checkpoint.bin");
  std::string log;
  for (size_t e = 0; e < res.log.size(); ++e)
    log += std::to_string(e + 1) + " " + fmt_g(res.log[e]) + "\n";
  write_text(out + "/sft_log.txt", log);
  std::cout << log;
  std::cout << "checkpoint " << out << "/checkpoint.bin\n";
  return 0;
}

int run_eval(const Config& cfg) {
  EncoderParams params = load_checkpoint(require_checkpoint(cfg));
  Dataset data = load_dataset(dataset_dirs(cfg).front());
  std::string protocol = cfg.get_str("protocol", "finetune");
  uint64_t seed = cfg.get_u64("seed", 0);

  EvalReport report;
  if (protocol == "finetune") {
    report = finetune(params, data, static_cast<int>(cfg.get_int("epochs", 100)),
                      cfg.get_double("lr", 1e-3), seed,
                      static_cast<int>(cfg.get_int("patience", -1)))
                 .report;
  } else if (protocol == "incontext") {
    report = in_context_eval(params, data, static_cast<int>(cfg.get_int("ways", 5)),
                             static_cast<int>(cfg.get_int("shots", 3)),
                             static_cast<int>(cfg.get_int("tasks", 500)), seed);
  } else if (protocol == "zeroshot") {
    if (!data.has_class_vectors())
      throw ValidationError("config error: zeroshot needs class_vectors.txt");
    report = zero_shot_eval(params, data, data.class_vectors,
                            static_cast<int>(cfg.get_int("tasks", 500)),
                            static_cast<int>(cfg.get_int("ways", 5)), seed);
  } else if (protocol == "linkpred") {
    FinetuneResult ft = finetune(params, data,
                                 static_cast<int>(cfg.get_int("epochs", 100)),
                                 cfg.get_double("lr", 1e-3), seed,
                                 static_cast<int>(cfg.get_int("patience", -1)));
    report = link_prediction_auc(ft.params, ft.head_w, ft.head_b, data, seed);
  } else {
    throw ValidationError("config error: unknown protocol " + protocol);
  }

  std::cout << report.line() << "\n";
  std::string out = cfg.get_str("out", "");
  if (!out.empty()) {
    fs::create_directories(out);
    write_text(out + "/eval_report.txt", report.line() + "\n");
  }
  return 0;
}

// Randomized stability trials: small random graph pairs, tied 1-Lipschitz
// encoders, random task kinds, depth drawn from {1,2,3}.
int run_verify_stability(const Config& cfg) {
  int trials = static_cast<int>(cfg.get_int("trials", 100));
  uint64_t seed = cfg.get_u64("seed", 0);
  if (trials < 1) throw ValidationError("config error: trials must be >= 1");

  auto random_graph = [](RngStream& rng, int dim) {
    int n = 3 + static_cast<int>(rng.uniform_int(10));
    Matrix feats = Matrix::zeros(n, dim);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < dim; ++j) feats(i, j) = rng.normal();
    std::vector<std::pair<int, int>> edges;
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v)
        if (rng.uniform() < 0.35) edges.emplace_back(u, v);
    return build_graph(n, edges, std::move(feats));
  };
  auto random_task = [](RngStream& rng, const Graph& g) {
    TaskInstance t;
    switch (rng.uniform_int(3)) {
      case 0:
        t.kind = TaskKind::kNode;
        t.relevant = {static_cast<int>(rng.uniform_int(g.num_nodes))};
        break;
      case 1: {
        t.kind = TaskKind::kEdge;
        int u = static_cast<int>(rng.uniform_int(g.num_nodes));
        int v = static_cast<int>(rng.uniform_int(g.num_nodes));
        while (g.num_nodes > 1 && v == u)
          v = static_cast<int>(rng.uniform_int(g.num_nodes));
        t.relevant = {u, v};
        break;
      }
      default:
        t.kind = TaskKind::kGraph;
        t.relevant.resize(g.num_nodes);
        for (int i = 0; i < g.num_nodes; ++i) t.relevant[i] = i;
        break;
    }
    t.label = 0;
    return t;
  };

  constexpr int kDim = 4;
  int violations = 0;
  std::cout << "trial depth delta pairwise_bound global_bound chain\n";
  for (int t = 0; t < trials; ++t) {
    RngStream rng = substream(seed, "trials", static_cast<uint64_t>(t));
    int depth = 1 + static_cast<int>(rng.uniform_int(3));
    Graph g1 = random_graph(rng, kDim);
    Graph g2 = random_graph(rng, kDim);
    TaskInstance t1 = random_task(rng, g1);
    TaskInstance t2 = random_task(rng, g2);
    EncoderParams params =
        init_params(kDim, kDim, depth, derive_seed(seed, "init", t),
                    Activation::kRelu, /*dropout_rate=*/0.0, /*tied_weights=*/true);
    StabilityReport rep = stability_check(g1, t1, g2, t2, params, depth);
    bool ok = rep.chain_ok();
    violations += ok ? 0 : 1;
    std::cout << t << " " << depth << " " << fmt_g(rep.delta) << " "
              << fmt_g(rep.pairwise_bound) << " " << fmt_g(rep.global_bound) << " "
              << (ok ? "ok" : "VIOLATED") << "\n";
  }
  std::cout << "violations " << violations << " / " << trials << "\n";
  return violations == 0 ? 0 : kExitValidation;
}

// Loads the configured datasets, or falls back to the in-memory synthetic
// two-domain benchmark so the suites run out of the box.
std::pair<Dataset, Dataset> two_domains(const Config& cfg, uint64_t seed) {
  std::string list = cfg.get_str("datasets", cfg.get_str("dataset", ""));
  std::vector<std::string> dirs = split_csv(list);
  if (dirs.size() >= 2) {
    for (const std::string& d : dirs)
      if (!fs::exists(d)) throw UsageError("missing dataset directory " + d);
    return {load_dataset(dirs[0]), load_dataset(dirs[1])};
  }
  SynthParams sp;
  sp.hidden_dim = static_cast<int>(cfg.get_int("hidden", sp.hidden_dim));
  sp.num_layers = static_cast<int>(cfg.get_int("layers", sp.num_layers));
  return {make_domain_a(sp, seed), make_domain_b(sp, seed)};
}

EncoderParams params_for(const Config& cfg, const Dataset& d, uint64_t seed,
                         const std::string& stream) {
  std::string ck = cfg.get_str("checkpoint", "");
  if (!ck.empty()) {
    if (!fs::exists(ck)) throw UsageError("missing checkpoint file " + ck);
    return load_checkpoint(ck);
  }
  return init_params(d.graph.feature_dim(),
                     static_cast<int>(cfg.get_int("hidden", 16)),
                     static_cast<int>(cfg.get_int("layers", 2)),
                     derive_seed(seed, stream), Activation::kRelu,
                     /*dropout_rate=*/0.0);
}

int run_verify(const Config& cfg) {
  std::string suite = cfg.get_str("suite", "stability");
  uint64_t seed = cfg.get_u64("seed", 0);
  if (suite == "stability") return run_verify_stability(cfg);
  if (suite == "transfer") {
    auto [a, b] = two_domains(cfg, seed);
    EncoderParams pa = params_for(cfg, a, seed, "probe-a");
    EncoderParams pb = init_params(a.graph.feature_dim(), pa.hidden_dim,
                                   pa.num_layers, derive_seed(seed, "probe-b"),
                                   Activation::kRelu, 0.0);
    TransferProbeReport rep = transfer_probe(pa, pb, a, b, seed);
    std::cout << rep.lines();
    return 0;
  }
  if (suite == "gap") {
    auto [a, b] = two_domains(cfg, seed);
    EncoderParams p = params_for(cfg, a, seed, "probe-a");
    std::cout << distribution_gap(p, a, b).lines();
    return 0;
  }
  throw ValidationError("config error: unknown suite " + suite);
}

int run_bench_cmd(const Config& cfg) {
  BenchConfig bc;
  bc.reps = static_cast<int>(cfg.get_int("trials", bc.reps));
  bc.batch_size = static_cast<int>(cfg.get_int("batch", bc.batch_size));
  bc.hops = static_cast<int>(cfg.get_int("hops", bc.hops));
  bc.seed = cfg.get_u64("seed", 0);

  Dataset data;
  std::string list = cfg.get_str("datasets", cfg.get_str("dataset", ""));
  if (!list.empty()) {
    data = load_dataset(dataset_dirs(cfg).front());
  } else {
    data = make_bench_dataset(static_cast<int>(cfg.get_int("nodes", 5000)),
                              bc.batch_size,
                              static_cast<int>(cfg.get_int("feature_dim", 8)),
                              bc.seed);
  }
  EncoderParams params = init_params(
      data.graph.feature_dim(), static_cast<int>(cfg.get_int("hidden", 16)),
      static_cast<int>(cfg.get_int("layers", 2)), derive_seed(bc.seed, "init"),
      Activation::kRelu, /*dropout_rate=*/0.0);

  BenchReport rep = run_bench(data, params, bc);
  std::cout << rep.lines();
  std::string out = cfg.get_str("out", "");
  if (!out.empty()) {
    fs::create_directories(out);
    write_text(out + "/bench_report.txt", rep.lines());
  }
  return 0;
}

int run_synth(const Config& cfg) {
  std::string out = require_out(cfg, "synth");
  SynthParams sp;
  sp.feature_dim = static_cast<int>(cfg.get_int("feature_dim", sp.feature_dim));
  sp.a_num_nodes = static_cast<int>(cfg.get_int("a_num_nodes", sp.a_num_nodes));
  sp.a_num_classes = static_cast<int>(cfg.get_int("a_num_classes", sp.a_num_classes));
  sp.a_separation = cfg.get_double("a_separation", sp.a_separation);
  sp.a_intra_edge_prob = cfg.get_double("a_intra_edge_prob", sp.a_intra_edge_prob);
  sp.a_inter_edge_prob = cfg.get_double("a_inter_edge_prob", sp.a_inter_edge_prob);
  sp.b_num_graphs = static_cast<int>(cfg.get_int("b_num_graphs", sp.b_num_graphs));
  sp.b_min_nodes = static_cast<int>(cfg.get_int("b_min_nodes", sp.b_min_nodes));
  sp.b_max_nodes = static_cast<int>(cfg.get_int("b_max_nodes", sp.b_max_nodes));
  sp.b_feature_noise = cfg.get_double("b_feature_noise", sp.b_feature_noise);
  sp.hidden_dim = static_cast<int>(cfg.get_int("hidden", sp.hidden_dim));
  sp.num_layers = static_cast<int>(cfg.get_int("layers", sp.num_layers));

  synth(sp, cfg.get_u64("seed", 0), out);
  std::cout << "wrote " << out << "/domain_a and " << out << "/domain_b\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"task-tree graph pretraining toolkit"};
  app.require_subcommand(1);

  std::string config_path, out_dir, protocol, suite;
  uint64_t seed = 0;
  int ways = 0, shots = 0, tasks = 0, trials = 0, hidden = 0, layers = 0, epochs = 0;
  double lambda = 0.0, lr = 0.0;

  auto* o_config = app.add_option("--config", config_path, "config file (key = value)");
  auto* o_seed = app.add_option("--seed", seed, "root random seed");
  auto* o_out = app.add_option("--out", out_dir, "output directory");
  auto* o_protocol = app.add_option("--protocol", protocol, "evaluation protocol")
                         ->check(CLI::IsMember({"finetune", "incontext", "zeroshot",
                                                "linkpred"}));
  auto* o_ways = app.add_option("--ways", ways, "episode ways");
  auto* o_shots = app.add_option("--shots", shots, "support shots per class");
  auto* o_tasks = app.add_option("--tasks", tasks, "episode count");
  auto* o_trials = app.add_option("--trials", trials, "verify trials / bench reps");
  auto* o_suite = app.add_option("--suite", suite, "verify suite")
                      ->check(CLI::IsMember({"stability", "transfer", "gap"}));
  auto* o_lambda = app.add_option("--lambda", lambda, "regularizer weight");
  auto* o_hidden = app.add_option("--hidden", hidden, "hidden dimension");
  auto* o_layers = app.add_option("--layers", layers, "encoder layers");
  auto* o_epochs = app.add_option("--epochs", epochs, "training epochs");
  auto* o_lr = app.add_option("--lr", lr, "learning rate");

  for (const char* name : {"pretrain", "specialize", "eval", "verify", "bench", "synth"})
    app.add_subcommand(name)->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    Config cfg;
    if (*o_config) {
      if (!fs::exists(config_path))
        throw UsageError("missing config file " + config_path);
      cfg = Config::load(config_path);
    }
    if (*o_seed) cfg.set("seed", std::to_string(seed));
    if (*o_out) cfg.set("out", out_dir);
    if (*o_protocol) cfg.set("protocol", protocol);
    if (*o_ways) cfg.set("ways", std::to_string(ways));
    if (*o_shots) cfg.set("shots", std::to_string(shots));
    if (*o_tasks) cfg.set("tasks", std::to_string(tasks));
    if (*o_trials) cfg.set("trials", std::to_string(trials));
    if (*o_suite) cfg.set("suite", suite);
    if (*o_lambda) cfg.set("lambda", fmt_g(lambda));
    if (*o_hidden) cfg.set("hidden", std::to_string(hidden));
    if (*o_layers) cfg.set("layers", std::to_string(layers));
    if (*o_epochs) cfg.set("epochs", std::to_string(epochs));
    if (*o_lr) cfg.set("lr", fmt_g(lr));

    const std::string cmd = app.get_subcommands().front()->get_name();
    if (cmd == "pretrain") return run_pretrain(cfg);
    if (cmd == "specialize") return run_specialize(cfg);
    if (cmd == "eval") return run_eval(cfg);
    if (cmd == "verify") return run_verify(cfg);
    if (cmd == "bench") return run_bench_cmd(cfg);
    return run_synth(cfg);
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
