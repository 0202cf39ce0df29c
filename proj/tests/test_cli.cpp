#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include "doctest.h"
#include "tasktree/dataset.hpp"
#include "tasktree/encoder.hpp"
#include "tasktree/graph.hpp"
#include "tasktree/matrix.hpp"
#include "tasktree/task_tree.hpp"
#include "test_util.hpp"

using namespace tasktree;

namespace {

// End-to-end driver tests: every case shells out to the installed binary and
// checks exit codes and emitted files, never internal state.
struct CliRun {
  int exit_code = -1;
  std::string out, err;
};

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

CliRun run_cli(const testutil::TempDir& tmp, const std::string& args) {
  static int counter = 0;
  std::string base = tmp.str() + "/run" + std::to_string(counter++);
  std::string cmd = std::string(TASKTREE_CLI_PATH) + " " + args + " > '" + base +
                    ".out' 2> '" + base + ".err'";
  int raw = std::system(cmd.c_str());
  CliRun r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(base + ".out");
  r.err = slurp(base + ".err");
  return r;
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

bool contains(const std::string& hay, const std::string& needle) {
  return hay.find(needle) != std::string::npos;
}

}  // namespace

TEST_CASE("usage errors exit with 64") {
  testutil::TempDir tmp("cli-usage");

  CliRun r = run_cli(tmp, "--bogus-flag pretrain");
  CHECK(r.exit_code == 64);
  CHECK(contains(r.err, "usage error:"));

  CHECK(run_cli(tmp, "").exit_code == 64);                       // no subcommand
  CHECK(run_cli(tmp, "eval --protocol weird").exit_code == 64);  // IsMember check

  r = run_cli(tmp, "eval --config " + tmp.str() + "/nope.cfg");
  CHECK(r.exit_code == 64);
  CHECK(contains(r.err, "missing config file"));

  r = run_cli(tmp, "pretrain");
  CHECK(r.exit_code == 64);
  CHECK(contains(r.err, "pretrain requires --out"));

  r = run_cli(tmp, "pretrain --out " + tmp.sub("o"));
  CHECK(r.exit_code == 64);
  CHECK(contains(r.err, "no dataset configured"));

  std::string cfg = tmp.str() + "/gone.cfg";
  write_file(cfg, "dataset = " + tmp.str() + "/does-not-exist\n");
  r = run_cli(tmp, "pretrain --config " + cfg + " --out " + tmp.sub("o2"));
  CHECK(r.exit_code == 64);
  CHECK(contains(r.err, "missing dataset directory"));
}

TEST_CASE("the full pipeline runs through the driver") {
  testutil::TempDir tmp("cli-pipeline");
  std::string synth_cfg = tmp.str() + "/synth.cfg";
  write_file(synth_cfg,
             "# desk-scale two-domain benchmark\n"
             "a_num_nodes = 120\n"
             "b_num_graphs = 40\n"
             "b_min_nodes = 5\n"
             "b_max_nodes = 9\n"
             "hidden = 12\n");
  std::string data = tmp.sub("data");
  CliRun r = run_cli(tmp, "synth --config " + synth_cfg + " --out " + data + " --seed 3");
  REQUIRE(r.exit_code == 0);
  CHECK(contains(r.out, "wrote "));
  std::string dom_a = data + "/domain_a", dom_b = data + "/domain_b";
  REQUIRE(std::filesystem::exists(dom_a));
  REQUIRE(std::filesystem::exists(dom_b));

  std::string train_cfg = tmp.str() + "/train.cfg";
  write_file(train_cfg, "datasets = " + dom_a + ", " + dom_b +
                            "\n"
                            "epochs = 2\n"
                            "batch = 32\n"
                            "lr = 3e-3\n"
                            "fanout = 4\n"
                            "hidden = 12\n"
                            "layers = 2\n"
                            "dropout = 0.1\n"
                            "lambda = 1\n");
  std::string out1 = tmp.sub("run1"), out2 = tmp.sub("run2");
  r = run_cli(tmp, "pretrain --config " + train_cfg + " --out " + out1 + " --seed 11");
  REQUIRE(r.exit_code == 0);
  CHECK(contains(r.out, "checkpoint " + out1 + "/checkpoint.bin"));
  REQUIRE(std::filesystem::exists(out1 + "/checkpoint.bin"));
  REQUIRE(std::filesystem::exists(out1 + "/pretrain_log.txt"));

  SUBCASE("pretraining is byte-reproducible across runs") {
    r = run_cli(tmp, "pretrain --config " + train_cfg + " --out " + out2 + " --seed 11");
    REQUIRE(r.exit_code == 0);
    CHECK(slurp(out1 + "/pretrain_log.txt") == slurp(out2 + "/pretrain_log.txt"));
    CHECK(slurp(out1 + "/checkpoint.bin") == slurp(out2 + "/checkpoint.bin"));
  }

  SUBCASE("episode and finetune evaluation protocols") {
    std::string eval_cfg = tmp.str() + "/eval.cfg";
    write_file(eval_cfg, "dataset = " + dom_a +
                             "\n"
                             "checkpoint = " + out1 + "/checkpoint.bin\n");
    std::string er = tmp.sub("eval-out");
    r = run_cli(tmp, "eval --config " + eval_cfg +
                         " --protocol incontext --ways 3 --shots 2 --tasks 30"
                         " --seed 5 --out " + er);
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.rfind("incontext accuracy ", 0) == 0);
    CHECK(slurp(er + "/eval_report.txt") == r.out);

    CliRun again = run_cli(tmp, "eval --config " + eval_cfg +
                                    " --protocol incontext --ways 3 --shots 2"
                                    " --tasks 30 --seed 5");
    CHECK(again.out == r.out);

    r = run_cli(tmp, "eval --config " + eval_cfg + " --protocol zeroshot --tasks 20" +
                         " --ways 3 --seed 5");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.rfind("zeroshot accuracy ", 0) == 0);

    r = run_cli(tmp, "eval --config " + eval_cfg +
                         " --protocol finetune --epochs 15 --lr 1e-2 --seed 5");
    REQUIRE(r.exit_code == 0);
    CHECK(r.out.rfind("finetune accuracy ", 0) == 0);

    // Node tasks cannot feed link prediction: clean validation failure.
    r = run_cli(tmp, "eval --config " + eval_cfg +
                         " --protocol linkpred --epochs 5 --seed 5");
    CHECK(r.exit_code == 1);
    CHECK(contains(r.err, "no positive test edges"));
  }

  SUBCASE("specialization consumes and produces checkpoints") {
    std::string sft_cfg = tmp.str() + "/sft.cfg";
    write_file(sft_cfg, "dataset = " + dom_a +
                            "\n"
                            "checkpoint = " + out1 + "/checkpoint.bin\n"
                            "batch = 16\n");
    std::string sft_out = tmp.sub("sft");
    r = run_cli(tmp, "specialize --config " + sft_cfg + " --out " + sft_out +
                         " --epochs 3 --lr 5e-3 --seed 7");
    REQUIRE(r.exit_code == 0);
    REQUIRE(std::filesystem::exists(sft_out + "/checkpoint.bin"));
    REQUIRE(std::filesystem::exists(sft_out + "/sft_log.txt"));

    std::string eval_cfg = tmp.str() + "/eval-sft.cfg";
    write_file(eval_cfg, "dataset = " + dom_a +
                             "\n"
                             "checkpoint = " + sft_out + "/checkpoint.bin\n");
    r = run_cli(tmp, "eval --config " + eval_cfg +
                         " --protocol zeroshot --tasks 20 --ways 3 --seed 5");
    CHECK(r.exit_code == 0);
  }
}

TEST_CASE("verify and bench suites") {
  testutil::TempDir tmp("cli-verify");

  CliRun r = run_cli(tmp, "verify --suite stability --trials 20 --seed 1");
  CHECK(r.exit_code == 0);
  CHECK(contains(r.out, "violations 0 / 20"));

  r = run_cli(tmp, "verify --suite transfer --seed 2 --hidden 8");
  CHECK(r.exit_code == 0);
  CHECK(contains(r.out, "lhs "));
  CHECK(contains(r.out, "ratio "));

  r = run_cli(tmp, "verify --suite gap --seed 2 --hidden 8");
  CHECK(r.exit_code == 0);
  CHECK(r.out.rfind("gap ", 0) == 0);

  std::string bench_cfg = tmp.str() + "/bench.cfg";
  write_file(bench_cfg,
             "nodes = 400\n"
             "batch = 64\n"
             "hops = 2\n"
             "hidden = 8\n"
             "layers = 2\n");
  r = run_cli(tmp, "bench --config " + bench_cfg + " --trials 1 --seed 4");
  CHECK(r.exit_code == 0);
  CHECK(contains(r.out, "reps 1 batch 64 hops 2"));
  CHECK(contains(r.out, "tree total "));
  CHECK(contains(r.out, "subgraph total "));
}

TEST_CASE("validation failures exit with 1") {
  testutil::TempDir tmp("cli-validation");
  Dataset d = testutil::two_cluster_dataset(91, 12);
  std::string plain = tmp.sub("plain");
  save_dataset(d, plain);

  std::string bad_int = tmp.str() + "/bad-int.cfg";
  write_file(bad_int, "dataset = " + plain + "\nepochs = banana\n");
  CliRun r = run_cli(tmp, "pretrain --config " + bad_int + " --out " + tmp.sub("o"));
  CHECK(r.exit_code == 1);
  CHECK(contains(r.err, "error: config error: key epochs is not an integer"));

  std::string bad_act = tmp.str() + "/bad-act.cfg";
  write_file(bad_act, "dataset = " + plain + "\nactivation = tanh\n");
  r = run_cli(tmp, "pretrain --config " + bad_act + " --out " + tmp.sub("o2") +
                       " --epochs 1");
  CHECK(r.exit_code == 1);
  CHECK(contains(r.err, "unknown activation tanh"));

  std::string suite_cfg = tmp.str() + "/suite.cfg";
  write_file(suite_cfg, "suite = weird\n");
  r = run_cli(tmp, "verify --config " + suite_cfg);
  CHECK(r.exit_code == 1);
  CHECK(contains(r.err, "unknown suite weird"));

  // Zero-shot needs instruction vectors; the plain bundle ships none.
  EncoderParams p = init_params(4, 6, 2, 17, Activation::kRelu, 0.0, false);
  std::string ck = tmp.str() + "/enc.bin";
  save_checkpoint(p, ck);
  std::string zs_cfg = tmp.str() + "/zs.cfg";
  write_file(zs_cfg, "dataset = " + plain + "\ncheckpoint = " + ck + "\n");
  r = run_cli(tmp, "eval --config " + zs_cfg + " --protocol zeroshot --tasks 5");
  CHECK(r.exit_code == 1);
  CHECK(contains(r.err, "zeroshot needs class_vectors.txt"));

  r = run_cli(tmp, "eval --config " + zs_cfg + " --protocol finetune --epochs -2");
  CHECK(r.exit_code == 1);
  CHECK(contains(r.err, "negative epochs"));

  std::string no_ck = tmp.str() + "/no-ck.cfg";
  write_file(no_ck, "dataset = " + plain + "\n");
  r = run_cli(tmp, "eval --config " + no_ck);
  CHECK(r.exit_code == 64);
  CHECK(contains(r.err, "no checkpoint configured"));

  std::string gone_ck = tmp.str() + "/gone-ck.cfg";
  write_file(gone_ck, "dataset = " + plain + "\ncheckpoint = " + tmp.str() + "/none.bin\n");
  r = run_cli(tmp, "eval --config " + gone_ck);
  CHECK(r.exit_code == 64);
  CHECK(contains(r.err, "missing checkpoint file"));
}

TEST_CASE("numeric failures exit with 2") {
  testutil::TempDir tmp("cli-numeric");
  Dataset d = testutil::two_cluster_dataset(92, 12);
  std::string plain = tmp.sub("plain");
  save_dataset(d, plain);

  // A finite but astronomically scaled checkpoint overflows the very first
  // forward pass, so finetuning reports a non-finite loss.
  EncoderParams p = init_params(4, 6, 2, 19, Activation::kRelu, 0.0, false);
  for (Matrix* m : p.all())
    for (int i = 0; i < m->rows; ++i)
      for (int j = 0; j < m->cols; ++j) (*m)(i, j) = 1e300;
  std::string ck = tmp.str() + "/huge.bin";
  save_checkpoint(p, ck);

  std::string cfg = tmp.str() + "/numeric.cfg";
  write_file(cfg, "dataset = " + plain + "\ncheckpoint = " + ck + "\n");
  CliRun r = run_cli(tmp, "eval --config " + cfg + " --protocol finetune --epochs 3");
  CHECK(r.exit_code == 2);
  CHECK(contains(r.err, "numeric error:"));
}
