#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "cpr/data/checkpoint.hpp"
#include "cpr/data/errors.hpp"
#include "cpr/harness/ablate.hpp"
#include "cpr/harness/gen_data.hpp"
#include "cpr/harness/gradcheck.hpp"
#include "cpr/harness/pretrain.hpp"
#include "cpr/harness/probe.hpp"
#include "cpr/model/model.hpp"

using namespace cpr;
using namespace cpr::harness;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;

/// The checkpoint plus the run config it embeds, checked against each other.
struct LoadedRun {
  data::Checkpoint ckpt;
  RunConfig cfg;
};

LoadedRun load_run(const std::string& ckpt_path, const std::string& config_override) {
  LoadedRun run;
  run.ckpt = data::load_checkpoint(ckpt_path);
  run.cfg = config_override.empty() ? parse_run_config(run.ckpt.config_json)
                                    : load_run_config(config_override);
  data::verify_params(model::init_params(run.cfg.model, 0), run.ckpt.params);
  return run;
}

int cmd_gen_data(const GenDataOptions& opts, const std::string& out) {
  const auto paths = generate_dataset(out, opts);
  std::cout << "wrote " << paths.size() << " sequences to " << out << "\n";
  return 0;
}

int cmd_pretrain(const std::string& config, const std::string& data_dir, const std::string& out,
                 bool quiet) {
  const auto cfg = load_run_config(config);
  const auto ds = load_dataset(data_dir, cfg, &std::cerr);
  std::cout << "train " << ds.train.size() << " sequences, val " << ds.val.size() << "\n";
  const auto res = pretrain(cfg, ds.train, out, quiet ? nullptr : &std::cout);
  std::cout << res.rows.size() << " steps; checkpoint " << (std::filesystem::path(out) / "final.ckpt").string()
            << "\n";
  return 0;
}

int cmd_probe(const std::string& ckpt, const std::string& config, const std::string& data_dir,
              bool random_init) {
  const auto run = load_run(ckpt, config);
  const auto ds = load_dataset(data_dir, run.cfg, &std::cerr);
  const auto params = random_init ? model::init_params(run.cfg.model, run.cfg.seed) : run.ckpt.params;
  const auto r = linear_probe(params, run.cfg, ds.train, ds.val);
  std::printf("classes %zu train_acc %.6f val_acc %.6f\n", r.classes, r.train_accuracy,
              r.val_accuracy);
  return 0;
}

int cmd_ablate(const std::string& config, const std::string& toggles, const std::string& data_dir,
               const std::string& out) {
  const auto cfg = load_run_config(config);
  std::vector<std::string> warnings;
  const auto combos = parse_combos(toggles, &warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  const auto ds = load_dataset(data_dir, cfg, &std::cerr);
  const auto rows = ablate(cfg, combos, ds, out, &std::cerr);
  const auto csv = ablation_csv(rows);
  std::cout << csv;
  if (!out.empty()) std::ofstream(std::filesystem::path(out) / "ablation.csv") << csv;
  return 0;
}

int cmd_gradcheck(const GradcheckOptions& opts) {
  const auto parts = run_gradcheck(opts);
  return print_gradcheck(parts, opts, std::cout) ? 0 : kExitNumeric;
}

int cmd_inspect(const std::string& path) {
  const auto ck = data::load_checkpoint(path);
  std::printf("magic CPR1 version %u step %llu\n", ck.version,
              static_cast<unsigned long long>(ck.step));
  std::printf("tensors %zu, %zu values\n", ck.params.size(), ck.params.scalar_count());
  for (const auto& [name, e] : ck.params.entries()) {
    std::printf("  %-40s %-16s%s\n", name.c_str(), core::shape_str(e.value.shape()).c_str(),
                e.trainable ? "" : " frozen");
  }
  std::printf("config %s\n", ck.config_json.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Contrastive predictive pretraining on dynamic point clouds"};
  app.require_subcommand(1);

  GenDataOptions gen;
  std::string gen_out;
  auto* gen_cmd = app.add_subcommand("gen-data", "Write a synthetic labelled .pcsq dataset");
  gen_cmd->add_option("--classes", gen.classes, "Motion classes (1-8)")->capture_default_str();
  gen_cmd->add_option("--per-class", gen.per_class, "Sequences per class")->capture_default_str();
  gen_cmd->add_option("--frames", gen.frames, "Frames per sequence")->capture_default_str();
  gen_cmd->add_option("--points", gen.points, "Points per frame")->capture_default_str();
  gen_cmd->add_option("--noise", gen.noise, "Coordinate noise sigma")->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed, "Dataset seed")->capture_default_str();
  gen_cmd->add_option("--out", gen_out, "Output directory")->required();

  std::string config, data_dir, out, ckpt, toggles;
  bool quiet = false, random_init = false;
  auto* pre_cmd = app.add_subcommand("pretrain", "Pretrain and write checkpoints and metrics");
  pre_cmd->add_option("--config", config, "Run config JSON")->required();
  pre_cmd->add_option("--data", data_dir, "Directory of .pcsq files")->required();
  pre_cmd->add_option("--out", out, "Output directory")->required();
  pre_cmd->add_flag("--quiet", quiet, "Do not echo metrics");

  auto* probe_cmd = app.add_subcommand("probe", "Linear probe on frozen encoder features");
  probe_cmd->add_option("--ckpt", ckpt, "Checkpoint")->required();
  probe_cmd->add_option("--data", data_dir, "Directory of .pcsq files")->required();
  probe_cmd->add_option("--config", config, "Override the checkpoint's embedded config");
  probe_cmd->add_flag("--random-init", random_init,
                      "Probe a freshly initialised encoder built from the config seed");

  auto* ablate_cmd = app.add_subcommand("ablate", "Pretrain and probe several loss combos");
  ablate_cmd->add_option("--config", config, "Run config JSON")->required();
  ablate_cmd
      ->add_option("--toggles", toggles,
                   "Comma-separated combos of local, global, recon, hard joined by '+'")
      ->required();
  ablate_cmd->add_option("--data", data_dir, "Directory of .pcsq files")->required();
  ablate_cmd->add_option("--out", out, "Output directory for per-combo runs");

  GradcheckOptions gc;
  auto* gc_cmd = app.add_subcommand("gradcheck", "Finite-difference check of every loss term");
  gc_cmd->add_option("--seed", gc.seed, "Data and init seed")->capture_default_str();
  gc_cmd->add_option("--corrupt-op", gc.corrupt_op)->group("");

  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect-ckpt", "Print a checkpoint's header and tensors");
  inspect_cmd->add_option("file", inspect_path, "Checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfig;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, gen_out);
    if (*pre_cmd) return cmd_pretrain(config, data_dir, out, quiet);
    if (*probe_cmd) return cmd_probe(ckpt, config, data_dir, random_init);
    if (*ablate_cmd) return cmd_ablate(config, toggles, data_dir, out);
    if (*gc_cmd) return cmd_gradcheck(gc);
    if (*inspect_cmd) return cmd_inspect(inspect_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
