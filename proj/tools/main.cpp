#include <CLI11.hpp>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <sstream>

#include "xtal/checkpoint.hpp"
#include "xtal/cif.hpp"
#include "xtal/config.hpp"
#include "xtal/dataset.hpp"
#include "xtal/errors.hpp"
#include "xtal/metrics.hpp"
#include "xtal/sampler.hpp"
#include "xtal/selection.hpp"
#include "xtal/synthetic.hpp"
#include "xtal/train.hpp"

namespace fs = std::filesystem;
using namespace xtal;

namespace {

std::string quote_arg(const std::string& a) {
  if (!a.empty() && a.find_first_of(" \t\"'") == std::string::npos) return a;
  std::string q = "'";
  for (char c : a) {
    if (c == '\'') q += "'\\''";
    else q += c;
  }
  q += "'";
  return q;
}

std::string join_command(int argc, char** argv) {
  std::string cmd = "xtalgen";
  for (int i = 1; i < argc; ++i) cmd += " " + quote_arg(argv[i]);
  return cmd;
}

std::vector<std::string> provenance(const std::string& cmd, const RunConfig& cfg,
                                    std::uint64_t seed) {
  return {"command: " + cmd, "config_hash: " + config_hash(cfg),
          "seed: " + std::to_string(seed)};
}

std::string provenance_comments(const std::string& cmd, const RunConfig& cfg,
                                std::uint64_t seed) {
  std::string out;
  for (const auto& line : provenance(cmd, cfg, seed)) out += "# " + line + "\n";
  return out;
}

// Flags shared by every subcommand: preset choice, config file, ad-hoc
// overrides. Resolution order: preset, then file, then --set pairs.
struct ConfigFlags {
  bool full_scale = false;
  std::string config_path;
  std::vector<std::string> sets;

  void attach(CLI::App* cmd) {
    cmd->add_flag("--full", full_scale,
                  "start from the full-scale preset (d=512, L=18; multi-day runs)");
    cmd->add_option("--config", config_path, "flat key = value config file");
    cmd->add_option("--set", sets, "override one config key (key=value, repeatable)")
        ->type_size(1);
  }

  RunConfig resolve() const {
    RunConfig cfg = full_scale ? RunConfig::full() : RunConfig::desk();
    if (!config_path.empty()) cfg = load_config(config_path, cfg);
    for (const auto& kv : sets) {
      auto eq = kv.find('=');
      if (eq == std::string::npos)
        throw_usage("bad_value", "--set expects key=value, got '" + kv + "'");
      apply_override(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
  }
};

int env_threads() {
  const char* v = std::getenv("XTALGEN_THREADS");
  if (!v || !*v) return 1;
  char* end = nullptr;
  long n = std::strtol(v, &end, 10);
  if (*end != '\0' || n < 1)
    throw_usage("bad_value", std::string("XTALGEN_THREADS must be a positive integer, got '") + v + "'");
  return static_cast<int>(n);
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string ckpt_name(int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "ckpt_%06d.ckpt", epoch);
  return buf;
}

void run_synth(const std::string& cmd, const ConfigFlags& cf, int n, std::uint64_t seed,
               const std::string& out, bool csv) {
  RunConfig cfg = cf.resolve();
  cfg.validate();
  auto structures = make_synthetic_dataset(n, seed);
  auto comments = provenance(cmd, cfg, seed);
  if (csv)
    write_dataset_csv(out, structures, comments);
  else
    write_cif_directory(out, structures, comments);
  std::cout << "wrote " << structures.size() << " synthetic structures to " << out << "\n";
}

void run_ingest(const std::string& cmd, const ConfigFlags& cf, const std::string& data,
                const std::string& mode_flag, const std::string& out) {
  RunConfig cfg = cf.resolve();
  if (!mode_flag.empty()) apply_override(cfg, "mode", mode_flag);
  cfg.validate();

  auto [tensors, report] = load_dataset(data, cfg.model.mode);
  std::string prov = provenance_comments(cmd, cfg, 0);
  write_tensor_cache(out, tensors, prov);
  write_text_atomic(out + ".report.txt", prov + report.summary());
  std::cout << report.summary();
}

void run_train(const std::string& cmd, const ConfigFlags& cf, const std::string& cache,
               const std::string& ckpt_dir, int epochs, int batch, double lr,
               int ckpt_every, std::uint64_t seed) {
  RunConfig cfg = cf.resolve();
  if (epochs > 0) cfg.epochs = epochs;
  if (batch > 0) cfg.batch_size = batch;
  if (lr > 0) cfg.lr = lr;
  if (ckpt_every >= 0) cfg.checkpoint_every = ckpt_every;

  auto [tensors, cache_meta] = read_tensor_cache(cache);
  if (!tensors.empty() && tensors.front().mode != cfg.model.mode) {
    cfg.model.mode = tensors.front().mode;
    std::cout << "note: atom mode " << atom_mode_name(cfg.model.mode)
              << " adopted from the tensor cache\n";
  }
  cfg.validate();

  NoiseSchedule sched = cfg.schedule();
  LossWeights weights = cfg.loss_weights();
  ModelParameters params = ModelParameters::init(cfg.model, seed);
  std::string hash = config_hash(cfg);
  fs::create_directories(ckpt_dir);

  std::ostringstream loss_log;
  loss_log << provenance_comments(cmd, cfg, seed);
  int saved = 0;

  TrainOptions opts;
  opts.epochs = cfg.epochs;
  opts.batch_size = cfg.batch_size;
  opts.adam.lr = cfg.lr;
  opts.seed = seed;
  opts.checkpoint_every = cfg.checkpoint_every > 0 ? cfg.checkpoint_every : cfg.epochs;
  int print_every = std::max(1, cfg.epochs / 10);
  opts.on_epoch = [&](int epoch, const LossBreakdown& loss) {
    loss_log << "epoch=" << epoch << " total=" << fmt17(loss.total)
             << " lattice=" << fmt17(loss.lattice) << " atoms=" << fmt17(loss.atoms) << "\n";
    if (epoch % print_every == 0 || epoch == cfg.epochs)
      std::cout << "epoch " << epoch << "/" << cfg.epochs << " loss " << loss.total << "\n";
  };
  opts.on_checkpoint = [&](int epoch, const ModelParameters& p) {
    CheckpointMeta meta{epoch, seed, hash, cmd};
    save_checkpoint((fs::path(ckpt_dir) / ckpt_name(epoch)).string(), p, meta);
    ++saved;
  };

  train(params, tensors, sched, weights, opts);
  write_text_atomic((fs::path(ckpt_dir) / "loss_log.txt").string(), loss_log.str());
  write_text_atomic((fs::path(ckpt_dir) / "config.txt").string(),
                    provenance_comments(cmd, cfg, seed) + serialize_config(cfg));
  std::cout << "trained " << cfg.epochs << " epochs on " << tensors.size()
            << " structures; " << saved << " checkpoints in " << ckpt_dir << "\n";
}

void run_sample(const std::string& cmd, const ConfigFlags& cf, const std::string& ckpt,
                int n, std::uint64_t seed, const std::string& out) {
  RunConfig cfg = cf.resolve();
  auto [params, meta] = load_checkpoint(ckpt);
  cfg.model = params.config;
  cfg.validate();
  if (n <= 0) n = cfg.samples;

  GenerateResult res =
      generate(params, cfg.schedule(), cfg.decoder(), n, seed, env_threads());

  fs::create_directories(out);
  auto comments = provenance(cmd, cfg, seed);
  nlohmann::json log;
  log["command"] = cmd;
  log["config_hash"] = config_hash(cfg);
  log["seed"] = seed;
  log["checkpoint_epoch"] = meta.epoch;
  log["num_samples"] = n;
  log["kept"] = res.num_kept;
  log["dropped"] = res.num_dropped;
  auto entries = nlohmann::json::array();
  for (int i = 0; i < n; ++i) {
    char name[32];
    std::snprintf(name, sizeof(name), "sample_%05d", i);
    std::string file = std::string(name) + ".cif";
    const auto& s = res.samples[static_cast<size_t>(i)];
    int atoms = s ? s->num_sites() : 0;
    CrystalStructure placeholder;  // unit cell, zero sites
    auto file_comments = comments;
    if (!s) file_comments.push_back("dropped: decoded to zero atoms");
    write_text_atomic((fs::path(out) / file).string(),
                      write_cif(s ? *s : placeholder, name, file_comments));
    entries.push_back({{"index", i},
                       {"file", file},
                       {"atoms", atoms},
                       {"null_rows", kMaxAtoms - atoms},
                       {"dropped", !s}});
  }
  log["samples"] = std::move(entries);
  write_text_atomic((fs::path(out) / "decode_log.json").string(), log.dump(2) + "\n");
  std::cout << "generated " << n << " samples (" << res.num_kept << " kept, "
            << res.num_dropped << " dropped) in " << out << "\n";
}

void run_evaluate(const std::string& cmd, const ConfigFlags& cf, const std::string& gen,
                  const std::string& test_path, const std::string& train_path,
                  std::uint64_t seed, const std::string& out, int epoch,
                  const std::string& history) {
  RunConfig cfg = cf.resolve();
  cfg.validate();
  EvaluateOptions opts;
  opts.tol = cfg.matcher;
  MetricsReport report = evaluate_batch(gen, test_path, train_path, seed, opts);
  std::string text = serialize_report(report);
  write_text_atomic(out, provenance_comments(cmd, cfg, seed) + text);
  std::cout << text;
  if (!history.empty()) {
    if (epoch < 0)
      throw_usage("missing_flag", "--history needs --epoch to label the history line");
    append_history(history, epoch, report, balance_score(report, cfg.alpha));
    std::cout << "appended epoch " << epoch << " to " << history << "\n";
  }
}

void run_select(const std::string& cmd, const ConfigFlags& cf, const std::string& history,
                double alpha, int total_epochs, const std::string& out) {
  RunConfig cfg = cf.resolve();
  if (alpha > 0) cfg.alpha = alpha;
  cfg.validate();

  auto hist = read_history(history);
  SelectionResult res = select_checkpoints(hist, total_epochs, cfg.alpha);

  std::ostringstream text;
  text << "alpha = " << fmt17(cfg.alpha) << "\n";
  text << "total_epochs = " << total_epochs << "\n";
  auto emit = [&](const char* name, const std::optional<CheckpointRecord>& rec) {
    if (rec) {
      text << name << "_epoch = " << rec->epoch << "\n";
      text << name << "_balance = " << fmt17(rec->balance_score) << "\n";
    } else {
      text << name << "_epoch = none\n";
    }
  };
  emit("early", res.early);
  emit("mid", res.mid);
  emit("late", res.late);

  std::string full = provenance_comments(cmd, cfg, 0) + text.str();
  if (!out.empty()) write_text_atomic(out, full);
  std::cout << text.str();
}

void run_report(const std::string& cmd, const ConfigFlags& cf, const std::string& history,
                int window, double alpha, const std::string& out) {
  RunConfig cfg = cf.resolve();
  if (alpha > 0) cfg.alpha = alpha;
  cfg.validate();

  auto hist = read_history(history);
  std::vector<double> raw;
  raw.reserve(hist.size());
  for (const auto& [epoch, m] : hist) raw.push_back(balance_score(m, cfg.alpha));
  std::vector<double> smooth = moving_average(raw, window);

  std::ostringstream csv;
  csv << provenance_comments(cmd, cfg, 0);
  csv << "epoch,balance,balance_smoothed\n";
  for (size_t i = 0; i < hist.size(); ++i)
    csv << hist[i].first << ',' << fmt17(raw[i]) << ',' << fmt17(smooth[i]) << "\n";

  if (!out.empty()) {
    write_text_atomic(out, csv.str());
    std::cout << "wrote " << hist.size() << " rows to " << out << "\n";
  } else {
    std::cout << csv.str();
  }
}

const char* category_name(ErrorCategory c) {
  switch (c) {
    case ErrorCategory::Usage: return "usage";
    case ErrorCategory::Data: return "data";
    case ErrorCategory::Numeric: return "numeric";
  }
  return "?";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"crystal diffusion pipeline: encode, train, sample, evaluate, select"};
  app.require_subcommand(1);
  std::string cmd = join_command(argc, argv);

  // synth
  auto* synth = app.add_subcommand("synth", "emit a deterministic synthetic dataset");
  ConfigFlags synth_cf;
  synth_cf.attach(synth);
  int synth_n = 16;
  std::uint64_t synth_seed = 7;
  std::string synth_out;
  bool synth_csv = false;
  synth->add_option("--n", synth_n, "number of structures")->check(CLI::PositiveNumber);
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_option("--out", synth_out, "output directory (or CSV path with --csv)")->required();
  synth->add_flag("--csv", synth_csv, "emit one CSV instead of a CIF directory");
  synth->callback([&] { run_synth(cmd, synth_cf, synth_n, synth_seed, synth_out, synth_csv); });

  // ingest
  auto* ingest = app.add_subcommand("ingest", "tensorize a dataset into a cache");
  ConfigFlags ingest_cf;
  ingest_cf.attach(ingest);
  std::string ingest_data, ingest_mode, ingest_out;
  ingest->add_option("--data", ingest_data, "CIF directory or CSV dataset")->required();
  ingest->add_option("--mode", ingest_mode, "atom encoding: 2d or 1d")
      ->check(CLI::IsMember({"2d", "1d"}));
  ingest->add_option("--out", ingest_out, "tensor cache path")->required();
  ingest->callback([&] { run_ingest(cmd, ingest_cf, ingest_data, ingest_mode, ingest_out); });

  // train
  auto* train_cmd = app.add_subcommand("train", "train the denoiser on a tensor cache");
  ConfigFlags train_cf;
  train_cf.attach(train_cmd);
  std::string train_cache, train_ckpt_dir;
  int train_epochs = -1, train_batch = -1, train_ckpt_every = -1;
  double train_lr = -1;
  std::uint64_t train_seed = 0;
  train_cmd->add_option("--cache", train_cache, "tensor cache from ingest")->required();
  train_cmd->add_option("--epochs", train_epochs, "training epochs");
  train_cmd->add_option("--batch", train_batch, "batch size");
  train_cmd->add_option("--lr", train_lr, "Adam learning rate");
  train_cmd->add_option("--ckpt-every", train_ckpt_every, "checkpoint cadence (0: final only)");
  train_cmd->add_option("--seed", train_seed, "training seed");
  train_cmd->add_option("--ckpt-dir", train_ckpt_dir, "checkpoint output directory")->required();
  train_cmd->callback([&] {
    run_train(cmd, train_cf, train_cache, train_ckpt_dir, train_epochs, train_batch,
              train_lr, train_ckpt_every, train_seed);
  });

  // sample
  auto* sample = app.add_subcommand("sample", "generate structures from a checkpoint");
  ConfigFlags sample_cf;
  sample_cf.attach(sample);
  std::string sample_ckpt, sample_out;
  int sample_n = -1;
  std::uint64_t sample_seed = 0;
  sample->add_option("--ckpt", sample_ckpt, "checkpoint file")->required();
  sample->add_option("--n", sample_n, "number of samples (default from config)");
  sample->add_option("--seed", sample_seed, "sampling seed");
  sample->add_option("--out", sample_out, "output directory")->required();
  sample->callback(
      [&] { run_sample(cmd, sample_cf, sample_ckpt, sample_n, sample_seed, sample_out); });

  // evaluate
  auto* evaluate = app.add_subcommand("evaluate", "stage-1 metrics over generated structures");
  ConfigFlags eval_cf;
  eval_cf.attach(evaluate);
  std::string eval_gen, eval_test, eval_train, eval_out, eval_history;
  std::uint64_t eval_seed = 0;
  int eval_epoch = -1;
  evaluate->add_option("--gen", eval_gen, "directory of generated CIFs")->required();
  evaluate->add_option("--test", eval_test, "reference set (CIF dir or CSV)")->required();
  evaluate->add_option("--train", eval_train, "training set (CIF dir or CSV)")->required();
  evaluate->add_option("--seed", eval_seed, "subsampling seed");
  evaluate->add_option("--out", eval_out, "report path")->required();
  evaluate->add_option("--epoch", eval_epoch, "epoch label for the history line");
  evaluate->add_option("--history", eval_history, "append the metrics to this history log");
  evaluate->callback([&] {
    run_evaluate(cmd, eval_cf, eval_gen, eval_test, eval_train, eval_seed, eval_out,
                 eval_epoch, eval_history);
  });

  // select
  auto* select = app.add_subcommand("select", "pick best checkpoints per training phase");
  ConfigFlags select_cf;
  select_cf.attach(select);
  std::string select_history, select_out;
  double select_alpha = -1;
  int select_total = 0;
  select->add_option("--history", select_history, "history log from evaluate")->required();
  select->add_option("--alpha", select_alpha, "balance exponent (default from config)");
  select->add_option("--total-epochs", select_total, "length of the training run")
      ->required()
      ->check(CLI::PositiveNumber);
  select->add_option("--out", select_out, "also write the result here");
  select->callback([&] {
    run_select(cmd, select_cf, select_history, select_alpha, select_total, select_out);
  });

  // report
  auto* report = app.add_subcommand("report", "balance-score series with smoothing");
  ConfigFlags report_cf;
  report_cf.attach(report);
  std::string report_history, report_out;
  int report_window = 10;
  double report_alpha = -1;
  report->add_option("--history", report_history, "history log from evaluate")->required();
  report->add_option("--window", report_window, "moving-average window")
      ->check(CLI::PositiveNumber);
  report->add_option("--alpha", report_alpha, "balance exponent (default from config)");
  report->add_option("--out", report_out, "CSV output path (default stdout)");
  report->callback([&] {
    run_report(cmd, report_cf, report_history, report_window, report_alpha, report_out);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const Error& e) {
    std::cerr << "error [" << category_name(e.category()) << "/" << e.code() << "] "
              << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
