// Command-line front end: dataset generation, training, evaluation, and
// complexity reports. Every run writes a manifest echoing the resolved
// configuration next to its primary output.
//
// Exit codes:
//   0  success
//   2  usage error, invalid flags, or an invalid generator spec
//   3  missing or unreadable input file
//   4  malformed or corrupt file (header, truncation, checksum)
//   5  configuration mismatch (eta/checkpoint/grid)
//   6  training diverged

#include <CLI11.hpp>

#include <cstdio>
#include <string>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include <nlohmann/json.hpp>

#include "clnet/blocks.hpp"
#include "clnet/channel.hpp"
#include "clnet/checkpoint.hpp"
#include "clnet/flops.hpp"
#include "clnet/io_util.hpp"
#include "clnet/pipeline.hpp"
#include "clnet/trainer.hpp"

using json = nlohmann::json;

namespace {

constexpr int kExitUsage = 2;
constexpr int kExitMissingFile = 3;
constexpr int kExitCorruptFile = 4;
constexpr int kExitMismatch = 5;
constexpr int kExitDiverged = 6;

void write_manifest(const std::string& primary_output, const std::string& command, json flags,
                    std::vector<std::string> outputs) {
  json m;
  m["command"] = command;
  m["flags"] = std::move(flags);
  m["outputs"] = std::move(outputs);
  clnet::write_file(primary_output + ".manifest.json", m.dump(2) + "\n");
}

struct GenDataArgs {
  std::string preset = "default";
  int samples = 3000;
  std::uint64_t seed = 1;
  int nc = 256;
  int na = 32;
  int subpaths = 8;
  std::string out;
};

int run_gen_data(const GenDataArgs& a) {
  clnet::MultipathSpec spec;
  if (a.preset == "default") {
    spec = clnet::MultipathSpec::defaults();
  } else if (a.preset == "indoor") {
    spec = clnet::MultipathSpec::indoor();
  } else if (a.preset == "outdoor") {
    spec = clnet::MultipathSpec::outdoor();
  } else {
    std::fprintf(stderr, "unknown preset '%s' (expected default|indoor|outdoor)\n",
                 a.preset.c_str());
    return kExitUsage;
  }
  spec.nc = a.nc;
  spec.nt = a.na;
  spec.na = a.na;
  spec.subpaths = a.subpaths;
  spec.seed = a.seed;

  clnet::DatasetStats stats;
  auto data = clnet::generate_dataset(spec, a.samples, a.preset, &stats);
  clnet::write_dataset(a.out, data);

  json flags{{"preset", a.preset}, {"samples", a.samples}, {"seed", a.seed},
             {"nc", a.nc},         {"na", a.na},           {"subpaths", a.subpaths},
             {"out", a.out}};
  write_manifest(a.out, "gen-data", flags, {a.out});

  std::printf("samples=%d train=%d val=%d test=%d\n", data.hdr.count, data.hdr.n_train,
              data.hdr.n_val, data.hdr.n_test);
  std::printf("kept_row_energy=%.4f top10_energy_share=%.4f\n", stats.mean_kept_energy,
              stats.mean_top10_share);
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

struct TrainArgs {
  std::string data;
  std::string arch = "clnet";
  std::string eta = "1/4";
  int epochs = 50;
  int batch = 64;
  double lr = 1.5e-3;
  std::uint64_t seed = 1;
  int c = 32;
  int cprime = 8;
  int checkpoint_every = 0;
  int stop_after = 0;
  bool resume = false;
  std::string out;
  std::string log;
};

int run_train(const TrainArgs& a) {
  const std::string log_path = a.log.empty() ? a.out + ".log.csv" : a.log;
  const std::string state_path = a.out + ".state";

  auto data = clnet::read_dataset(a.data);

  std::unique_ptr<clnet::Model<float>> model;
  clnet::AdamState state;
  const clnet::AdamState* resume_state = nullptr;
  if (a.resume) {
    model = clnet::load_checkpoint(a.out);
    state = clnet::load_train_state(state_path);
    resume_state = &state;
  } else {
    clnet::ModelInfo info;
    info.arch = a.arch;
    info.eta = clnet::parse_eta(a.eta);
    info.na = data.hdr.na;
    info.c = a.arch == "crnet-base" ? 2 : a.c;
    info.cprime = a.cprime;
    info.seed = a.seed;
    model = clnet::assemble<float>(info);
  }

  clnet::TrainConfig cfg;
  cfg.epochs = a.epochs;
  cfg.batch = a.batch;
  cfg.lr_peak = a.lr;
  cfg.seed = a.seed;
  cfg.checkpoint_every = a.checkpoint_every;
  cfg.stop_after = a.stop_after;

  clnet::CheckpointSink sink = [&](clnet::Model<float>& m, const clnet::AdamState& st, int) {
    clnet::save_checkpoint(a.out, m);
    clnet::save_train_state(state_path, st);
  };
  auto log = clnet::train(*model, data, cfg, sink, resume_state);
  clnet::write_file(log_path, clnet::train_log_csv(log));

  json flags{{"data", a.data},     {"arch", a.arch},
             {"eta", a.eta},       {"epochs", a.epochs},
             {"batch", a.batch},   {"lr", a.lr},
             {"seed", a.seed},     {"c", a.c},
             {"cprime", a.cprime}, {"checkpoint_every", a.checkpoint_every},
             {"stop_after", a.stop_after},
             {"resume", a.resume}, {"out", a.out},
             {"log", log_path}};
  write_manifest(a.out, "train", flags, {a.out, state_path, log_path});

  if (!log.rows.empty()) {
    const auto& last = log.rows.back();
    std::printf("epochs=%zu final_train_loss=%.6g final_val_nmse_db=%.3f\n", log.rows.size(),
                last.train_loss, last.val_nmse_db);
  }
  std::printf("wrote %s\n", a.out.c_str());
  return 0;
}

struct EvalArgs {
  std::string data;
  std::string checkpoint;
  std::string eta;  // optional; must match the checkpoint when present
  std::string split = "test";
  std::string report;
  std::string codewords;
};

int run_eval(const EvalArgs& a) {
  auto data = clnet::read_dataset(a.data);
  auto model = clnet::load_checkpoint(a.checkpoint);
  if (!a.eta.empty()) {
    const auto want = clnet::parse_eta(a.eta);
    if (!(want == model->info().eta)) {
      std::fprintf(stderr, "eta mismatch: flag says %s but checkpoint was trained at %s\n",
                   clnet::eta_str(want).c_str(), clnet::eta_str(model->info().eta).c_str());
      return kExitMismatch;
    }
  }
  auto rep = clnet::evaluate(*model, data, a.split);
  clnet::write_file(a.report, clnet::eval_report_csv(rep));
  std::fputs(clnet::eval_report_text(rep).c_str(), stdout);

  std::vector<std::string> outputs{a.report};
  if (!a.codewords.empty()) {
    std::vector<clnet::Codeword> cws;
    const int begin = a.split == "train" ? 0
                      : a.split == "val" ? data.hdr.n_train
                                         : data.hdr.n_train + data.hdr.n_val;
    for (int i = 0; i < rep.count; ++i) {
      cws.push_back(clnet::encode(data.samples[static_cast<std::size_t>(begin + i)], *model));
    }
    clnet::write_codewords(a.codewords, cws, data.hdr.na);
    outputs.push_back(a.codewords);
  }

  json flags{{"data", a.data},   {"checkpoint", a.checkpoint}, {"eta", a.eta},
             {"split", a.split}, {"report", a.report},         {"codewords", a.codewords}};
  write_manifest(a.report, "eval", flags, outputs);
  return 0;
}

struct FlopsArgs {
  std::string model = "clnet";
  std::string eta = "1/4";
  int na = 32;
  int c = 32;
  int cprime = 8;
  std::string out;
};

clnet::FlopReport report_for(const std::string& arch, clnet::EtaRatio eta, int na, int c,
                             int cprime) {
  clnet::ModelInfo info;
  info.arch = arch;
  info.eta = eta;
  info.na = na;
  info.c = arch == "crnet-base" ? 2 : c;
  info.cprime = cprime;
  auto model = clnet::assemble<float>(info);
  return clnet::audit_layers(arch, eta, model->layers());
}

int run_flops(const FlopsArgs& a) {
  auto rep = report_for(a.model, clnet::parse_eta(a.eta), a.na, a.c, a.cprime);
  clnet::write_file(a.out, clnet::report_csv(rep));
  std::fputs(clnet::report_summary(rep).c_str(), stdout);
  json flags{{"model", a.model}, {"eta", a.eta},       {"na", a.na},
             {"c", a.c},         {"cprime", a.cprime}, {"out", a.out}};
  write_manifest(a.out, "flops", flags, {a.out});
  return 0;
}

struct CompareArgs {
  std::string model_a = "clnet";
  std::string model_b = "crnet-base";
  int na = 32;
  int c = 32;
  int cprime = 8;
  std::string out;
};

int run_compare(const CompareArgs& a) {
  std::string csv = "eta,flops_a,flops_b,reduction_pct\n";
  char buf[160];
  double sum = 0.0;
  for (int den : {4, 8, 16, 32, 64}) {
    const clnet::EtaRatio eta{1, den};
    auto ra = report_for(a.model_a, eta, a.na, a.c, a.cprime);
    auto rb = report_for(a.model_b, eta, a.na, a.c, a.cprime);
    const double red = clnet::flop_reduction(ra, rb);
    sum += red;
    std::snprintf(buf, sizeof(buf), "1/%d,%lld,%lld,%.2f\n", den,
                  static_cast<long long>(ra.total_flops), static_cast<long long>(rb.total_flops),
                  red * 100.0);
    csv += buf;
  }
  std::snprintf(buf, sizeof(buf), "average,,,%.2f\n", sum / 5.0 * 100.0);
  csv += buf;
  clnet::write_file(a.out, csv);
  std::fputs(csv.c_str(), stdout);
  json flags{{"model_a", a.model_a}, {"model_b", a.model_b}, {"na", a.na},
             {"c", a.c},             {"cprime", a.cprime},   {"out", a.out}};
  write_manifest(a.out, "compare", flags, {a.out});
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
#if defined(__GLIBC__)
  // Training churns through ~100MB tensor buffers per batch; keep them on the
  // heap instead of round-tripping pages through mmap.
  mallopt(M_MMAP_THRESHOLD, 1 << 30);
  mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
  CLI::App app{"CSI feedback autoencoder: data generation, training, evaluation, complexity"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* cmd_gen = app.add_subcommand("gen-data", "Generate a synthetic channel dataset");
  cmd_gen->add_option("--preset", gen.preset, "default|indoor|outdoor");
  cmd_gen->add_option("--samples", gen.samples, "total sample count (10:3:2 split)");
  cmd_gen->add_option("--seed", gen.seed, "generator seed");
  cmd_gen->add_option("--nc", gen.nc, "subcarrier count");
  cmd_gen->add_option("--na", gen.na, "kept delay rows == BS antennas");
  cmd_gen->add_option("--subpaths", gen.subpaths, "sub-paths per cluster");
  cmd_gen->add_option("--out", gen.out, "output dataset file")->required();

  TrainArgs tr;
  auto* cmd_train = app.add_subcommand("train", "Train a feedback model");
  cmd_train->add_option("--data", tr.data, "dataset file")->required();
  cmd_train->add_option("--arch", tr.arch, "clnet|crnet-base|clnet-noattn");
  cmd_train->add_option("--eta", tr.eta, "compression ratio, e.g. 1/4");
  cmd_train->add_option("--epochs", tr.epochs, "training epochs");
  cmd_train->add_option("--batch", tr.batch, "mini-batch size");
  cmd_train->add_option("--lr", tr.lr, "peak learning rate");
  cmd_train->add_option("--seed", tr.seed, "training seed");
  cmd_train->add_option("--c", tr.c, "encoder width");
  cmd_train->add_option("--cprime", tr.cprime, "decoder width");
  cmd_train->add_option("--checkpoint-every", tr.checkpoint_every, "epochs between checkpoints");
  cmd_train->add_option("--stop-after", tr.stop_after,
                        "interrupt after this many total epochs (resume with --resume)");
  cmd_train->add_flag("--resume", tr.resume, "resume from --out and its .state sidecar");
  cmd_train->add_option("--out", tr.out, "checkpoint output path")->required();
  cmd_train->add_option("--log", tr.log, "training log CSV (default <out>.log.csv)");

  EvalArgs ev;
  auto* cmd_eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset split");
  cmd_eval->add_option("--data", ev.data, "dataset file")->required();
  cmd_eval->add_option("--checkpoint", ev.checkpoint, "trained checkpoint")->required();
  cmd_eval->add_option("--eta", ev.eta, "expected eta; must match the checkpoint");
  cmd_eval->add_option("--split", ev.split, "train|val|test");
  cmd_eval->add_option("--report", ev.report, "per-sample NMSE CSV")->required();
  cmd_eval->add_option("--codewords", ev.codewords, "also write the split's codewords here");

  FlopsArgs fl;
  auto* cmd_flops = app.add_subcommand("flops", "Analytic per-layer complexity report");
  cmd_flops->add_option("--model", fl.model, "clnet|crnet-base|clnet-noattn");
  cmd_flops->add_option("--eta", fl.eta, "compression ratio");
  cmd_flops->add_option("--na", fl.na, "grid size");
  cmd_flops->add_option("--c", fl.c, "encoder width");
  cmd_flops->add_option("--cprime", fl.cprime, "decoder width");
  cmd_flops->add_option("--out", fl.out, "report CSV path")->required();

  CompareArgs cp;
  auto* cmd_cmp = app.add_subcommand("compare", "Five-ratio flop reduction table");
  cmd_cmp->add_option("--model-a", cp.model_a, "model credited with the reduction");
  cmd_cmp->add_option("--model-b", cp.model_b, "reference model");
  cmd_cmp->add_option("--na", cp.na, "grid size");
  cmd_cmp->add_option("--c", cp.c, "encoder width");
  cmd_cmp->add_option("--cprime", cp.cprime, "decoder width");
  cmd_cmp->add_option("--out", cp.out, "table CSV path")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  try {
    if (cmd_gen->parsed()) return run_gen_data(gen);
    if (cmd_train->parsed()) return run_train(tr);
    if (cmd_eval->parsed()) return run_eval(ev);
    if (cmd_flops->parsed()) return run_flops(fl);
    if (cmd_cmp->parsed()) return run_compare(cp);
  } catch (const clnet::MalformedHeader& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCorruptFile;
  } catch (const clnet::TruncatedPayload& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCorruptFile;
  } catch (const clnet::ChecksumMismatch& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitCorruptFile;
  } catch (const clnet::IoError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMissingFile;
  } catch (const clnet::TrainDiverged& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitDiverged;
  } catch (const clnet::ShapeError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitMismatch;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitUsage;
  }
  return 0;
}
