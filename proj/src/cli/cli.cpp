#include "patchsel/cli/cli.hpp"

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "patchsel/corpus/manifest.hpp"
#include "patchsel/corpus/pnm.hpp"
#include "patchsel/error.hpp"
#include "patchsel/eval/evaluate.hpp"
#include "patchsel/eval/histogram.hpp"
#include "patchsel/eval/maps.hpp"
#include "patchsel/training/trainer.hpp"

namespace patchsel::cli {

namespace fs = std::filesystem;

namespace {

std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

void write_or_print(const std::string& path, const std::string& text, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write '" + path + "'");
  f << text;
}

struct GenArgs {
  std::string out;
  int n_train = 200, n_val = 40, n_test = 40;
  double hard_frac = 0.2;
  std::uint64_t seed = 0;
  int height = 192, width = 192;
};

struct TrainArgs {
  std::string config;
  std::vector<std::string> corpora;
  std::string out;
  std::string resume;
  std::vector<std::string> overrides;
  int stop_after = -1;
  bool verbose = false;
};

struct EvalArgs {
  std::string ckpt;
  std::string baseline;
  std::string corpus;
  std::vector<double> sigmas{5.0, 10.0, 15.0};
  std::string split = "test";
  std::uint64_t eval_seed = 20200;
  std::string out;
  std::string images_out;
};

struct HistArgs {
  std::string ckpt;
  std::string baseline;
  std::string corpus;
  std::size_t bins = 20;
  double sigma = 0.0;
  std::string split = "test";
  std::uint64_t eval_seed = 20200;
  int patch_size = 64;
  std::string subset = "all";
  std::string out;
};

struct MapsArgs {
  std::string ckpt;
  std::string corpus;
  std::string out;
  double sigma = 10.0;
  std::string split = "test";
  std::uint64_t eval_seed = 20200;
};

std::unique_ptr<eval::Restorer> make_restorer(const std::string& ckpt, const std::string& baseline) {
  if (!baseline.empty()) {
    if (baseline != "bilinear") throw UsageError("unknown baseline '" + baseline + "' (expected bilinear)");
    return std::make_unique<eval::BilinearRestorer>();
  }
  return eval::CheckpointRestorer::load(ckpt);
}

int run_gen(const GenArgs& a, std::ostream& out) {
  corpus::CorpusOptions o;
  o.n_train = a.n_train;
  o.n_val = a.n_val;
  o.n_test = a.n_test;
  o.hard_fraction = a.hard_frac;
  o.seed = a.seed;
  o.height = a.height;
  o.width = a.width;
  const auto m = corpus::generate_corpus(a.out, o);
  out << "wrote " << m.entries.size() << " images to " << a.out << "\n";
  return 0;
}

int run_train(const TrainArgs& a, std::ostream& out) {
  training::TrainState state;
  if (!a.resume.empty()) {
    if (!a.config.empty() || !a.overrides.empty()) {
      throw UsageError("--resume takes the configuration from the checkpoint; drop --config/--set");
    }
    state = training::TrainState::from_checkpoint(training::load_checkpoint(a.resume));
  } else {
    std::string text;
    if (!a.config.empty()) {
      std::ifstream f(a.config);
      if (!f) throw IoError("cannot open config '" + a.config + "'");
      std::stringstream ss;
      ss << f.rdbuf();
      text = ss.str();
    }
    for (const auto& kv : a.overrides) text += "\n" + kv;
    state = training::TrainState::create(training::TrainRun::parse(text));
  }
  std::vector<corpus::CorpusManifest> sources;
  for (const auto& c : a.corpora) sources.push_back(corpus::read_manifest(c));
  const auto val = eval::load_eval_set(sources.front(), corpus::Split::kVal);
  training::TrainOptions opts;
  opts.out_dir = a.out;
  opts.stop_after_epoch = a.stop_after;
  opts.verbose = a.verbose;
  const auto result = training::train_loop(state, sources, val, opts);
  out << "trained " << result.steps << " steps; last checkpoint " << result.final_checkpoint << "\n";
  return 0;
}

int run_eval(const EvalArgs& a, std::ostream& out) {
  auto restorer = make_restorer(a.ckpt, a.baseline);
  const auto manifest = corpus::read_manifest(a.corpus);
  const auto set = eval::load_eval_set(manifest, corpus::parse_split(a.split));
  eval::EvalOptions o;
  o.sigmas = a.sigmas;
  o.eval_seed = a.eval_seed;
  auto report = eval::evaluate(*restorer, set, o, a.corpus + ":" + a.split);
  report.timestamp = utc_now();
  write_or_print(a.out, report.to_tsv(), out);
  if (!a.images_out.empty()) write_or_print(a.images_out, report.images_tsv(), out);
  return 0;
}

int run_hist(const HistArgs& a, std::ostream& out) {
  auto restorer = make_restorer(a.ckpt, a.baseline);
  const auto manifest = corpus::read_manifest(a.corpus);
  const auto set = eval::load_eval_set(manifest, corpus::parse_split(a.split));
  const auto p = eval::patch_psnrs(*restorer, set, a.sigma, a.eval_seed, a.patch_size);
  std::vector<double> values;
  if (a.subset != "hard") values.insert(values.end(), p.easy.begin(), p.easy.end());
  if (a.subset != "easy") values.insert(values.end(), p.hard.begin(), p.hard.end());
  write_or_print(a.out, eval::make_histogram(values, a.bins).to_tsv(), out);
  return 0;
}

int run_maps(const MapsArgs& a, std::ostream& out) {
  const auto ckpt = training::load_checkpoint(a.ckpt);
  if (!ckpt.has_prefix("patchnet.")) throw ConfigError("checkpoint '" + a.ckpt + "' has no PatchNet weights");
  auto state = training::TrainState::from_checkpoint(ckpt);
  const auto manifest = corpus::read_manifest(a.corpus);
  const auto set = eval::load_eval_set(manifest, corpus::parse_split(a.split));
  const auto maps = eval::export_maps(state, set, a.out, a.sigma, a.eval_seed);
  out << "wrote " << 2 * maps.size() << " files to " << a.out << "\n";
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Patch-trainability selection for joint demosaicing and denoising"};
  app.require_subcommand(1);

  GenArgs gen;
  auto* g = app.add_subcommand("gen-corpus", "Render a synthetic easy/hard corpus");
  g->add_option("--out", gen.out, "Output directory")->required();
  g->add_option("--n-train", gen.n_train, "Training images")->capture_default_str();
  g->add_option("--n-val", gen.n_val, "Validation images")->capture_default_str();
  g->add_option("--n-test", gen.n_test, "Test images")->capture_default_str();
  g->add_option("--hard-frac", gen.hard_frac, "Fraction of hard images per split")->capture_default_str();
  g->add_option("--seed", gen.seed, "Corpus seed")->capture_default_str();
  g->add_option("--height", gen.height, "Image height")->capture_default_str();
  g->add_option("--width", gen.width, "Image width")->capture_default_str();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train RestoreNet (and PatchNet in patchnet mode)");
  t->add_option("--config", tr.config, "Run configuration (key = value lines)");
  t->add_option("--corpus", tr.corpora, "Corpus directory; repeat for several training corpora")->required();
  t->add_option("--out", tr.out, "Output directory for checkpoints and metrics.tsv")->required();
  t->add_option("--resume", tr.resume, "Continue from a checkpoint");
  t->add_option("--set", tr.overrides, "Extra 'key = value' config line; repeatable");
  t->add_option("--stop-after", tr.stop_after, "Stop once this many epochs are complete");
  t->add_flag("--verbose", tr.verbose, "Print each metrics line to stderr");

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "PSNR report of a checkpoint on a corpus split");
  auto* e_ckpt = e->add_option("--ckpt", ev.ckpt, "Checkpoint file");
  auto* e_base = e->add_option("--baseline", ev.baseline, "Use a non-learned baseline (bilinear)");
  e_ckpt->excludes(e_base);
  e->add_option("--corpus", ev.corpus, "Corpus directory")->required();
  e->add_option("--sigmas", ev.sigmas, "Noise levels on the 8-bit scale")->delimiter(',')->capture_default_str();
  e->add_option("--split", ev.split, "train|val|test")->capture_default_str();
  e->add_option("--eval-seed", ev.eval_seed, "Seed of the evaluation noise")->capture_default_str();
  e->add_option("--out", ev.out, "Report file (default: stdout)");
  e->add_option("--images", ev.images_out, "Per-image score file");

  HistArgs hi;
  auto* h = app.add_subcommand("hist", "Per-patch PSNR histogram");
  auto* h_ckpt = h->add_option("--ckpt", hi.ckpt, "Checkpoint file");
  auto* h_base = h->add_option("--baseline", hi.baseline, "Use a non-learned baseline (bilinear)");
  h_ckpt->excludes(h_base);
  h->add_option("--corpus", hi.corpus, "Corpus directory")->required();
  h->add_option("--bins", hi.bins, "Number of bins over [0, 100] dB")->capture_default_str();
  h->add_option("--sigma", hi.sigma, "Noise level on the 8-bit scale")->capture_default_str();
  h->add_option("--split", hi.split, "train|val|test")->capture_default_str();
  h->add_option("--subset", hi.subset, "all|easy|hard")->check(CLI::IsMember({"all", "easy", "hard"}))
      ->capture_default_str();
  h->add_option("--patch-size", hi.patch_size, "Patch size")->capture_default_str();
  h->add_option("--eval-seed", hi.eval_seed, "Seed of the evaluation noise")->capture_default_str();
  h->add_option("--out", hi.out, "Output file (default: stdout)");

  MapsArgs mp;
  auto* m = app.add_subcommand("maps", "Export trainability maps and overlays");
  m->add_option("--ckpt", mp.ckpt, "Checkpoint of a patchnet run")->required();
  m->add_option("--corpus", mp.corpus, "Corpus directory")->required();
  m->add_option("--out", mp.out, "Output directory")->required();
  m->add_option("--sigma", mp.sigma, "Noise level on the 8-bit scale")->capture_default_str();
  m->add_option("--split", mp.split, "train|val|test")->capture_default_str();
  m->add_option("--eval-seed", mp.eval_seed, "Seed of the evaluation noise")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& pe) {
    err << "error: " << pe.what() << "\nrun with --help for usage\n";
    return 1;
  }

  try {
    if (*g) return run_gen(gen, out);
    if (*t) return run_train(tr, out);
    if (*e) {
      if (ev.ckpt.empty() == ev.baseline.empty()) throw UsageError("eval needs exactly one of --ckpt or --baseline");
      return run_eval(ev, out);
    }
    if (*h) {
      if (hi.ckpt.empty() == hi.baseline.empty()) throw UsageError("hist needs exactly one of --ckpt or --baseline");
      return run_hist(hi, out);
    }
    if (*m) return run_maps(mp, out);
  } catch (const UsageError& ue) {
    err << "error: " << ue.what() << "\n";
    return 1;
  } catch (const std::exception& ex) {
    err << "error: " << ex.what() << "\n";
    return 2;
  }
  return 1;
}

}  // namespace patchsel::cli
