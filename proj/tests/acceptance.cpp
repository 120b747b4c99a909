// Acceptance runner: one PASS/FAIL line per criterion, exit status 0 only when
// every selected criterion passes.
//
//   acceptance [--only N]... [--seeds K] [--verbose]

#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <optional>
#include <set>

#include <CLI11.hpp>

#include "suites/augment_suite.hpp"
#include "suites/dice_suite.hpp"
#include "suites/gradient_suite.hpp"
#include "suites/routing_suite.hpp"
#include "support.hpp"

namespace mavseg::acceptance {
namespace {

namespace fs = std::filesystem;
using harness::DatasetScore;
using harness::ExperimentConfig;
using suites::fmt;

// Pass thresholds.
constexpr double kMinUnseenGain = 0.05;
constexpr double kMaxSeenGap = 0.03;
constexpr double kFinetuneBand = 0.02;
constexpr double kAblationTie = 1e-3;

// Time budgets in seconds.
constexpr double kGradientBudget = 120;
constexpr double kSuiteBudget = 60;
constexpr double kEndToEndBudget = 20 * 60;

// Desk-scale experiment settings shared by criteria 5 to 7.
struct Scale {
  std::size_t train_cases = 48;
  std::size_t heldout_cases = 12;
  std::size_t target_cases = 16;
  std::size_t epochs = 100;
  std::size_t finetune_epochs = 20;
  std::size_t ablation_cases = 24;
  std::size_t ablation_epochs = 40;
  std::size_t levels = 2;
  std::size_t base_features = 8;
  std::size_t crop = 16;
  double lr = 3e-3;
};

struct Options {
  std::set<int> only;
  std::size_t seeds = 3;
  bool verbose = false;
};

void line(int criterion, bool pass, const std::string& what, const std::string& detail) {
  std::printf("criterion %d %s: %s (%s)\n", criterion, pass ? "PASS" : "FAIL", what.c_str(), detail.c_str());
  std::fflush(stdout);
}

std::string failures(const suites::SuiteResult& r) {
  return r.pass() ? "" : "; first failure: " + r.failures.front();
}

bool suite_line(int criterion, const std::string& what, const suites::SuiteResult& r, double budget) {
  const bool ok = r.pass() && r.seconds < budget;
  line(criterion, ok, what,
       std::to_string(r.checks) + " checks, " + fmt("%.1f s", r.seconds) + " of " + fmt("%.0f s", budget) + failures(r));
  return ok;
}

/// Phantom datasets and trained source models, built on first use.
class World {
public:
  World(const Scale& scale, bool verbose) : scale_(scale), verbose_(verbose) {}

  const fs::path& root() const { return dir_.path(); }

  fs::path train_dir() {
    generate();
    return dir_ / "train";
  }
  const DatasetCollection& train_data() { return prepared(train_data_, train_dir()); }
  const DatasetCollection& ablation_data() { return prepared(ablation_data_, ablation_dir()); }
  const Dataset& heldout() {
    generate();
    if (!heldout_) heldout_ = load_dataset(dir_ / "heldout");
    return *heldout_;
  }
  const Dataset& target() {
    generate();
    if (!target_) target_ = load_dataset(dir_ / "target");
    return *target_;
  }

  fs::path ablation_dir() {
    generate();
    return dir_ / "ablation";
  }

  ExperimentConfig config(nn::Variant variant, std::uint64_t seed, std::size_t epochs, const fs::path& train) {
    ExperimentConfig c;
    c.datasets = {{train, harness::DatasetRole::Train}};
    c.variant = variant;
    c.unet.levels = scale_.levels;
    c.unet.base_features = scale_.base_features;
    c.epochs = epochs;
    c.crop = {scale_.crop, scale_.crop, scale_.crop};
    c.lr = nn::LrSchedule::for_epochs(epochs, scale_.lr, scale_.lr / 10);
    c.seed = seed;
    return c;
  }

  /// Path or standard model trained on the P1/P2 set; reused across criteria.
  const nn::Checkpoint& source(nn::Variant variant, std::uint64_t seed) {
    const auto key = std::make_pair(static_cast<int>(variant), seed);
    if (auto it = sources_.find(key); it != sources_.end()) return it->second;
    log("training " + std::string(nn::to_string(variant)) + " seed " + std::to_string(seed));
    auto r = harness::train(config(variant, seed, scale_.epochs, train_dir()), train_data());
    return sources_.emplace(key, std::move(r.checkpoint)).first->second;
  }

  void log(const std::string& s) const {
    if (verbose_) std::fprintf(stderr, "  %s\n", s.c_str());
  }

  const Scale& scale() const { return scale_; }

private:
  static const DatasetCollection& prepared(std::optional<DatasetCollection>& slot, const fs::path& dir) {
    if (!slot) {
      slot.emplace();
      slot->datasets.push_back(harness::prepare_dataset(load_dataset(dir)));
    }
    return *slot;
  }

  void generate() {
    if (generated_) return;
    phantom::PhantomSpec spec;
    const std::vector<phantom::ModalityProfile> with_unseen{phantom::profile_p1(), phantom::unseen_profile()};
    phantom::gen_dataset("train", spec, phantom::train_profiles(), scale_.train_cases, {1.0, 0.0}, dir_ / "train", 101);
    phantom::gen_dataset("heldout", spec, with_unseen, scale_.heldout_cases, {0.0, 1.0}, dir_ / "heldout", 202);
    phantom::gen_dataset("target", spec, with_unseen, scale_.target_cases, {0.5, 0.5}, dir_ / "target", 303);
    phantom::gen_dataset("ablation", spec, phantom::train_profiles(), scale_.ablation_cases, {1.0, 0.0}, dir_ / "ablation", 404);
    generated_ = true;
  }

  Scale scale_;
  bool verbose_;
  mavseg::testing::TempDir dir_;
  bool generated_ = false;
  std::optional<DatasetCollection> train_data_, ablation_data_;
  std::optional<Dataset> heldout_, target_;
  std::map<std::pair<int, std::uint64_t>, nn::Checkpoint> sources_;
};

bool unseen_gain(World& w, const Options& o) {
  suites::Stopwatch sw;
  double gain = 0, path_seen = 0, standard_seen = 0;
  for (std::uint64_t seed = 0; seed < o.seeds; ++seed) {
    const auto p = harness::evaluate_any(w.source(nn::Variant::AgnosticPath, seed), w.heldout(), {}, false, seed);
    const auto s = harness::evaluate_any(w.source(nn::Variant::Standard, seed), w.heldout(), {}, false, seed);
    w.log("seed " + std::to_string(seed) + ": path " + fmt("%.3f", p.mean_not_used) + " -> " + fmt("%.3f", *p.mean_used) +
          ", standard " + fmt("%.3f", s.mean_not_used));
    gain += *p.mean_used - p.mean_not_used;
    path_seen += p.mean_not_used;
    standard_seen += s.mean_not_used;
  }
  const double n = static_cast<double>(o.seeds);
  gain /= n;
  const double gap = std::abs(path_seen - standard_seen) / n;
  const double secs = sw.seconds();
  const bool ok = gain >= kMinUnseenGain && gap <= kMaxSeenGap && secs < kEndToEndBudget;
  line(5, ok, "unseen modality in the agnostic slot",
       "gain " + fmt("%+.3f", gain) + " (need >= " + fmt("%.2f", kMinUnseenGain) + "), seen-only gap to standard " +
           fmt("%.3f", gap) + " (need <= " + fmt("%.2f", kMaxSeenGap) + "), path " + fmt("%.3f", path_seen / n) +
           " vs standard " + fmt("%.3f", standard_seen / n) + ", " + fmt("%.0f s", secs));
  return ok;
}

bool finetune_order(World& w, const Options& o) {
  using harness::InitMode;
  const InitMode modes[] = {InitMode::PretrainedPath, InitMode::RandomPath, InitMode::RandomChannel};
  std::map<InitMode, double> mean;
  for (std::uint64_t seed = 0; seed < o.seeds; ++seed)
    for (auto mode : modes) {
      harness::FinetuneConfig fc;
      fc.source = w.source(mode == InitMode::PretrainedPath ? nn::Variant::AgnosticPath : nn::Variant::Standard, seed);
      fc.target = w.target();
      fc.agnostic_modality = phantom::unseen_profile().name;
      fc.init = mode;
      fc.epochs = w.scale().finetune_epochs;
      fc.lr = nn::LrSchedule::for_epochs(fc.epochs, w.scale().lr, w.scale().lr / 10);
      fc.seed = seed;
      const double d = *harness::finetune(fc).score.mean_used;
      w.log(std::string(to_string(mode)) + " seed " + std::to_string(seed) + ": " + fmt("%.3f", d));
      mean[mode] += d / static_cast<double>(o.seeds);
    }
  const double pp = mean[InitMode::PretrainedPath], rp = mean[InitMode::RandomPath], rc = mean[InitMode::RandomChannel];
  const bool ok = pp >= rp - kFinetuneBand && rp >= rc - kFinetuneBand && pp > rp && pp > rc;
  line(6, ok, "fine-tuning order pretrained_path > random_path >= random_channel",
       "pretrained_path " + fmt("%.3f", pp) + ", random_path " + fmt("%.3f", rp) + ", random_channel " + fmt("%.3f", rc) +
           ", band " + fmt("%.2f", kFinetuneBand));
  return ok;
}

bool ablation_grid(World& w, const Options& o) {
  using harness::AblationMode;
  using harness::AblationRow;
  std::map<std::pair<AblationRow, AblationMode>, double> mean;
  bool shape_ok = true;
  for (std::uint64_t seed = 0; seed < o.seeds; ++seed) {
    const auto base = w.config(nn::Variant::AgnosticPath, seed, w.scale().ablation_epochs, w.ablation_dir());
    const auto table = harness::ablation_run(base, w.ablation_data(), w.heldout(), {}, [&](AblationRow r, AblationMode m) {
      w.log("ablation seed " + std::to_string(seed) + ": " + std::string(to_string(r)) + " / " + std::string(to_string(m)));
    });
    shape_ok = shape_ok && table.cells.size() == harness::kAblationRows.size() * harness::kAblationModes.size();
    for (auto& c : table.cells) {
      const bool applicable = harness::ablation_cell_applicable(c.row, c.mode);
      shape_ok = shape_ok && applicable == c.score.has_value();
      if (c.score) mean[std::make_pair(c.row, c.mode)] += *c.score->mean_used / static_cast<double>(o.seeds);
    }
    if (seed == 0 && o.verbose) std::fprintf(stderr, "%s", harness::ablation_table(table).c_str());
  }
  bool worst = true;
  std::string detail;
  for (auto mode : harness::kAblationModes) {
    const double none = mean[std::make_pair(AblationRow::NoAugs, mode)];
    double best_other = -1;
    std::string below;
    for (auto row : harness::kAblationRows) {
      if (row == AblationRow::NoAugs || !harness::ablation_cell_applicable(row, mode)) continue;
      const double v = mean[std::make_pair(row, mode)];
      best_other = std::max(best_other, v);
      if (none > v + kAblationTie) {
        worst = false;
        below += std::string(below.empty() ? "" : ",") + std::string(to_string(row)) + " " + fmt("%.3f", v);
      }
    }
    detail += std::string(to_string(mode)) + ": no_augs " + fmt("%.3f", none) + " best " + fmt("%.3f", best_other) +
              (below.empty() ? "" : " below " + below) + "; ";
  }
  detail += shape_ok ? "grid 6x2 with uniform lesion_switch N/A" : "grid shape wrong";
  const bool ok = shape_ok && worst;
  line(7, ok, "ablation grid, no augmentation worst or tied", detail);
  return ok;
}

std::string file_bytes(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  if (!f) return {};
  return {std::istreambuf_iterator<char>(f), {}};
}

bool determinism(World& w) {
  const fs::path root = w.root() / "determinism";
  fs::create_directories(root);
  phantom::PhantomSpec spec;
  spec.dims = {16, 16, 16};
  spec.lesion_radius = {1.0, 2.0};
  phantom::gen_dataset("train", spec, phantom::train_profiles(), 6, {1.0, 0.0}, root / "train", 7);
  phantom::gen_dataset("heldout", spec, {phantom::profile_p1(), phantom::unseen_profile()}, 3, {0.0, 1.0}, root / "heldout", 8);
  std::ofstream(root / "config.json") << nlohmann::json{
      {"datasets", {{{"path", "train"}, {"role", "train"}}, {{"path", "heldout"}, {"role", "heldout"}}}},
      {"variant", "agnostic-path"},
      {"unet", {{"levels", 2}, {"base_features", 4}}},
      {"epochs", 3},
      {"crop_size", 8},
      {"seed", 5}}.dump(2);
  std::vector<std::string> problems;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = "'" MAVSEG_CLI "' train --quiet --config '" + (root / "config.json").string() + "' --out '" +
                            (root / run).string() + "' > /dev/null";
    const int status = std::system(cmd.c_str());
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) problems.push_back(std::string("run ") + run + " failed");
  }
  const char* files[] = {"model.json", "weights.bin", "train_log.json", "eval_report.json"};
  for (const char* f : files) {
    const auto a = file_bytes(root / "a" / f), b = file_bytes(root / "b" / f);
    if (a.empty()) problems.push_back(std::string(f) + " missing");
    else if (a != b) problems.push_back(std::string(f) + " differs");
  }
  const bool ok = problems.empty();
  std::string detail = ok ? "checkpoint and JSON reports identical across two train runs" : "";
  for (auto& p : problems) detail += (detail.empty() ? "" : ", ") + p;
  line(8, ok, "deterministic training", detail);
  return ok;
}

int run(const Options& o) {
  auto selected = [&](int c) { return o.only.empty() || o.only.count(c) != 0; };
  World world(Scale{}, o.verbose);
  bool all = true;
  if (selected(1)) all &= suite_line(1, "gradient suite", suites::gradient_suite(), kGradientBudget);
  if (selected(2)) all &= suite_line(2, "augmentation algebra", suites::augment_suite(), kSuiteBudget);
  if (selected(3)) all &= suite_line(3, "channel routing", suites::routing_suite(), kSuiteBudget);
  if (selected(4)) all &= suite_line(4, "dice against set oracle", suites::dice_suite(), kSuiteBudget);
  if (selected(5)) all &= unseen_gain(world, o);
  if (selected(6)) all &= finetune_order(world, o);
  if (selected(7)) all &= ablation_grid(world, o);
  if (selected(8)) all &= determinism(world);
  return all ? 0 : 1;
}

}  // namespace
}  // namespace mavseg::acceptance

int main(int argc, char** argv) {
  mavseg::acceptance::Options o;
  CLI::App app{"Acceptance criteria"};
  app.add_option("--only", o.only, "Run only these criteria (repeatable)")->check(CLI::Range(1, 8));
  app.add_option("--seeds", o.seeds, "Seeds for the end-to-end criteria")->check(CLI::PositiveNumber);
  app.add_flag("--verbose", o.verbose, "Per-seed progress on stderr");
  CLI11_PARSE(app, argc, argv);
  try {
    return mavseg::acceptance::run(o);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
