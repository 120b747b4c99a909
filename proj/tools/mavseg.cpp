// Copyright (c) 2026 The mavseg Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// http://www.apache.org/licenses/LICENSE-2.0

// mavseg command line: phantom-gen | train | eval | finetune | ablate | augment.
// Exit codes: 0 success, 2 invalid input or configuration, 1 anything else.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mavseg/mavseg.hpp"

namespace fs = std::filesystem;
using namespace mavseg;
using harness::json;

namespace {

void write_json(const fs::path& path, const json& j) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path);
  if (!f) throw IoError("cannot write " + path.string());
  f << j.dump(2) << '\n';
}

harness::Assignments parse_assignments(const std::vector<std::string>& raw) {
  harness::Assignments out;
  for (auto& s : raw) {
    auto [m, target] = harness::parse_assign(s);
    require(out.emplace(m, target).second, "--assign given twice for " + m);
  }
  return out;
}

harness::EpochCallback progress(bool quiet) {
  if (quiet) return {};
  return [](std::size_t epoch, double loss) { std::fprintf(stderr, "epoch %zu  loss %.5f\n", epoch, loss); };
}

struct PhantomArgs {
  fs::path out;
  std::string name = "phantom";
  std::size_t cases = 10;
  std::uint64_t seed = 0;
  fs::path profiles;
  std::string preset = "train";
  std::size_t size = 24;
  std::vector<std::size_t> lesions{1, 3};
  std::vector<double> radius{1.5, 3.0};
  double noise = 0.05;
  double bias = 0.1;
  double train_fraction = 0.8;
};

int run_phantom(const PhantomArgs& a) {
  std::vector<phantom::ModalityProfile> profiles;
  if (!a.profiles.empty()) {
    profiles = phantom::load_profiles(a.profiles);
  } else {
    require(a.preset == "train" || a.preset == "heldout", "--preset must be 'train' or 'heldout'");
    profiles = a.preset == "train" ? phantom::train_profiles()
                                   : std::vector<phantom::ModalityProfile>{phantom::profile_p1(), phantom::unseen_profile()};
  }
  require(a.lesions.size() == 2 && a.radius.size() == 2, "--lesions and --radius take two values");
  phantom::PhantomSpec spec;
  spec.dims = {a.size, a.size, a.size};
  spec.lesion_count = {a.lesions[0], a.lesions[1]};
  spec.lesion_radius = {a.radius[0], a.radius[1]};
  spec.noise_sigma = a.noise;
  spec.bias_strength = a.bias;
  require(a.train_fraction >= 0 && a.train_fraction <= 1, "--train-fraction must be in [0,1]");
  const auto desc = phantom::gen_dataset(a.name, spec, profiles, a.cases, {a.train_fraction, 1.0 - a.train_fraction},
                                         a.out, a.seed);
  std::printf("wrote %zu cases (%zu train / %zu test) with modalities", desc.cases.size(), desc.split.train.size(),
              desc.split.test.size());
  for (auto& m : desc.modalities) std::printf(" %s", m.c_str());
  std::printf(" to %s\n", a.out.string().c_str());
  return 0;
}

int run_train(const fs::path& config_path, const fs::path& out, bool quiet) {
  const auto cfg = harness::load_config(config_path);
  const auto result = harness::train(cfg, progress(quiet));
  nn::save_checkpoint(result.checkpoint, out);
  write_json(out / "train_log.json", harness::log_json(result.log));
  harness::EvalReport report{std::string(nn::to_string(cfg.variant)), cfg.seed, {}};
  for (auto& e : cfg.datasets)
    if (e.role == harness::DatasetRole::Heldout)
      report.datasets.push_back(harness::evaluate_any(result.checkpoint, load_dataset(e.path), {}, false, cfg.seed));
  if (!report.datasets.empty()) {
    write_json(out / "eval_report.json", harness::report_json(report));
    std::cout << harness::report_table(report);
  }
  return 0;
}

int run_eval(const fs::path& model, const std::vector<fs::path>& datasets, const std::vector<std::string>& assign,
             bool no_agnostic, std::uint64_t seed, const fs::path& report_path, bool as_json) {
  const auto ckpt = nn::load_checkpoint(model);
  const auto plan = parse_assignments(assign);
  harness::EvalReport report{std::string(nn::to_string(ckpt.variant)), seed, {}};
  for (auto& d : datasets) report.datasets.push_back(harness::evaluate_any(ckpt, load_dataset(d), plan, no_agnostic, seed));
  const auto j = harness::report_json(report);
  if (!report_path.empty()) write_json(report_path, j);
  if (as_json)
    std::cout << j.dump(2) << '\n';
  else
    std::cout << harness::report_table(report);
  return 0;
}

struct FinetuneArgs {
  fs::path model, dataset, out;
  std::vector<std::string> assign;
  std::string init;
  std::size_t folds = 0;
  std::size_t epochs = 60;
  std::uint64_t seed = 0;
  bool quiet = false;
};

int run_finetune(const FinetuneArgs& a) {
  harness::FinetuneConfig fc;
  fc.source = nn::load_checkpoint(a.model);
  fc.target = load_dataset(a.dataset);
  fc.init = harness::init_mode_from_string(a.init);
  fc.folds = a.folds;
  fc.epochs = a.epochs;
  fc.seed = a.seed;
  if (fc.source.config.contains("batch_size")) fc.batch_size = fc.source.config["batch_size"].get<std::size_t>();
  if (fc.source.config.contains("lesion_bias")) fc.lesion_bias = fc.source.config["lesion_bias"].get<double>();
  for (auto& [m, target] : parse_assignments(a.assign)) {
    if (target == "agnostic") {
      require(fc.agnostic_modality.empty(), "finetune: only one modality may go to the agnostic slot");
      fc.agnostic_modality = m;
    } else {
      fc.extra_assign[m] = target;
    }
  }
  require(!fc.agnostic_modality.empty(), "finetune: --assign M=agnostic is required");
  const auto res = harness::finetune(fc, progress(a.quiet));
  harness::EvalReport report{std::string(nn::to_string(res.checkpoint.variant)), a.seed, {res.score}};
  if (!a.out.empty()) {
    nn::save_checkpoint(res.checkpoint, a.out);
    json folds = json::array();
    for (auto& f : res.folds)
      folds.push_back({{"train", f.split.train}, {"test", f.split.test}, {"log", harness::log_json(f.log)}});
    write_json(a.out / "finetune_report.json",
               {{"init", a.init}, {"report", harness::report_json(report)}, {"folds", folds}});
  }
  std::cout << "init " << a.init << "\n" << harness::report_table(report);
  return 0;
}

int run_ablate(const fs::path& config_path, const fs::path& out, const fs::path& dataset,
               const std::vector<std::string>& assign, bool quiet) {
  const auto cfg = harness::load_config(config_path);
  fs::path heldout = dataset;
  if (heldout.empty())
    for (auto& e : cfg.datasets)
      if (e.role == harness::DatasetRole::Heldout) {
        heldout = e.path;
        break;
      }
  require(!heldout.empty(), "ablate: no held-out dataset (use --dataset or a 'heldout' config entry)");
  const auto data = harness::load_training_data(cfg);
  const auto table = harness::ablation_run(cfg, data, load_dataset(heldout), parse_assignments(assign),
                                           [quiet](harness::AblationRow r, harness::AblationMode m) {
                                             if (!quiet)
                                               std::fprintf(stderr, "training %s / %s\n", std::string(to_string(r)).c_str(),
                                                            std::string(to_string(m)).c_str());
                                           });
  if (!out.empty()) write_json(out / "ablation.json", harness::ablation_json(table));
  std::cout << harness::ablation_table(table);
  return 0;
}

struct AugmentArgs {
  fs::path dataset, out, config;
  std::string case_id, source;
  std::size_t count = 4;
  std::uint64_t seed = 0;
};

int run_augment(const AugmentArgs& a) {
  const auto ds = load_dataset(a.dataset);
  const Case c = normalize_case(ds.get(a.case_id.empty() ? ds.descriptor.cases.at(0).id : a.case_id));
  const std::string source = a.source.empty() ? c.modalities().at(0) : a.source;
  require(c.has(source), "augment: modality " + source + " not in case " + c.id);
  augment::AugmentConfig cfg;
  if (!a.config.empty()) {
    std::ifstream f(a.config);
    if (!f) throw ValidationError("cannot open " + a.config.string());
    json j;
    try {
      j = json::parse(f);
    } catch (const json::parse_error& e) {
      throw ValidationError("augment config: " + std::string(e.what()));
    }
    cfg = harness::augment_from_json(j.contains("augment") ? j["augment"] : j);
  }
  std::vector<std::string> partners;
  for (auto& m : c.modalities())
    if (m != source) partners.push_back(m);
  fs::create_directories(a.out);
  json index = json::array();
  for (std::size_t i = 0; i < a.count; ++i) {
    Rng rng = make_rng(a.seed, {i});
    auto spec = augment::sample_pipeline(cfg, rng);
    if (partners.empty())
      std::erase_if(spec.steps, [](const augment::AugStep& s) {
        return s.id == augment::AugId::MixUp || s.id == augment::AugId::LesionSwitch;
      });
    const auto syn = augment::synthesize_modality(c, source, partners, spec);
    const std::string file = "aug" + std::to_string(i) + ".mvol";
    mvol::write_volume(syn.grid, a.out / file);
    index.push_back({{"file", file}, {"source", source}, {"steps", harness::pipeline_json(syn.spec)}});
  }
  mvol::write_volume(c.volume(source), a.out / "source.mvol");
  mvol::write_mask(c.lesion_mask, a.out / "lesion.mvol");
  write_json(a.out / "augment.json", {{"case", c.id}, {"source", source}, {"volumes", index}});
  std::printf("wrote %zu augmented volumes of %s/%s to %s\n", a.count, c.id.c_str(), source.c_str(), a.out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Modality-agnostic multimodal lesion segmentation toolkit"};
  app.require_subcommand(1);

  PhantomArgs pa;
  auto* pg = app.add_subcommand("phantom-gen", "Generate a synthetic phantom dataset");
  pg->add_option("--out", pa.out, "Output dataset directory")->required();
  pg->add_option("--cases", pa.cases, "Number of cases");
  pg->add_option("--seed", pa.seed, "Master seed");
  pg->add_option("--profiles", pa.profiles, "Modality profiles JSON");
  pg->add_option("--preset", pa.preset, "Built-in profiles when --profiles is absent: train (P1,P2) or heldout (P1,P3)");
  pg->add_option("--name", pa.name, "Dataset name");
  pg->add_option("--size", pa.size, "Grid edge length (voxels)");
  pg->add_option("--lesions", pa.lesions, "Lesion count range: LO HI")->expected(2);
  pg->add_option("--radius", pa.radius, "Lesion radius range in voxels: LO HI")->expected(2);
  pg->add_option("--noise", pa.noise, "Gaussian noise sigma");
  pg->add_option("--bias", pa.bias, "Bias field strength");
  pg->add_option("--train-fraction", pa.train_fraction, "Fraction of cases in the train split");

  fs::path config, out, model, report_path, dataset;
  std::vector<fs::path> datasets;
  std::vector<std::string> assign;
  bool quiet = false, no_agnostic = false, as_json = false;
  std::uint64_t seed = 0;

  auto* tr = app.add_subcommand("train", "Train a model from an experiment config");
  tr->add_option("--config", config, "Experiment config JSON")->required();
  tr->add_option("--out", out, "Checkpoint directory")->required();
  tr->add_flag("--quiet", quiet, "No per-epoch progress");

  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint with and without the unseen modality");
  ev->add_option("--model", model, "Checkpoint directory")->required();
  ev->add_option("--dataset", datasets, "Dataset directory (repeatable)")->required();
  ev->add_option("--assign", assign, "MODALITY=<channel|agnostic> (repeatable)");
  ev->add_flag("--no-agnostic", no_agnostic, "Only the scenario without the unseen modality");
  ev->add_option("--seed", seed, "Seed for the shuffle baseline");
  ev->add_option("--report", report_path, "Write the JSON report here");
  ev->add_flag("--json", as_json, "Print JSON instead of the table");

  FinetuneArgs fa;
  auto* ft = app.add_subcommand("finetune", "Fine-tune on a target dataset with one modality in the agnostic slot");
  ft->add_option("--model", fa.model, "Source checkpoint directory")->required();
  ft->add_option("--dataset", fa.dataset, "Target dataset directory")->required();
  ft->add_option("--assign", fa.assign, "MODALITY=<channel|agnostic> (repeatable)")->required();
  ft->add_option("--init", fa.init, "pretrained_path | random_path | random_channel")->required();
  ft->add_option("--folds", fa.folds, "k-fold cross-validation (0: dataset split)");
  ft->add_option("--epochs", fa.epochs, "Fine-tuning epochs");
  ft->add_option("--seed", fa.seed, "Seed");
  ft->add_option("--out", fa.out, "Write checkpoint and report here");
  ft->add_flag("--quiet", fa.quiet, "No per-epoch progress");

  auto* ab = app.add_subcommand("ablate", "Augmentation ablation grid");
  ab->add_option("--config", config, "Base experiment config JSON")->required();
  ab->add_option("--out", out, "Write ablation.json here");
  ab->add_option("--dataset", dataset, "Held-out dataset (default: the config's heldout entry)");
  ab->add_option("--assign", assign, "MODALITY=<channel|agnostic> (repeatable)");
  ab->add_flag("--quiet", quiet, "No progress output");

  AugmentArgs aa;
  auto* au = app.add_subcommand("augment", "Write synthesized modalities of one case as MVOL volumes");
  au->add_option("--dataset", aa.dataset, "Dataset directory")->required();
  au->add_option("--out", aa.out, "Output directory")->required();
  au->add_option("--case", aa.case_id, "Case id (default: first case)");
  au->add_option("--source", aa.source, "Source modality (default: first)");
  au->add_option("--config", aa.config, "Augment config JSON or experiment config");
  au->add_option("--count", aa.count, "Number of samples");
  au->add_option("--seed", aa.seed, "Seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*pg) return run_phantom(pa);
    if (*tr) return run_train(config, out, quiet);
    if (*ev) return run_eval(model, datasets, assign, no_agnostic, seed, report_path, as_json);
    if (*ft) return run_finetune(fa);
    if (*ab) return run_ablate(config, out, dataset, assign, quiet);
    if (*au) return run_augment(aa);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
