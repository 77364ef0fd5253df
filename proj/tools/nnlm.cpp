// Command-line front end: synth | convert | validate | fingerprint | plan | preprocess | train |
// predict | evaluate | report.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <sstream>

#include "nnlm/convert.hpp"
#include "nnlm/dataset.hpp"
#include "nnlm/error.hpp"
#include "nnlm/fingerprint.hpp"
#include "nnlm/folds.hpp"
#include "nnlm/inference.hpp"
#include "nnlm/log.hpp"
#include "nnlm/metrics.hpp"
#include "nnlm/plan.hpp"
#include "nnlm/preprocess.hpp"
#include "nnlm/report.hpp"
#include "nnlm/synth.hpp"
#include "nnlm/trainer.hpp"
#include "nnlm/volume_io.hpp"

using namespace nnlm;

namespace {

struct Common {
  std::string results;
  std::string dataset;
  std::string name;
  std::string config;
  std::uint64_t seed = 0;
};

fs::path results_root(const Common& c) {
  if (!c.results.empty()) return c.results;
  if (const char* env = std::getenv("NNLM_RESULTS"); env && *env) return env;
  return "results";
}

std::string dataset_key(const Common& c) {
  if (!c.name.empty()) return c.name;
  if (c.dataset.empty()) throw ConfigError("--dataset is required");
  return fs::weakly_canonical(c.dataset).filename().string();
}

fs::path dataset_results(const Common& c) { return results_root(c) / dataset_key(c); }

Json read_overrides(const Common& c) {
  if (c.config.empty()) return Json::object();
  return read_json_file(c.config);
}

/// The dataset-level plan with optional --config overrides applied on top.
Plan load_plan(const Common& c) {
  const fs::path p = dataset_results(c) / "plan.json";
  if (!fs::exists(p)) throw ConfigError("no plan at " + p.string() + "; run `nnlm plan` first");
  Plan plan = plan_from_json(read_json_file(p));
  apply_overrides(plan, read_overrides(c));
  plan.validate();
  return plan;
}

fs::path plan_dir(const Common& c, const Plan& plan) { return dataset_results(c) / plan.hash(); }

std::string fold_name(int fold) { return fold < 0 ? "fold_all" : "fold_" + std::to_string(fold); }

int parse_fold(const std::string& s) {
  if (s == "all") return -1;
  try {
    std::size_t used = 0;
    const int f = std::stoi(s, &used);
    if (used == s.size() && f >= 0) return f;
  } catch (const std::exception&) {
  }
  throw ConfigError("fold must be a non-negative integer or 'all', got '" + s + "'");
}

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ConfigError("not a number: '" + item + "'");
    }
  }
  return out;
}

void add_common(CLI::App* sub, Common& c, bool need_dataset = true) {
  sub->add_option("--dataset", c.dataset, "Dataset directory (dataset.json, imagesTr, landmarksTr)")
      ->required(need_dataset)
      ->check(CLI::ExistingDirectory);
  sub->add_option("--results", c.results, "Results root (default $NNLM_RESULTS or ./results)");
  sub->add_option("--name", c.name, "Results key for the dataset (default: directory name)");
  sub->add_option("--config", c.config, "JSON file of plan overrides")->check(CLI::ExistingFile);
  sub->add_option("--seed", c.seed, "Global seed");
}

int cmd_synth(const SynthOptions& opt, const std::string& out) {
  synth_generate(opt, out);
  std::cout << "wrote " << opt.cases << " cases to " << out << "\n";
  return 0;
}

int cmd_validate(const Common& c) {
  const DatasetInfo info = read_dataset_info(c.dataset);
  const auto cases = list_cases(c.dataset, Split::train);
  std::optional<Vec3> spacing;
  const fs::path plan_file = dataset_results(c) / "plan.json";
  if (fs::exists(plan_file)) spacing = load_plan(c).target_spacing;
  const ValidationReport rep = validate_dataset(cases, info.classes, spacing);
  std::cout << rep.to_json().dump(2) << "\n";
  return rep.ok() ? 0 : 1;
}

int cmd_fingerprint(const Common& c) {
  const DatasetInfo info = read_dataset_info(c.dataset);
  const Fingerprint fp = compute_fingerprint(list_cases(c.dataset, Split::train), info, c.seed);
  const fs::path out = dataset_results(c) / "fingerprint.json";
  fs::create_directories(out.parent_path());
  write_json_file(out, fingerprint_to_json(fp));
  std::cout << out.string() << "\n";
  return 0;
}

int cmd_plan(const Common& c) {
  const fs::path fp_file = dataset_results(c) / "fingerprint.json";
  if (!fs::exists(fp_file)) throw ConfigError("no fingerprint at " + fp_file.string() + "; run `nnlm fingerprint` first");
  const DatasetInfo info = read_dataset_info(c.dataset);
  const Fingerprint fp = fingerprint_from_json(read_json_file(fp_file));
  const Plan plan = derive_plan(fp, info.classes, read_overrides(c));
  const Json pj = plan_to_json(plan);
  write_json_file(dataset_results(c) / "plan.json", pj);
  fs::create_directories(plan_dir(c, plan));
  write_json_file(plan_dir(c, plan) / "plan.json", pj);
  const Splits s = split_folds(fp.case_ids, plan.fold_count, c.seed);
  write_splits(s, dataset_results(c) / "splits.json");
  std::cout << "plan " << plan.hash() << ": patch " << plan.patch_size[0] << "x" << plan.patch_size[1] << "x"
            << plan.patch_size[2] << ", pools " << plan.num_pool_per_axis[0] << "," << plan.num_pool_per_axis[1]
            << "," << plan.num_pool_per_axis[2] << "\n";
  return 0;
}

int cmd_preprocess(const Common& c, bool overwrite) {
  const Plan plan = load_plan(c);
  write_json_file(plan_dir(c, plan) / "plan.json", plan_to_json(plan));
  preprocess_dataset(list_cases(c.dataset, Split::train), plan, plan_dir(c, plan) / "preprocessed", overwrite);
  std::cout << (plan_dir(c, plan) / "preprocessed").string() << "\n";
  return 0;
}

int cmd_train(const Common& c, const std::string& fold_s, std::optional<int> epochs, std::optional<int> iters,
              bool no_augment) {
  const Plan plan = load_plan(c);
  const int fold = parse_fold(fold_s);
  const fs::path cache = plan_dir(c, plan) / "preprocessed";
  if (!fs::exists(cache)) throw ConfigError("no preprocessed data at " + cache.string() + "; run `nnlm preprocess`");
  const Splits splits = read_splits(dataset_results(c) / "splits.json");
  std::vector<TrainingCase> train_set;
  for (const auto& id : training_cases(splits, fold)) train_set.emplace_back(load_preprocessed(cache, id));
  std::vector<PreprocessedCase> val;
  if (fold >= 0)
    for (const auto& id : splits[fold]) val.push_back(load_preprocessed(cache, id));
  TrainOptions opt;
  opt.seed = c.seed;
  opt.epochs = epochs;
  opt.iterations_per_epoch = iters;
  opt.verbose = true;
  if (no_augment) opt.augment = AugmentConfig::none();
  const fs::path out = plan_dir(c, plan) / fold_name(fold);
  const TrainState st = nnlm::train(plan, train_set, val, opt, out);
  std::cout << out.string() << ": " << st.epoch << " epochs, final loss " << st.history.back().loss_mean;
  if (std::isfinite(st.validation_mre)) std::cout << ", validation MRE " << st.validation_mre << " mm";
  std::cout << "\n";
  return 0;
}

int cmd_predict(const Common& c, const std::string& folds_s, const std::string& input, std::string out,
                const std::string& which, bool save_heatmaps) {
  const Plan plan = load_plan(c);
  std::vector<UNet> nets;
  std::stringstream ss(folds_s);
  std::string f;
  while (std::getline(ss, f, ',')) {
    const fs::path ck = plan_dir(c, plan) / fold_name(parse_fold(f)) / ("checkpoint_" + which);
    nets.push_back(load_checkpoint(ck).net);
  }
  if (nets.empty()) throw ConfigError("no fold given");
  const fs::path in_dir = input.empty() ? fs::path(c.dataset) / "imagesTs" : fs::path(input);
  if (out.empty()) out = (plan_dir(c, plan) / "predictions").string();
  std::vector<fs::path> images;
  if (fs::is_directory(in_dir))
    for (const auto& e : fs::directory_iterator(in_dir))
      if (e.is_regular_file() && is_volume_file(e.path())) images.push_back(e.path());
  std::sort(images.begin(), images.end());
  if (images.empty()) throw IoError("no images in " + in_dir.string());
  fs::create_directories(out);
  for (const auto& img : images) {
    const std::string id = case_id_from_filename(img);
    const Volume3D pre = preprocess_image(read_volume(img), plan);
    HeatmapVolume sum;
    for (auto& net : nets) {
      HeatmapVolume h = sliding_window_predict(make_predictor(net), pre, plan);
      if (sum.data.empty()) {
        sum = std::move(h);
      } else {
        for (std::size_t i = 0; i < sum.data.size(); ++i) sum.data[i] += h.data[i];
      }
    }
    if (nets.size() > 1)
      for (auto& v : sum.data) v /= static_cast<float>(nets.size());
    write_landmarks(extract_landmarks(sum, plan.classes, id), fs::path(out) / (id + ".json"));
    if (save_heatmaps) {
      for (int ch = 0; ch < sum.channels; ++ch) {
        const auto span = sum.channel(ch);
        write_volume(Volume3D(sum.geometry, std::vector<float>(span.begin(), span.end())),
                     fs::path(out) / (id + "_heatmap_" + plan.classes[ch] + ".nii.gz"));
      }
    }
  }
  std::cout << "wrote " << images.size() << " predictions to " << out << "\n";
  return 0;
}

int cmd_evaluate(const std::string& gt, const std::string& pred, const std::string& thresholds,
                 const std::string& biometry, const std::string& dataset, std::optional<double> voxel,
                 const std::string& out) {
  std::vector<BiometryMeasure> spec;
  if (!biometry.empty()) {
    spec = read_biometry_spec(biometry);
  } else if (!dataset.empty()) {
    spec = read_dataset_info(dataset).biometry;
  }
  const std::vector<double> t = parse_list(thresholds);
  const EvalReport rep = evaluate_directories(gt, pred, t, spec, voxel);
  const std::string tables = render_tables(rep);
  const fs::path dir = out.empty() ? fs::path(pred) : fs::path(out);
  fs::create_directories(dir);
  write_json_file(dir / "results.json", rep.to_json());
  write_file_atomic(dir / "results.md", tables);
  std::cout << tables;
  return 0;
}

int cmd_report(const std::string& results, const std::string& out, const std::string& dataset,
               const std::string& pred_dir, int max_cases, double ppm) {
  const Json j = read_json_file(results);
  EvalReport rep;
  rep.unit = j.at("unit").get<std::string>();
  rep.thresholds = j.at("thresholds").get<std::vector<double>>();
  rep.mre = j.at("mre").get<double>();
  rep.std = j.at("std").get<double>();
  for (const auto& [k, v] : j.at("sdr").items()) rep.sdr.push_back(v.get<double>());
  for (const auto& r : j.at("per_class")) {
    ClassRow row{r.at("name").get<std::string>(), r.at("count").get<std::size_t>(), r.at("mre").get<double>(),
                 r.at("std").get<double>(), {}};
    for (const auto& [k, v] : r.at("sdr").items()) row.sdr.push_back(v.get<double>());
    rep.classes.push_back(row);
  }
  for (const auto& b : j.value("biometry", Json::array()))
    rep.biometry.push_back({b.at("name").get<std::string>(), b.at("mean_abs_error").get<double>(), b.at("std").get<double>()});
  const std::string tables = render_tables(rep);
  fs::create_directories(out);
  write_file_atomic(fs::path(out) / "tables.md", tables);
  std::vector<fs::path> figures;
  if (!dataset.empty() && !pred_dir.empty()) {
    int n = 0;
    for (const auto& c : j.at("cases")) {
      if (n++ >= max_cases) break;
      const std::string id = c.at("case_id").get<std::string>();
      fs::path img;
      for (const char* split : {"imagesTs", "imagesTr"})
        for (const char* ext : {".nii.gz", ".nii", ".raw"})
          if (img.empty() && fs::exists(fs::path(dataset) / split / (id + ext))) img = fs::path(dataset) / split / (id + ext);
      fs::path gt;
      for (const char* split : {"landmarksTs", "landmarksTr"})
        if (gt.empty() && fs::exists(fs::path(dataset) / split / (id + ".json"))) gt = fs::path(dataset) / split / (id + ".json");
      if (img.empty() || gt.empty()) {
        log_warn("no image or ground truth for case " + id);
        continue;
      }
      OverlayStyle style;
      style.pixels_per_mm = ppm;
      const auto figs = render_overlays(read_volume(img), read_landmarks(gt),
                                        read_landmarks(fs::path(pred_dir) / (id + ".json")), fs::path(out) / "figures", style);
      figures.insert(figures.end(), figs.begin(), figs.end());
    }
  }
  write_index(out, tables, figures);
  std::cout << (fs::path(out) / "index.md").string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Heatmap-regression landmark detection: data, planning, training, inference, evaluation"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Only print warnings");

  SynthOptions synth;
  std::string synth_out;
  std::vector<int> synth_shape{64, 64, 64};
  auto* s_synth = app.add_subcommand("synth", "Generate a synthetic phantom dataset");
  s_synth->add_option("--out", synth_out, "Output dataset directory")->required();
  s_synth->add_option("--cases", synth.cases, "Number of cases")->check(CLI::PositiveNumber);
  s_synth->add_option("--test-cases", synth.test_cases, "Cases placed in imagesTs/landmarksTs")->check(CLI::NonNegativeNumber);
  s_synth->add_option("--shape", synth_shape, "Volume shape x,y,z")->delimiter(',')->expected(3);
  s_synth->add_option("--classes", synth.class_count, "Landmark count")->check(CLI::PositiveNumber);
  s_synth->add_option("--seed", synth.seed, "Seed");
  s_synth->add_option("--noise", synth.noise, "Noise std relative to body intensity")->check(CLI::NonNegativeNumber);

  std::string conv_in, conv_out, conv_format = "csv_points", conv_name = "converted", conv_modality = "other";
  bool ras_to_lps = false;
  auto* s_conv = app.add_subcommand("convert", "Convert point files into the dataset layout");
  s_conv->add_option("--input", conv_in, "Directory with images/ and landmarks/")->required();
  s_conv->add_option("--output", conv_out, "Output dataset directory")->required();
  s_conv->add_option("--format", conv_format, "csv_points | fcsv_points | coordinate_json");
  s_conv->add_flag("--ras-to-lps", ras_to_lps, "Negate x and y of every point");
  s_conv->add_option("--dataset-name", conv_name, "Name written to dataset.json");
  s_conv->add_option("--modality", conv_modality, "CT or other")->check(CLI::IsMember({"CT", "other"}));

  Common common;
  auto* s_val = app.add_subcommand("validate", "Check landmark placement and separation");
  add_common(s_val, common);
  auto* s_fp = app.add_subcommand("fingerprint", "Compute the dataset fingerprint");
  add_common(s_fp, common);
  auto* s_plan = app.add_subcommand("plan", "Derive the plan and the fold splits");
  add_common(s_plan, common);
  bool overwrite = false;
  auto* s_pre = app.add_subcommand("preprocess", "Resample, normalize and re-encode training cases");
  add_common(s_pre, common);
  s_pre->add_flag("--overwrite", overwrite, "Recompute cached cases");

  std::string fold = "0";
  std::optional<int> epochs, iters;
  bool no_augment = false;
  auto* s_train = app.add_subcommand("train", "Train one fold");
  add_common(s_train, common);
  s_train->add_option("--fold", fold, "Fold index or 'all'");
  s_train->add_option("--epochs", epochs, "Override plan epochs")->check(CLI::PositiveNumber);
  s_train->add_option("--iterations", iters, "Override iterations per epoch")->check(CLI::PositiveNumber);
  s_train->add_flag("--no-augment", no_augment, "Disable augmentation");

  std::string pred_folds = "0", pred_in, pred_out, which = "final";
  bool save_heatmaps = false;
  auto* s_pred = app.add_subcommand("predict", "Sliding-window prediction of landmark files");
  add_common(s_pred, common);
  s_pred->add_option("--fold", pred_folds, "Fold(s) to use, comma separated; several folds are averaged");
  s_pred->add_option("--input", pred_in, "Image directory (default <dataset>/imagesTs)");
  s_pred->add_option("--out", pred_out, "Output directory for landmark files");
  s_pred->add_option("--checkpoint", which, "best or final")->check(CLI::IsMember({"best", "final"}));
  s_pred->add_flag("--save-heatmaps", save_heatmaps, "Also write per-landmark heatmap volumes");

  std::string gt_dir, ev_pred, thresholds = "2,3,4", biometry, ev_dataset, ev_out;
  std::optional<double> voxel;
  auto* s_eval = app.add_subcommand("evaluate", "MRE, SDR and biometry errors");
  s_eval->add_option("--gt-dir", gt_dir, "Ground-truth landmark files")->required();
  s_eval->add_option("--pred-dir", ev_pred, "Predicted landmark files")->required();
  s_eval->add_option("--thresholds", thresholds, "SDR thresholds, comma separated");
  s_eval->add_option("--biometry", biometry, "JSON list of [name, A, B]")->check(CLI::ExistingFile);
  s_eval->add_option("--dataset", ev_dataset, "Take the biometry spec from dataset.json");
  s_eval->add_option("--voxel-size", voxel, "Report in voxels of this size (synthetic data only)");
  s_eval->add_option("--out", ev_out, "Directory for results.json and results.md (default: pred dir)");

  std::string rep_results, rep_out, rep_dataset, rep_pred;
  int max_cases = 3;
  double ppm = 4.0;
  auto* s_rep = app.add_subcommand("report", "Tables, overlay figures and index.md");
  s_rep->add_option("--results", rep_results, "results.json from evaluate")->required()->check(CLI::ExistingFile);
  s_rep->add_option("--out", rep_out, "Output directory")->required();
  s_rep->add_option("--dataset", rep_dataset, "Dataset directory (for overlays)");
  s_rep->add_option("--pred-dir", rep_pred, "Prediction directory (for overlays)");
  s_rep->add_option("--max-cases", max_cases, "Cases to draw");
  s_rep->add_option("--pixels-per-mm", ppm, "Overlay scale")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);
  set_log_level(quiet ? LogLevel::warn : LogLevel::info);

  try {
    if (*s_synth) {
      synth.shape = Dims{synth_shape[0], synth_shape[1], synth_shape[2]};
      return cmd_synth(synth, synth_out);
    }
    if (*s_conv) {
      ConvertOptions o;
      o.format = parse_point_format(conv_format);
      o.flip_ras_lps = ras_to_lps;
      o.dataset_name = conv_name;
      o.modality = conv_modality;
      const ConversionLog log = convert_dataset(conv_in, conv_out, o);
      std::cout << "converted " << log.cases.size() << " cases, " << log.classes.size() << " classes, "
                << log.events.size() << " log events\n";
      return 0;
    }
    if (*s_val) return cmd_validate(common);
    if (*s_fp) return cmd_fingerprint(common);
    if (*s_plan) return cmd_plan(common);
    if (*s_pre) return cmd_preprocess(common, overwrite);
    if (*s_train) return cmd_train(common, fold, epochs, iters, no_augment);
    if (*s_pred) return cmd_predict(common, pred_folds, pred_in, pred_out, which, save_heatmaps);
    if (*s_eval) return cmd_evaluate(gt_dir, ev_pred, thresholds, biometry, ev_dataset, voxel, ev_out);
    if (*s_rep) return cmd_report(rep_results, rep_out, rep_dataset, rep_pred, max_cases, ppm);
  } catch (const EvaluationError& e) {
    std::cerr << "evaluation error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
