#include "nnlm/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "nnlm/error.hpp"
#include "nnlm/heatmap.hpp"
#include "nnlm/inference.hpp"
#include "nnlm/log.hpp"
#include "nnlm/loss.hpp"
#include "nnlm/metrics.hpp"

namespace nnlm {
namespace {

constexpr char kMagic[8] = {'N', 'N', 'L', 'M', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;
constexpr double kEmaAlpha = 0.9;

template <class T>
void put(std::string& out, const T& v) {
  out.append(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_floats(std::string& out, const std::vector<float>& v) {
  out.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(float));
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(9);
  os << v;
  return os.str();
}

}  // namespace

void prepare_batch(const std::vector<TrainingCase>& cases, const Plan& plan, const AugmentConfig& aug,
                   std::uint64_t seed, std::int64_t iteration, Tensor& input, std::vector<float>& target) {
  if (cases.empty()) throw TrainingError("no training cases");
  const Dims patch{plan.patch_size[0], plan.patch_size[1], plan.patch_size[2]};
  const int b = plan.batch_size;
  const int c = plan.class_count();
  input.reshape(Shape{b, 1, patch});
  target.assign(static_cast<std::size_t>(b) * c * patch.count(), 0.0f);
#pragma omp parallel for schedule(static)
  for (int s = 0; s < b; ++s) {
    Rng rng = make_rng(seed, "batch", {static_cast<std::uint64_t>(iteration), static_cast<std::uint64_t>(s)});
    const TrainingCase& tc = cases[uniform_index(rng, cases.size())];
    Patch p = sample_patch(tc, plan, rng);
    augment(p, aug, rng);
    std::copy(p.image.begin(), p.image.end(), input.sample(s));
    const HeatmapTarget h = patch_to_heatmap(p.labels, patch, c, plan.edt_radius_voxels);
    std::copy(h.channels.begin(), h.channels.end(), target.begin() + static_cast<std::ptrdiff_t>(s) * c * patch.count());
  }
}

double batch_loss(const Plan& plan, const Tensor& logits, std::span<const float> target, Tensor* grad) {
  const int b = logits.shape().n;
  const std::size_t per = logits.shape().sample();
  if (target.size() != per * b) throw ContractError("target does not match logits");
  if (grad) grad->reshape(logits.shape());
  double total = 0.0;
  for (int s = 0; s < b; ++s) {
    std::span<const float> z(logits.sample(s), per);
    std::span<const float> t = target.subspan(s * per, per);
    std::span<float> g = grad ? std::span<float>(grad->sample(s), per) : std::span<float>{};
    const double l = plan.loss == LossKind::bce_topk ? bce_topk_loss<float>(z, t, plan.topk_percent, g)
                                                     : mse_loss<float>(z, t, g);
    total += l;
  }
  if (grad) {
    const float inv = 1.0f / static_cast<float>(b);
    for (float& v : grad->data()) v *= inv;
  }
  return total / b;
}

void save_checkpoint(const fs::path& path, const UNet& net, const SgdNesterov* opt, const Json& meta) {
  Json m = meta;
  m["network"] = network_spec_to_json(net.spec());
  m["has_momentum"] = opt != nullptr && !opt->buffers().empty();
  const std::string js = m.dump();
  std::string out(kMagic, sizeof(kMagic));
  put(out, kCheckpointVersion);
  put(out, static_cast<std::uint64_t>(js.size()));
  out += js;
  for (const Param* p : net.parameters()) put_floats(out, p->value);
  if (m["has_momentum"].get<bool>())
    for (const auto& b : opt->buffers()) put_floats(out, b);
  fs::create_directories(path.parent_path().empty() ? fs::path(".") : path.parent_path());
  write_file_atomic(path, out);
}

LoadedCheckpoint load_checkpoint(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  char magic[8];
  std::uint32_t version = 0;
  std::uint64_t len = 0;
  in.read(magic, 8);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  if (!in || std::memcmp(magic, kMagic, 8) != 0) throw IoError("not a checkpoint: " + path.string());
  if (version != kCheckpointVersion) throw IoError("unsupported checkpoint version " + std::to_string(version));
  std::string js(len, '\0');
  in.read(js.data(), static_cast<std::streamsize>(len));
  Json meta = Json::parse(js);
  LoadedCheckpoint ck{UNet(network_spec_from_json(meta["network"]), 0), meta, {}};
  auto read_floats = [&](std::vector<float>& v) {
    in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
    if (!in) throw IoError("truncated checkpoint " + path.string());
  };
  for (Param* p : ck.net.parameters()) read_floats(p->value);
  if (meta.value("has_momentum", false)) {
    for (const Param* p : ck.net.parameters()) {
      ck.momentum.emplace_back(p->value.size());
      read_floats(ck.momentum.back());
    }
  }
  return ck;
}

LandmarkSet predict_case(UNet& net, const Plan& plan, const Volume3D& image, const std::string& case_id) {
  const HeatmapVolume h = sliding_window_predict(make_predictor(net), image, plan);
  return extract_landmarks(h, plan.classes, case_id);
}

TrainState train(const Plan& plan, const std::vector<TrainingCase>& train_cases,
                 const std::vector<PreprocessedCase>& validation_cases, const TrainOptions& opt,
                 const fs::path& out_dir) {
  plan.validate();
  if (train_cases.size() < 2) throw TrainingError("training needs at least 2 cases");
  const int epochs = opt.epochs.value_or(plan.epochs);
  const int iters = opt.iterations_per_epoch.value_or(plan.iterations_per_epoch);
  if (epochs < 1 || iters < 1) throw ConfigError("epochs and iterations must be positive");
  fs::create_directories(out_dir);

  UNet net(network_spec_from_plan(plan), derive_seed(opt.seed, "network"));
  SgdNesterov sgd(plan.lr.momentum, plan.lr.weight_decay);
  TrainState st;
  st.seed = opt.seed;
  st.checkpoint_best = out_dir / "checkpoint_best";
  st.checkpoint_final = out_dir / "checkpoint_final";

  const Json plan_json = plan_to_json(plan);
  auto meta = [&](int epoch) {
    return Json{{"plan", plan_json}, {"epoch", epoch}, {"iteration", st.iteration}, {"seed", opt.seed}};
  };

  std::string log_lines;
  std::string csv = "epoch,lr,train_loss,train_loss_median,train_loss_ema,grad_norm\n";
  Tensor input, grad;
  std::vector<float> target;
  const std::uint64_t batch_seed = derive_seed(opt.seed, "train");
  double ema = 0.0;

  for (int e = 0; e < epochs; ++e) {
    const double lr = learning_rate(plan.lr, e, epochs);
    std::vector<double> losses;
    double gsum = 0.0;
    for (int it = 0; it < iters; ++it, ++st.iteration) {
      prepare_batch(train_cases, plan, opt.augment, batch_seed, st.iteration, input, target);
      net.zero_grad();
      const Tensor& logits = net.forward(input);
      const double loss = batch_loss(plan, logits, target, &grad);
      if (!std::isfinite(loss)) {
        const Json diag{{"epoch", e}, {"iteration", st.iteration}, {"loss", fmt(loss)}, {"lr", lr}, {"seed", opt.seed}};
        write_json_file(out_dir / "diagnostics.json", diag);
        throw TrainingError("non-finite loss at iteration " + std::to_string(st.iteration) + "; see " +
                            (out_dir / "diagnostics.json").string());
      }
      net.backward(grad);
      const double gnorm = sgd.step(net.parameters(), lr);
      if (!std::isfinite(gnorm)) {
        const Json diag{{"epoch", e}, {"iteration", st.iteration}, {"loss", loss}, {"grad_norm", fmt(gnorm)}, {"lr", lr}};
        write_json_file(out_dir / "diagnostics.json", diag);
        throw TrainingError("non-finite gradient at iteration " + std::to_string(st.iteration));
      }
      losses.push_back(loss);
      gsum += gnorm;
    }
    EpochRecord r;
    r.epoch = e;
    r.lr = lr;
    double sum = 0.0;
    for (double l : losses) sum += l;
    r.loss_mean = sum / losses.size();
    r.loss_median = median(losses);
    r.grad_norm_mean = gsum / iters;
    ema = e == 0 ? r.loss_mean : kEmaAlpha * ema + (1.0 - kEmaAlpha) * r.loss_mean;
    r.loss_ema = ema;
    st.history.push_back(r);
    st.epoch = e + 1;

    const Json line{{"epoch", e}, {"lr", lr}, {"train_loss", r.loss_mean}, {"train_loss_median", r.loss_median},
                    {"train_loss_ema", ema}, {"grad_norm", r.grad_norm_mean}};
    log_lines += line.dump() + "\n";
    csv += std::to_string(e) + "," + fmt(lr) + "," + fmt(r.loss_mean) + "," + fmt(r.loss_median) + "," + fmt(ema) +
           "," + fmt(r.grad_norm_mean) + "\n";
    write_file_atomic(out_dir / "log.jsonl", log_lines);
    write_file_atomic(out_dir / "progress.csv", csv);
    if (ema < st.best_loss_ema) {
      st.best_loss_ema = ema;
      st.best_epoch = e;
      save_checkpoint(st.checkpoint_best, net, &sgd, meta(e));
    }
    if (opt.verbose) log_info("epoch " + std::to_string(e) + " loss " + fmt(r.loss_mean) + " lr " + fmt(lr));
  }
  save_checkpoint(st.checkpoint_final, net, &sgd, meta(epochs - 1));

  if (opt.validate && !validation_cases.empty()) {
    fs::create_directories(out_dir / "validation");
    std::vector<CaseEvaluation> evals;
    for (const auto& c : validation_cases) {
      LandmarkSet pred = predict_case(net, plan, c.image, c.case_id);
      write_landmarks(pred, out_dir / "validation" / (c.case_id + ".json"));
      evals.push_back(evaluate_case(c.landmarks, pred));
    }
    const EvalReport rep = aggregate_report(evals, kDefaultThresholds);
    st.validation_mre = rep.mre;
    write_json_file(out_dir / "validation" / "summary.json", rep.to_json());
  }

  Json summary{{"epochs", st.epoch}, {"iterations", st.iteration}, {"seed", opt.seed}, {"best_epoch", st.best_epoch},
               {"best_loss_ema", st.best_loss_ema}};
  summary["validation_mre"] = std::isfinite(st.validation_mre) ? Json(st.validation_mre) : Json(nullptr);
  write_json_file(out_dir / "train_state.json", summary);
  return st;
}

}  // namespace nnlm
