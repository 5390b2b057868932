#pragma once
// Dual aligners + dual Wasserstein critics around a frozen predictor.
//
//   F : target -> source      D_A : source-space critic
//   G : source -> target      D_B : target-space critic
//   P : source -> (0, 1)      trained standalone, frozen afterwards
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hda/nn/adam.hpp"
#include "hda/nn/network.hpp"
#include "json.hpp"

namespace hda::dbacs {

using nn::Network;
using nn::Shape;
using nn::Tensor;

// --- architectures -----------------------------------------------------------

// Reference series length the published kernel sizes were chosen for.
inline constexpr std::size_t kReferenceLength = 256;

// ceil(kernel * T / 256), bumped to the next odd number.
std::size_t scaled_kernel(std::size_t paper_kernel, std::size_t time);

// Known presets: "desk" (kernels scaled to T, dense widths capped at 128),
// "paper-arch" (published sizes), "smoke" (desk topology, narrow layers).
bool is_known_preset(const std::string& preset);
const std::vector<std::string>& preset_names();

std::vector<nn::LayerSpec> predictor_layers(Shape in, const std::string& preset);
std::vector<nn::LayerSpec> critic_layers(Shape in, const std::string& preset);
// `to_source` selects F's filter progression; G uses the mirrored one.
std::vector<nn::LayerSpec> aligner_layers(Shape in, std::size_t out_channels, bool to_source, const std::string& preset);

struct DbacsModel {
  Network P;
  Network F;
  Network G;
  Network DA;
  Network DB;
  Shape source{};
  Shape target{};
};

// Builds all five networks and initializes them from `seed`.
DbacsModel make_model(Shape source, Shape target, const std::string& preset, std::uint64_t seed);

// --- configuration -------------------------------------------------------------

struct LossWeights {
  double adv_source = 1.0;
  double adv_target = 1.0;
  double pred = 0.0;
  double cycle = 10.0;
  double gp = 10.0;
  nlohmann::json to_json() const;
  static LossWeights from_json(const nlohmann::json& j);
};

struct TrainSchedule {
  std::size_t epochs = 20;
  std::size_t batch_size = 32;
  std::size_t critic_steps = 5;
  std::size_t pretrain_epochs = 30;
  // Critic breakdown guard: when an epoch's mean gradient penalty (either
  // critic) exceeds this, all four networks go back to the previous epoch's
  // parameters and training stops. 0 disables.
  double gp_guard = 10.0;
  std::uint64_t seed = 7;
  nlohmann::json to_json() const;
  static TrainSchedule from_json(const nlohmann::json& j);
};

// --- losses ----------------------------------------------------------------------

// Every loss name the trainer may log. There is deliberately no identity loss.
const std::vector<std::string>& loss_registry();

// Mean absolute error; `grad` (optional) receives d loss / d pred with the
// subgradient at zero taken as 0.
double mae_loss(std::span<const double> pred, std::span<const double> truth, std::vector<double>* grad = nullptr);

struct CycleLosses {
  double source = 0.0;  // mean |F(G(x_S)) - x_S|
  double target = 0.0;  // mean |G(F(x_T)) - x_T|
};
CycleLosses cycle_loss(const Network& F, const Network& G, const Tensor& xs, const Tensor& xt);

struct AdversarialLosses {
  double source = 0.0;  // mean D_A(x_S) - mean D_A(F(x_T))
  double target = 0.0;  // mean D_B(x_T) - mean D_B(G(x_S))
};
AdversarialLosses adversarial_losses(const DbacsModel& m, const Tensor& xs, const Tensor& xt);

// Mean over the batch of (|grad_x critic(x_hat)|_2 - 1)^2 at random
// interpolates x_hat = e * real + (1 - e) * fake. When `param_grad` is given,
// scale * d(penalty)/d(critic params) is accumulated into it.
double gradient_penalty(const Network& critic, const Tensor& real, const Tensor& fake, std::uint64_t seed,
                        std::span<double> param_grad = {}, double scale = 1.0);

// Scalar critic / predictor outputs of a batch.
std::vector<double> scalar_outputs(const Network& net, const Tensor& x);

// --- training steps ----------------------------------------------------------------

struct Optimizers {
  nn::AdamState F, G, DA, DB;
};
Optimizers make_optimizers(const DbacsModel& m, const nn::AdamConfig& cfg = nn::kAdversarialAdam);

struct CriticStep {
  double adv_source = 0.0;
  double adv_target = 0.0;
  double gp_a = 0.0;
  double gp_b = 0.0;
  double total = 0.0;  // adv_S + adv_T - gp * (gp_A + gp_B), ascended
};
struct CriticGradients {
  CriticStep loss;
  std::vector<double> DA, DB;  // d total / d params (the step ascends them)
};
CriticGradients critic_gradients(const DbacsModel& m, const Tensor& xs, const Tensor& xt, const LossWeights& w,
                                 std::uint64_t seed);

// Updates D_A and D_B only.
CriticStep critic_step(DbacsModel& m, const Tensor& xs, const Tensor& xt, Optimizers& opt, const LossWeights& w,
                       std::uint64_t seed);

struct LabeledBatch {
  Tensor x;  // target-domain inputs
  std::vector<double> y;
};

struct AlignerStep {
  double adv_source = 0.0;  // -mean D_A(F(x_T))
  double adv_target = 0.0;  // -mean D_B(G(x_S))
  double cycle_source = 0.0;
  double cycle_target = 0.0;
  double pred = 0.0;
  double total = 0.0;
};
struct AlignerGradients {
  AlignerStep loss;
  std::vector<double> F, G;  // d total / d params
};
AlignerGradients aligner_gradients(const DbacsModel& m, const Tensor& xs, const Tensor& xt,
                                   const LabeledBatch* labeled, const LossWeights& w);

// Updates F and G only. Requires `labeled` when w.pred > 0.
AlignerStep aligner_step(DbacsModel& m, const Tensor& xs, const Tensor& xt, const LabeledBatch* labeled,
                         Optimizers& opt, const LossWeights& w);

// --- loss history ---------------------------------------------------------------------

struct LossRecord {
  std::uint64_t step = 0;
  std::uint64_t epoch = 0;
  std::string name;
  double value = 0.0;
};

class LossHistory {
 public:
  void add(std::uint64_t step, std::uint64_t epoch, const std::string& name, double value);
  const std::vector<LossRecord>& records() const { return records_; }
  std::vector<double> series(const std::string& name) const;
  // Mean of |value| (or value) over one epoch for one loss.
  double epoch_mean(const std::string& name, std::uint64_t epoch, bool absolute = false) const;
  std::string to_csv() const;
  void write_csv(const std::filesystem::path& path) const;

 private:
  std::vector<LossRecord> records_;
};

// --- target labels with read accounting --------------------------------------------------

// Wraps target labels so that tests can prove the unsupervised path never
// looks at them.
class LabelAccess {
 public:
  explicit LabelAccess(std::vector<double> labels) : labels_(std::move(labels)) {}
  double operator[](std::size_t i) const {
    ++reads_;
    return labels_.at(i);
  }
  std::size_t size() const { return labels_.size(); }
  std::size_t reads() const { return reads_; }

 private:
  std::vector<double> labels_;
  mutable std::size_t reads_ = 0;
};

struct TrainReport {
  std::size_t epochs_completed = 0;  // epochs whose parameters were kept
  bool guard_tripped = false;
  std::size_t guard_epoch = 0;  // epoch whose penalty tripped the guard
  double guard_penalty = 0.0;
};

// Alternates `critic_steps` critic updates with one aligner update; an epoch
// is ceil(|target| / batch) iterations. Throws ErrorKind::diverged on a
// non-finite loss; `history` keeps everything recorded up to that point.
TrainReport train_dbacs(DbacsModel& m, const Tensor& xs, const Tensor& xt, const LabelAccess* target_labels,
                 const TrainSchedule& schedule, const LossWeights& w, LossHistory& history,
                 const nn::AdamConfig& adam = nn::kAdversarialAdam);

// Runs an aligner over a batch; checks the channel count.
Tensor apply_aligner(const Network& net, const Tensor& x);

// --- SSIM pretraining -----------------------------------------------------------------

inline constexpr std::size_t kSsimWindow = 11;

// Per-channel data range max - min over a batch (floored at 1e-12).
std::vector<double> channel_ranges(const Tensor& x);

// Mean 1-D SSIM over batch, sliding windows and channels, with constants
// c1 = (0.01 R_c)^2, c2 = (0.03 R_c)^2. `grad_x` receives d SSIM / d x.
double ssim(const Tensor& x, const Tensor& y, std::span<const double> ranges, Tensor* grad_x = nullptr);

// For every entry of `from`, the index in `to` with the closest label (ties
// to the lowest index).
std::vector<std::size_t> nearest_label_pairs(std::span<const double> from, std::span<const double> to);

struct PretrainReport {
  double ssim_f_before = 0.0;
  double ssim_f_after = 0.0;
  double ssim_g_before = 0.0;
  double ssim_g_after = 0.0;
};

// Trains F on (x_T[pair(i)] -> x_S[i]) and G on the reverse direction by
// minimizing 1 - SSIM. Labels only select the pairs.
PretrainReport pretrain_aligners(DbacsModel& m, const Tensor& xs, std::span<const double> ys, const Tensor& xt,
                                 std::span<const double> yt, std::size_t epochs, std::size_t batch_size,
                                 std::uint64_t seed, const nn::AdamConfig& adam = nn::kPredictorAdam);

// --- predictor ---------------------------------------------------------------------------

struct PredictorSchedule {
  std::size_t max_epochs = 150;
  std::size_t patience = 20;
  std::size_t batch_size = 32;
  double validation_fraction = 0.1;
  std::uint64_t seed = 11;
  nlohmann::json to_json() const;
  static PredictorSchedule from_json(const nlohmann::json& j);
};

struct PredictorReport {
  std::size_t epochs_run = 0;
  std::size_t best_epoch = 0;
  double best_validation_mae = 0.0;
  double train_mae = 0.0;  // over every sample passed in, at the restored best parameters
};

// Minimizes MAE with early stopping on a held-out slice; restores the best
// parameters before returning.
PredictorReport train_predictor(Network& P, const Tensor& x, std::span<const double> y, const PredictorSchedule& s,
                                const nn::AdamConfig& adam = nn::kPredictorAdam);

}  // namespace hda::dbacs
