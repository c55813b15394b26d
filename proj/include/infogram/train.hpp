#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "infogram/losses.hpp"
#include "infogram/relation.hpp"
#include "infogram/tensor.hpp"

namespace infogram {

struct TrainConfig {
    std::uint64_t seed = 42;
    std::size_t steps = 300;
    std::size_t batch = 4;      // samples per step (B)
    std::size_t masks = 2;      // relation query rows per sample (N)
    std::size_t positions = 16; // relation key rows per sample (P)
    std::size_t dim = 8;        // feature width (D)
    double lr_init = 2e-4;
    double lr_final = 2e-5;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    LossWeights weights;
    double task_weight = 1.0;

    void validate() const;
};

/// Reads a JSON object with the TrainConfig field names (weights nested as
/// {"lambda1": ..., "lambda2": ...}); absent fields keep their defaults.
TrainConfig load_train_config(const std::string& path);

/// One synthetic step: teacher feature rows are Gaussian prototypes plus
/// Gaussian jitter (the prototype bank is fixed per seed, so batches share
/// structure the relation module can learn), student features add a
/// sigma = 0.1 Gaussian perturbation along one fixed per-seed direction (a
/// systematic bias the student side can learn to undo, not white noise),
/// and the target marks which query rows score above the batch median under
/// a fixed probe direction (so labels are always balanced).
struct SynthBatch {
    Tensor teacher_zi; // [B, P, D]
    Tensor teacher_zm; // [B, N, D]
    Tensor student_zi;
    Tensor student_zm;
    Tensor target;     // [B, N], binary
};

SynthBatch synth_batch(const TrainConfig& cfg, std::uint64_t step);

/// The probe direction used for both target construction and the toy
/// prediction head; unit norm, derived only from the seed.
Tensor probe_direction(const TrainConfig& cfg);

/// Half-cosine decay from lr_init (step 0) to lr_final (step total-1).
double cosine_lr(std::size_t step, std::size_t total_steps, double lr_init,
                 double lr_final);

/// Residual bottleneck on feature rows: x + U gelu(x W), with U zero at
/// initialization so the student starts identical to its base features.
struct StudentAdapter {
    Tensor a_down; // [D, d]
    Tensor a_up;   // [d, D]
    std::size_t bottleneck = 0;
};

/// Bottleneck d = ceil(dim / 4), min 1.  a_up starts at zero; a_down entries
/// are uniform in +-30 sqrt(6 / (dim + d)).  The wide down projection makes
/// the adapter output highly sensitive to a_up, so short low-learning-rate
/// runs can still move the student features appreciably.
StudentAdapter init_adapter(std::size_t dim, std::uint64_t seed);

struct AdamState {
    std::vector<Tensor> m, v;
    long t = 0;
};

/// Bias-corrected Adam update applied in place; state tensors are created
/// on first use and must keep matching shapes afterwards.
void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps);

struct TrainRecord {
    std::size_t step = 0; // 1-based
    double lr = 0.0;
    double l_r = 0.0;
    double l_d = 0.0;
    double l_task = 0.0;
    double l_total = 0.0;
    // Order-2 MI between the teacher and student relation Grams, measured
    // after the step's update on a fixed held-out batch so the column
    // tracks the parameters rather than the per-step batch draw.
    double mi_ts = 0.0;
};

struct TrainReport {
    std::vector<TrainRecord> records;
    RelationParams final_params;
    StudentAdapter final_adapter;
};

TrainReport run_toy_training(const TrainConfig& cfg);

/// CSV with header step,lr,l_r,l_d,l_task,l_total,mi_ts; %.17g floats so
/// identical runs serialize to identical bytes.
std::string report_csv(const TrainReport& report);
void write_report_csv(const TrainReport& report, const std::string& path);

struct GradCheckEntry {
    std::string group;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    std::vector<GradCheckEntry> entries;
    double worst() const;
    bool all_below(double tol) const;
};

/// Central-difference validation (step 1e-5) of every loss gradient group:
/// relation parameters through the compression and alignment losses,
/// student features through the alignment loss, logits through the toy
/// structure loss, and adapter weights through the full objective.
GradCheckReport gradcheck_all(std::uint64_t seed);

} // namespace infogram
