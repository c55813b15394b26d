#include "infogram/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "json.hpp"

#include "infogram/entropy.hpp"
#include "infogram/error.hpp"
#include "infogram/gram.hpp"
#include "infogram/rng.hpp"

namespace infogram {

namespace {

constexpr double kFdStep = 1e-5;
constexpr double kStudentNoise = 0.1;

// Teacher feature geometry: each row is one of a few fixed Gaussian
// prototype directions plus jitter.  The bank is drawn once per seed, so
// every batch of a run shares low-rank structure; with isotropic rows the
// relation Grams would start at the entropy ceiling and the information
// losses would have nothing to learn.
constexpr std::size_t kPrototypes = 3;
constexpr double kJitter = 0.35;
constexpr std::uint64_t kStreamPrototypes = 0x70726F74; // "prot"
constexpr std::uint64_t kStreamNoiseDir = 0x6E6F6973; // "nois"

// Down-projection init scale.  The up projection starts at zero and Adam
// caps how far its entries can travel in a short run, so the bottleneck
// activations must be large for the adapter to buy meaningful output
// movement within that travel budget.
constexpr double kAdapterDownScale = 30.0;

std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

Tensor prototype_bank(const TrainConfig& cfg) {
    CounterRng rng(cfg.seed, kStreamPrototypes);
    Tensor bank({kPrototypes, cfg.dim});
    for (double& v : bank.data()) v = rng.normal();
    return bank;
}

// [b, rows, d] block whose rows each pick a random prototype plus jitter.
// The draw must be per row, not a function of the row index alone, or all
// samples would share one score pattern and the relation Grams would
// collapse to rank one.
Tensor prototype_rows(CounterRng& rng, const Tensor& bank, std::size_t b,
                      std::size_t rows, std::size_t d) {
    Tensor t({b, rows, d});
    for (std::size_t s = 0; s < b; ++s)
        for (std::size_t r = 0; r < rows; ++r) {
            std::size_t p = rng.next_u64() % kPrototypes;
            for (std::size_t c = 0; c < d; ++c)
                t[(s * rows + r) * d + c] = bank[p * d + c] + kJitter * rng.normal();
        }
    return t;
}

// Fixed unit direction for the student perturbation.  Random signs keep it
// off the all-ones axis that layer normalization's mean subtraction removes.
Tensor noise_direction(const TrainConfig& cfg) {
    CounterRng rng(cfg.seed, kStreamNoiseDir);
    Tensor u({cfg.dim});
    double inv = 1.0 / std::sqrt(static_cast<double>(cfg.dim));
    for (double& v : u.data()) v = (rng.next_u64() & 1) ? inv : -inv;
    return u;
}

// Each student row perturbs its teacher row along the one fixed direction
// with Gaussian magnitude, so every entry is N(0, sigma^2) but the noise is
// a systematic, learnable bias rather than white noise the distillation
// losses could never remove.
Tensor directional_noise(CounterRng& rng, const Tensor& u, std::size_t b,
                         std::size_t rows, std::size_t d, double sigma) {
    Tensor t({b, rows, d});
    double scale = sigma * std::sqrt(static_cast<double>(d));
    for (std::size_t s = 0; s < b; ++s)
        for (std::size_t r = 0; r < rows; ++r) {
            double g = scale * rng.normal();
            for (std::size_t c = 0; c < d; ++c) t[(s * rows + r) * d + c] = g * u[c];
        }
    return t;
}

GramMatrix relation_gram(const Tensor& rows) {
    return trace_normalize(linear_gram(rows));
}

} // namespace

void TrainConfig::validate() const {
    if (steps < 1) throw ContractError("train config: steps must be at least 1");
    if (batch < 2) throw ContractError("train config: batch must be at least 2");
    if (masks < 1 || positions < 1 || dim < 1)
        throw ContractError("train config: masks, positions and dim must be positive");
    if (!(lr_init > 0.0) || !(lr_final > 0.0) || lr_final > lr_init)
        throw ContractError("train config: need lr_init >= lr_final > 0");
    if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
        throw ContractError("train config: betas must lie in [0, 1)");
    if (!(eps > 0.0)) throw ContractError("train config: eps must be positive");
    if (!std::isfinite(task_weight) || task_weight < 0.0)
        throw ContractError("train config: task_weight must be finite and non-negative");
    infogram::validate(weights);
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("train config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("train config: invalid JSON: ") + e.what());
    }

    TrainConfig cfg;
    try {
        cfg.seed = j.value("seed", cfg.seed);
        cfg.steps = j.value("steps", cfg.steps);
        cfg.batch = j.value("batch", cfg.batch);
        cfg.masks = j.value("masks", cfg.masks);
        cfg.positions = j.value("positions", cfg.positions);
        cfg.dim = j.value("dim", cfg.dim);
        cfg.lr_init = j.value("lr_init", cfg.lr_init);
        cfg.lr_final = j.value("lr_final", cfg.lr_final);
        cfg.beta1 = j.value("beta1", cfg.beta1);
        cfg.beta2 = j.value("beta2", cfg.beta2);
        cfg.eps = j.value("eps", cfg.eps);
        if (j.contains("weights")) {
            cfg.weights.lambda1 = j["weights"].value("lambda1", cfg.weights.lambda1);
            cfg.weights.lambda2 = j["weights"].value("lambda2", cfg.weights.lambda2);
        }
        cfg.task_weight = j.value("task_weight", cfg.task_weight);
    } catch (const nlohmann::json::exception& e) {
        throw ContractError(std::string("train config: bad field type: ") + e.what());
    }
    cfg.validate();
    return cfg;
}

Tensor probe_direction(const TrainConfig& cfg) {
    CounterRng rng(cfg.seed, kStreamProbe);
    Tensor w({cfg.dim});
    double sq = 0.0;
    for (double& v : w.data()) {
        v = rng.normal();
        sq += v * v;
    }
    if (sq < 1e-24) {
        w[0] = 1.0;
        return w;
    }
    for (double& v : w.data()) v /= std::sqrt(sq);
    return w;
}

SynthBatch synth_batch(const TrainConfig& cfg, std::uint64_t step) {
    cfg.validate();
    std::size_t b = cfg.batch, n = cfg.masks, p = cfg.positions, d = cfg.dim;
    CounterRng rng(cfg.seed, step);

    Tensor bank = prototype_bank(cfg);
    SynthBatch out;
    out.teacher_zi = prototype_rows(rng, bank, b, p, d);
    out.teacher_zm = prototype_rows(rng, bank, b, n, d);
    Tensor u = noise_direction(cfg);
    out.student_zi = directional_noise(rng, u, b, p, d, kStudentNoise);
    out.student_zm = directional_noise(rng, u, b, n, d, kStudentNoise);
    for (std::size_t i = 0; i < out.student_zi.numel(); ++i)
        out.student_zi[i] += out.teacher_zi[i];
    for (std::size_t i = 0; i < out.student_zm.numel(); ++i)
        out.student_zm[i] += out.teacher_zm[i];

    // Thresholding at the batch median keeps the labels balanced for any
    // draw, so the toy task never degenerates to a constant target.
    Tensor probe = probe_direction(cfg);
    std::vector<double> scores(b * n, 0.0);
    for (std::size_t r = 0; r < b * n; ++r)
        for (std::size_t c = 0; c < d; ++c)
            scores[r] += out.teacher_zm[r * d + c] * probe[c];
    std::vector<double> sorted = scores;
    std::nth_element(sorted.begin(), sorted.begin() + (b * n - 1) / 2, sorted.end());
    double threshold = sorted[(b * n - 1) / 2];

    out.target = Tensor({b, n});
    for (std::size_t r = 0; r < b * n; ++r)
        out.target[r] = scores[r] > threshold ? 1.0 : 0.0;
    return out;
}

double cosine_lr(std::size_t step, std::size_t total_steps, double lr_init,
                 double lr_final) {
    if (total_steps < 1) throw ContractError("cosine_lr: total_steps must be positive");
    if (step >= total_steps)
        throw ContractError("cosine_lr: step " + std::to_string(step) +
                            " out of range for " + std::to_string(total_steps) + " steps");
    if (total_steps == 1 || step == 0) return lr_init;
    if (step == total_steps - 1) return lr_final; // exact endpoints
    double phase = static_cast<double>(step) / static_cast<double>(total_steps - 1);
    return lr_final + 0.5 * (lr_init - lr_final) * (1.0 + std::cos(M_PI * phase));
}

StudentAdapter init_adapter(std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw ContractError("init_adapter: dim must be positive");
    StudentAdapter a;
    a.bottleneck = std::max<std::size_t>(1, (dim + 3) / 4);
    CounterRng rng(seed, kStreamAdapterInit);
    // A wide down projection raises the adapter output's sensitivity per unit
    // of up-projection weight; with the up projection zero-initialized the
    // start is still exactly the identity, but the first optimizer steps buy
    // far more output movement for the same parameter movement.
    double bound = kAdapterDownScale * std::sqrt(6.0 / static_cast<double>(dim + a.bottleneck));
    a.a_down = Tensor({dim, a.bottleneck});
    for (double& v : a.a_down.data()) v = rng.uniform(-bound, bound);
    a.a_up = Tensor({a.bottleneck, dim}); // zero: adapter starts as identity
    return a;
}

void adam_step(const std::vector<Tensor*>& params, const std::vector<Tensor>& grads,
               AdamState& state, double lr, double beta1, double beta2, double eps) {
    if (params.size() != grads.size())
        throw ContractError("adam_step: parameter and gradient counts differ");
    if (state.m.empty()) {
        for (const Tensor* p : params) {
            state.m.emplace_back(p->shape());
            state.v.emplace_back(p->shape());
        }
    }
    if (state.m.size() != params.size())
        throw ContractError("adam_step: state was built for a different parameter set");

    state.t += 1;
    double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
    double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = grads[i];
        if (g.shape() != p.shape())
            throw ShapeError("adam_step: gradient shape mismatch at parameter " +
                             std::to_string(i));
        for (std::size_t k = 0; k < p.numel(); ++k) {
            double gv = g[k];
            state.m[i][k] = beta1 * state.m[i][k] + (1.0 - beta1) * gv;
            state.v[i][k] = beta2 * state.v[i][k] + (1.0 - beta2) * gv * gv;
            double mhat = state.m[i][k] / bc1;
            double vhat = state.v[i][k] / bc2;
            p[k] -= lr * mhat / (std::sqrt(vhat) + eps);
        }
    }
}

namespace {

// x + U gelu(x W) applied to every feature row of a [B, rows, D] tensor.
ad::Node* apply_adapter(ad::Tape& tape, ad::Node* base, ad::Node* a_down,
                        ad::Node* a_up) {
    std::size_t b = base->value.shape()[0];
    std::size_t rows = base->value.shape()[1];
    std::size_t d = base->value.shape()[2];
    ad::Node* flat = tape.reshape(base, {b * rows, d});
    ad::Node* h = tape.gelu(tape.matmul(flat, a_down));
    ad::Node* out = tape.add(flat, tape.matmul(h, a_up));
    return tape.reshape(out, {b, rows, d});
}

ad::Node* task_logits(ad::Tape& tape, ad::Node* student_zm, ad::Node* probe_col) {
    std::size_t b = student_zm->value.shape()[0];
    std::size_t n = student_zm->value.shape()[1];
    std::size_t d = student_zm->value.shape()[2];
    ad::Node* flat = tape.reshape(student_zm, {b * n, d});
    return tape.reshape(tape.matmul(flat, probe_col), {b, n});
}

// Batch index reserved for the held-out metric batch; a run would need
// about 1.7e9 steps before a training stream collides with it.
constexpr std::uint64_t kHeldOutBatch = 0x6576616C; // "eval"

// mi_ts is measured on a fixed batch so it is a function of the current
// parameters alone; per-step training batches would add sampling noise of
// the same size as the trend being observed.
double held_out_mi(const SynthBatch& batch, const RelationParams& params,
                   const StudentAdapter& adapter) {
    ad::Tape tape;
    RelationParamNodes pn = make_param_nodes(tape, params, false);
    ad::Node* a_down = tape.constant(adapter.a_down);
    ad::Node* a_up = tape.constant(adapter.a_up);
    RelationOutput r_t = relation_forward(tape, pn, tape.constant(batch.teacher_zi),
                                          tape.constant(batch.teacher_zm));
    RelationOutput r_s = relation_forward(
        tape, pn, apply_adapter(tape, tape.constant(batch.student_zi), a_down, a_up),
        apply_adapter(tape, tape.constant(batch.student_zm), a_down, a_up));
    return mutual_information(relation_gram(r_t.value()), relation_gram(r_s.value()),
                              EntropyOrder(2.0));
}

} // namespace

TrainReport run_toy_training(const TrainConfig& cfg) {
    cfg.validate();
    RelationParams params = init_params(cfg.dim, cfg.seed);
    StudentAdapter adapter = init_adapter(cfg.dim, cfg.seed);
    Tensor probe_col = probe_direction(cfg).reshaped({cfg.dim, 1});

    AdamState state;
    TrainReport report;
    report.records.reserve(cfg.steps);
    SynthBatch held_out = synth_batch(cfg, kHeldOutBatch);

    for (std::size_t step = 0; step < cfg.steps; ++step) {
        try {
            SynthBatch batch = synth_batch(cfg, step);

            ad::Tape tape;
            RelationParamNodes pn = make_param_nodes(tape, params, true);
            ad::Node* nd_a_down = tape.leaf(adapter.a_down, true);
            ad::Node* nd_a_up = tape.leaf(adapter.a_up, true);

            ad::Node* t_zi = tape.constant(batch.teacher_zi);
            ad::Node* t_zm = tape.constant(batch.teacher_zm);
            ad::Node* s_zi = apply_adapter(tape, tape.constant(batch.student_zi),
                                           nd_a_down, nd_a_up);
            ad::Node* s_zm = apply_adapter(tape, tape.constant(batch.student_zm),
                                           nd_a_down, nd_a_up);

            ad::Node* logits = task_logits(tape, s_zm, tape.constant(probe_col));
            ad::Node* l_task = tape.scale(
                toy_structure_loss(tape, logits, batch.target), cfg.task_weight);

            RelationOutput r_t = relation_forward(tape, pn, t_zi, t_zm);
            RelationOutput r_s = relation_forward(tape, pn, s_zi, s_zm);
            ad::Node* l_r = loss_r(tape, batch.teacher_zi, batch.teacher_zm, r_t);
            ad::Node* l_d = loss_d(tape, r_t, r_s);
            ad::Node* l_info = loss_info(tape, l_r, l_d, cfg.weights);
            ad::Node* l_total = tape.add(l_task, l_info);

            ad::GradientMap gm = ad::backward(l_total);
            std::vector<Tensor*> tensors;
            std::vector<ad::Node*> leaves;
            auto pt = relation_fields(params);
            auto pnodes = relation_node_fields(pn);
            for (std::size_t i = 0; i < pt.size(); ++i) {
                tensors.push_back(pt[i]);
                leaves.push_back(*pnodes[i]);
            }
            tensors.push_back(&adapter.a_down);
            leaves.push_back(nd_a_down);
            tensors.push_back(&adapter.a_up);
            leaves.push_back(nd_a_up);

            std::vector<Tensor> grads;
            for (std::size_t i = 0; i < leaves.size(); ++i)
                grads.push_back(gm.contains(leaves[i]) ? gm.at(leaves[i])
                                                       : Tensor(tensors[i]->shape()));

            double lr = cosine_lr(step, cfg.steps, cfg.lr_init, cfg.lr_final);
            adam_step(tensors, grads, state, lr, cfg.beta1, cfg.beta2, cfg.eps);

            double mi_ts = held_out_mi(held_out, params, adapter);
            report.records.push_back({step + 1, lr, l_r->value.value(),
                                      l_d->value.value(), l_task->value.value(),
                                      l_total->value.value(), mi_ts});
        } catch (const NumericError& e) {
            throw NumericError("training aborted at step " + std::to_string(step + 1) +
                               ": " + e.what());
        }
    }

    report.final_params = std::move(params);
    report.final_adapter = std::move(adapter);
    return report;
}

std::string report_csv(const TrainReport& report) {
    std::string out = "step,lr,l_r,l_d,l_task,l_total,mi_ts\n";
    for (const TrainRecord& r : report.records) {
        out += std::to_string(r.step);
        for (double v : {r.lr, r.l_r, r.l_d, r.l_task, r.l_total, r.mi_ts}) {
            out += ',';
            out += fmt_double(v);
        }
        out += '\n';
    }
    return out;
}

void write_report_csv(const TrainReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("report: cannot write " + path);
    out << report_csv(report);
}

double GradCheckReport::worst() const {
    double w = 0.0;
    for (const GradCheckEntry& e : entries) w = std::max(w, e.max_rel_error);
    return w;
}

bool GradCheckReport::all_below(double tol) const {
    for (const GradCheckEntry& e : entries)
        if (!(e.max_rel_error < tol)) return false;
    return true;
}

namespace {

RelationParamNodes nodes_with_override(ad::Tape& tape, const RelationParams& p,
                                       int slot, ad::Node* x) {
    RelationParamNodes n;
    auto tensors = relation_fields(p);
    auto slots = relation_node_fields(n);
    for (int i = 0; i < 8; ++i)
        *slots[i] = (i == slot) ? x : tape.constant(*tensors[i]);
    return n;
}

} // namespace

GradCheckReport gradcheck_all(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.steps = 1;
    cfg.batch = 3;
    cfg.masks = 2;
    cfg.positions = 4;
    cfg.dim = 4;

    SynthBatch batch = synth_batch(cfg, 0);
    RelationParams params = init_params(cfg.dim, seed);
    Tensor probe_col = probe_direction(cfg).reshaped({cfg.dim, 1});

    // The adapter's zero-initialized up-projection would silence the
    // down-projection gradient, so the check runs at a generic point.
    StudentAdapter adapter = init_adapter(cfg.dim, seed);
    CounterRng gen(seed, 0x67636B70); // "gckp"
    for (double& v : adapter.a_up.data()) v = gen.uniform(-0.3, 0.3);

    GradCheckReport report;
    auto push = [&](const std::string& group,
                    const std::function<ad::Node*(ad::Tape&, ad::Node*)>& f,
                    const Tensor& x) {
        report.entries.push_back({group, ad::finite_diff_check(f, x, kFdStep)});
    };

    auto tensors = relation_fields(params);
    for (int i = 0; i < 8; ++i) {
        std::string name = kRelationFieldNames[i];
        push("loss_r/" + name,
             [&, i](ad::Tape& t, ad::Node* x) {
                 RelationParamNodes pn = nodes_with_override(t, params, i, x);
                 RelationOutput r_t = relation_forward(
                     t, pn, t.constant(batch.teacher_zi), t.constant(batch.teacher_zm));
                 return loss_r(t, batch.teacher_zi, batch.teacher_zm, r_t);
             },
             *tensors[i]);
        push("loss_d/" + name,
             [&, i](ad::Tape& t, ad::Node* x) {
                 RelationParamNodes pn = nodes_with_override(t, params, i, x);
                 RelationOutput r_t = relation_forward(
                     t, pn, t.constant(batch.teacher_zi), t.constant(batch.teacher_zm));
                 RelationOutput r_s = relation_forward(
                     t, pn, t.constant(batch.student_zi), t.constant(batch.student_zm));
                 return loss_d(t, r_t, r_s);
             },
             *tensors[i]);
    }

    push("loss_d/student_zi",
         [&](ad::Tape& t, ad::Node* x) {
             RelationParamNodes pn = nodes_with_override(t, params, -1, nullptr);
             RelationOutput r_t = relation_forward(
                 t, pn, t.constant(batch.teacher_zi), t.constant(batch.teacher_zm));
             RelationOutput r_s =
                 relation_forward(t, pn, x, t.constant(batch.student_zm));
             return loss_d(t, r_t, r_s);
         },
         batch.student_zi);
    push("loss_d/student_zm",
         [&](ad::Tape& t, ad::Node* x) {
             RelationParamNodes pn = nodes_with_override(t, params, -1, nullptr);
             RelationOutput r_t = relation_forward(
                 t, pn, t.constant(batch.teacher_zi), t.constant(batch.teacher_zm));
             RelationOutput r_s =
                 relation_forward(t, pn, t.constant(batch.student_zi), x);
             return loss_d(t, r_t, r_s);
         },
         batch.student_zm);

    Tensor logits({cfg.batch, cfg.masks});
    CounterRng logit_rng(seed, 0x6C6F6769); // "logi"
    for (double& v : logits.data()) v = logit_rng.normal();
    push("structure_loss/logits",
         [&](ad::Tape& t, ad::Node* x) {
             return toy_structure_loss(t, x, batch.target);
         },
         logits);

    for (int slot = 0; slot < 2; ++slot) {
        std::string name = slot == 0 ? "a_down" : "a_up";
        push("loss_total/" + name,
             [&, slot](ad::Tape& t, ad::Node* x) {
                 RelationParamNodes pn = nodes_with_override(t, params, -1, nullptr);
                 ad::Node* nd_down =
                     slot == 0 ? x : t.constant(adapter.a_down);
                 ad::Node* nd_up = slot == 1 ? x : t.constant(adapter.a_up);
                 ad::Node* s_zi =
                     apply_adapter(t, t.constant(batch.student_zi), nd_down, nd_up);
                 ad::Node* s_zm =
                     apply_adapter(t, t.constant(batch.student_zm), nd_down, nd_up);
                 ad::Node* logits_n = task_logits(t, s_zm, t.constant(probe_col));
                 ad::Node* l_task = t.scale(
                     toy_structure_loss(t, logits_n, batch.target), cfg.task_weight);
                 RelationOutput r_t = relation_forward(
                     t, pn, t.constant(batch.teacher_zi), t.constant(batch.teacher_zm));
                 RelationOutput r_s = relation_forward(t, pn, s_zi, s_zm);
                 ad::Node* l_r_n = loss_r(t, batch.teacher_zi, batch.teacher_zm, r_t);
                 ad::Node* l_d_n = loss_d(t, r_t, r_s);
                 return t.add(l_task, loss_info(t, l_r_n, l_d_n, cfg.weights));
             },
             slot == 0 ? adapter.a_down : adapter.a_up);
    }

    return report;
}

} // namespace infogram
