#include "infogram/losses.hpp"

#include <cmath>

#include "json.hpp"

#include "infogram/error.hpp"
#include "infogram/gram.hpp"

namespace infogram {

void validate(const LossWeights& w) {
    if (!std::isfinite(w.lambda1) || !std::isfinite(w.lambda2) ||
        w.lambda1 < 0.0 || w.lambda2 < 0.0)
        throw ContractError("loss weights must be finite and non-negative");
}

namespace {

// log2 ||trace_normalize(raw)||_F^2 as a graph node.
ad::Node* log2_frob_unit_trace(ad::Tape& tape, ad::Node* raw) {
    return tape.log2_scalar(tape.frobenius_sq(tape.trace_normalize(raw)));
}

// Unit-trace Gram of a feature tensor, computed outside the tape.
Tensor feature_gram(const Tensor& z) {
    return trace_normalize(linear_gram(l2_normalize_rows(flatten_batch(z)))).entries;
}

} // namespace

ad::Node* loss_r(ad::Tape& tape, const Tensor& z_i, const Tensor& z_m,
                 const RelationOutput& r) {
    std::size_t b = r.batch;
    if (b < 2) throw ContractError("loss_r: need a batch of at least 2");
    if (z_i.rank() < 2 || z_m.rank() < 2 || z_i.shape()[0] != b || z_m.shape()[0] != b)
        throw ShapeError("loss_r: feature batch sizes do not match the relation map");

    Tensor gi = feature_gram(z_i);
    Tensor gm = feature_gram(z_m);
    Tensor gim = gi;
    for (std::size_t k = 0; k < gim.numel(); ++k) gim[k] *= gm[k];

    ad::Node* g_r = tape.matmul(r.r, tape.transpose(r.r));
    ad::Node* marginal = log2_frob_unit_trace(tape, g_r);
    ad::Node* joint = log2_frob_unit_trace(tape, tape.hadamard(tape.constant(gim), g_r));
    return tape.add(tape.scale(marginal, -1.0), joint);
}

ad::Node* loss_d(ad::Tape& tape, const RelationOutput& a, const RelationOutput& b) {
    if (a.batch != b.batch)
        throw ShapeError("loss_d: batch sizes " + std::to_string(a.batch) + " and " +
                         std::to_string(b.batch) + " differ");
    if (a.batch < 2) throw ContractError("loss_d: need a batch of at least 2");

    ad::Node* g_a = tape.matmul(a.r, tape.transpose(a.r));
    ad::Node* g_b = tape.matmul(b.r, tape.transpose(b.r));
    ad::Node* joint = log2_frob_unit_trace(tape, tape.hadamard(g_a, g_b));
    ad::Node* sum = tape.add(log2_frob_unit_trace(tape, g_a),
                             log2_frob_unit_trace(tape, g_b));
    return tape.add(sum, tape.scale(joint, -1.0));
}

ad::Node* loss_info(ad::Tape& tape, ad::Node* l_r, ad::Node* l_d, const LossWeights& w) {
    validate(w);
    return tape.add(tape.scale(l_r, w.lambda1), tape.scale(l_d, w.lambda2));
}

ad::Node* toy_structure_loss(ad::Tape& tape, ad::Node* logits, const Tensor& target) {
    return tape.structure_loss(logits, tape.constant(target));
}

std::string LossBreakdown::to_json() const {
    nlohmann::json j{{"l_r", l_r},     {"l_d", l_d},         {"l_task", l_task},
                     {"l_info", l_info}, {"l_total", l_total}, {"lambda1", lambda1},
                     {"lambda2", lambda2}};
    return j.dump();
}

LossBreakdown make_breakdown(double l_r, double l_d, double l_task,
                             const LossWeights& w) {
    validate(w);
    LossBreakdown b;
    b.l_r = l_r;
    b.l_d = l_d;
    b.l_task = l_task;
    b.l_info = w.lambda1 * l_r + w.lambda2 * l_d;
    b.l_total = l_task + b.l_info;
    b.lambda1 = w.lambda1;
    b.lambda2 = w.lambda2;
    return b;
}

} // namespace infogram
