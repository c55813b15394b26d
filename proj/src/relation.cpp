#include "infogram/relation.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>

#include "json.hpp"

#include "infogram/error.hpp"
#include "infogram/rng.hpp"

namespace infogram {

std::array<Tensor*, 8> relation_fields(RelationParams& p) {
    return {&p.w_q, &p.b_q, &p.w_k, &p.b_k,
            &p.ln_m_gain, &p.ln_m_bias, &p.ln_i_gain, &p.ln_i_bias};
}

std::array<const Tensor*, 8> relation_fields(const RelationParams& p) {
    return {&p.w_q, &p.b_q, &p.w_k, &p.b_k,
            &p.ln_m_gain, &p.ln_m_bias, &p.ln_i_gain, &p.ln_i_bias};
}

RelationParams init_params(std::size_t dim, std::uint64_t seed) {
    if (dim == 0) throw ContractError("init_params: dim must be positive");
    RelationParams p;
    p.dim = dim;
    p.seed = seed;

    CounterRng rng(seed, kStreamRelationInit);
    double bound = std::sqrt(6.0 / (2.0 * static_cast<double>(dim)));
    auto draw_matrix = [&]() {
        Tensor w({dim, dim});
        for (double& v : w.data()) v = rng.uniform(-bound, bound);
        return w;
    };
    p.w_q = draw_matrix();
    p.w_k = draw_matrix();
    p.b_q = Tensor({dim});
    p.b_k = Tensor({dim});
    p.ln_m_gain = Tensor({dim});
    p.ln_i_gain = Tensor({dim});
    for (double& v : p.ln_m_gain.data()) v = 1.0;
    for (double& v : p.ln_i_gain.data()) v = 1.0;
    p.ln_m_bias = Tensor({dim});
    p.ln_i_bias = Tensor({dim});
    return p;
}

void save_params(const RelationParams& p, const std::string& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("save_params: cannot create " + dir);

    nlohmann::json fields = nlohmann::json::object();
    auto tensors = relation_fields(p);
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        std::string file = std::string(kRelationFieldNames[i]) + ".npy";
        save_tensor(*tensors[i], dir + "/" + file);
        fields[kRelationFieldNames[i]] = file;
    }
    nlohmann::json manifest{{"dim", p.dim}, {"seed", p.seed}, {"fields", fields}};

    std::ofstream out(dir + "/manifest.json");
    if (!out) throw IoError("save_params: cannot write manifest in " + dir);
    out << manifest.dump(2) << "\n";
}

RelationParams load_params(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw IoError("load_params: cannot open manifest in " + dir);
    nlohmann::json manifest;
    try {
        in >> manifest;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("load_params: bad manifest: ") + e.what());
    }

    RelationParams p;
    try {
        p.dim = manifest.at("dim").get<std::size_t>();
        p.seed = manifest.at("seed").get<std::uint64_t>();
        auto tensors = relation_fields(p);
        for (std::size_t i = 0; i < tensors.size(); ++i) {
            std::string file = manifest.at("fields").at(kRelationFieldNames[i]);
            *tensors[i] = load_tensor(dir + "/" + file);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("load_params: bad manifest: ") + e.what());
    }

    for (const Tensor* w : {&p.w_q, &p.w_k})
        if (w->rank() != 2 || w->shape()[0] != p.dim || w->shape()[1] != p.dim)
            throw FormatError("load_params: projection shape does not match dim");
    for (const Tensor* v : {&p.b_q, &p.b_k, &p.ln_m_gain, &p.ln_m_bias,
                            &p.ln_i_gain, &p.ln_i_bias})
        if (v->rank() != 1 || v->shape()[0] != p.dim)
            throw FormatError("load_params: vector shape does not match dim");
    return p;
}

std::array<ad::Node**, 8> relation_node_fields(RelationParamNodes& p) {
    return {&p.w_q, &p.b_q, &p.w_k, &p.b_k,
            &p.ln_m_gain, &p.ln_m_bias, &p.ln_i_gain, &p.ln_i_bias};
}

RelationParamNodes make_param_nodes(ad::Tape& tape, const RelationParams& p,
                                    bool requires_grad) {
    RelationParamNodes n;
    auto tensors = relation_fields(p);
    auto slots = relation_node_fields(n);
    for (std::size_t i = 0; i < tensors.size(); ++i)
        *slots[i] = tape.leaf(*tensors[i], requires_grad);
    return n;
}

RelationOutput relation_forward(ad::Tape& tape, const RelationParamNodes& params,
                                ad::Node* z_i, ad::Node* z_m) {
    const Tensor& zi = z_i->value;
    const Tensor& zm = z_m->value;
    if (zi.rank() != 3 || zm.rank() != 3)
        throw ShapeError("relation_forward: inputs must be [B, rows, D]");
    std::size_t b = zm.shape()[0], n = zm.shape()[1], d = zm.shape()[2];
    std::size_t p = zi.shape()[1];
    if (zi.shape()[0] != b)
        throw ShapeError("relation_forward: batch sizes differ");
    if (zi.shape()[2] != d)
        throw ShapeError("relation_forward: feature widths differ");
    if (params.w_q->value.shape()[0] != d)
        throw ShapeError("relation_forward: parameter width " +
                         std::to_string(params.w_q->value.shape()[0]) +
                         " does not match features of width " + std::to_string(d));

    auto project = [&](ad::Node* z, std::size_t rows, ad::Node* gain, ad::Node* bias,
                       ad::Node* w, ad::Node* wb) {
        ad::Node* flat = tape.reshape(z, {b * rows, d});
        ad::Node* normed = tape.layernorm(flat, gain, bias);
        ad::Node* proj = tape.add(tape.matmul(normed, tape.transpose(w)), wb);
        return tape.reshape(proj, {b, rows, d});
    };
    ad::Node* q = project(z_m, n, params.ln_m_gain, params.ln_m_bias, params.w_q, params.b_q);
    ad::Node* k = project(z_i, p, params.ln_i_gain, params.ln_i_bias, params.w_k, params.b_k);

    ad::Node* attn = tape.scale(tape.bmm(q, k), 1.0 / std::sqrt(static_cast<double>(d)));
    ad::Node* residual = tape.bmm(z_m, z_i); // raw inputs, not the normed ones
    ad::Node* scores = tape.add(attn, residual);
    ad::Node* r = tape.l2norm_rows(tape.reshape(scores, {b, n * p}));
    return {r, b, n, p};
}

Tensor relation_forward_value(const RelationParams& params, const Tensor& z_i,
                              const Tensor& z_m) {
    ad::Tape tape;
    RelationParamNodes nodes = make_param_nodes(tape, params, false);
    RelationOutput out =
        relation_forward(tape, nodes, tape.constant(z_i), tape.constant(z_m));
    return out.value();
}

} // namespace infogram
