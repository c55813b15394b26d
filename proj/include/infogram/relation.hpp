#pragma once

#include <array>
#include <cstdint>
#include <string>

#include "infogram/autodiff.hpp"
#include "infogram/tensor.hpp"

namespace infogram {

/// Shared weights of the relation head: two projections with biases plus
/// per-branch layer-norm affine terms, all of width dim.
struct RelationParams {
    Tensor w_q, b_q, w_k, b_k;
    Tensor ln_m_gain, ln_m_bias, ln_i_gain, ln_i_bias;
    std::size_t dim = 0;
    std::uint64_t seed = 0;
};

inline constexpr std::array<const char*, 8> kRelationFieldNames = {
    "w_q", "b_q", "w_k", "b_k",
    "ln_m_gain", "ln_m_bias", "ln_i_gain", "ln_i_bias"};

std::array<Tensor*, 8> relation_fields(RelationParams& p);
std::array<const Tensor*, 8> relation_fields(const RelationParams& p);

/// Projection weights uniform on +-sqrt(6 / (2 dim)), biases zero, norm
/// gains one.  Identical (dim, seed) pairs produce identical parameters.
RelationParams init_params(std::size_t dim, std::uint64_t seed);

/// One NPY file per field plus a manifest.json naming them.
void save_params(const RelationParams& p, const std::string& dir);
RelationParams load_params(const std::string& dir);

struct RelationParamNodes {
    ad::Node* w_q = nullptr;
    ad::Node* b_q = nullptr;
    ad::Node* w_k = nullptr;
    ad::Node* b_k = nullptr;
    ad::Node* ln_m_gain = nullptr;
    ad::Node* ln_m_bias = nullptr;
    ad::Node* ln_i_gain = nullptr;
    ad::Node* ln_i_bias = nullptr;
};

std::array<ad::Node**, 8> relation_node_fields(RelationParamNodes& p);

RelationParamNodes make_param_nodes(ad::Tape& tape, const RelationParams& p,
                                    bool requires_grad);

/// Relation map of one forward pass: unit rows, one per batch sample.
struct RelationOutput {
    ad::Node* r = nullptr;    // [batch, masks * positions]
    std::size_t batch = 0;
    std::size_t masks = 0;
    std::size_t positions = 0;

    const Tensor& value() const { return r->value; }
};

/// Scores are scaled query-key products of layer-normed inputs plus a raw
/// bilinear residual; each sample's score map is flattened and scaled to
/// unit norm.  z_i is [B, P, D], z_m is [B, N, D].
RelationOutput relation_forward(ad::Tape& tape, const RelationParamNodes& params,
                                ad::Node* z_i, ad::Node* z_m);

/// Convenience evaluation on a throwaway tape.
Tensor relation_forward_value(const RelationParams& params, const Tensor& z_i,
                              const Tensor& z_m);

} // namespace infogram
