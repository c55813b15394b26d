#pragma once

#include <string>

#include "infogram/autodiff.hpp"
#include "infogram/relation.hpp"

namespace infogram {

struct LossWeights {
    double lambda1 = 1.0;
    double lambda2 = 0.5;
};

/// Throws ContractError unless both weights are finite and non-negative.
void validate(const LossWeights& w);

/// Relation-compression term: -log2 ||G_r||_F^2 + log2 ||G_imr||_F^2 over
/// unit-trace Grams, where G_r comes from the relation rows and G_imr is
/// the normalized elementwise product of the two feature Grams with G_r.
/// Differentiable through r; the feature tensors enter as constants.
ad::Node* loss_r(ad::Tape& tape, const Tensor& z_i, const Tensor& z_m,
                 const RelationOutput& r);

/// Alignment term between two relation maps over the same batch:
/// log2 ||G^a||_F^2 + log2 ||G^b||_F^2 - log2 ||G^ab||_F^2, all unit-trace.
/// Equal to minus the order-2 mutual information of the two maps.
ad::Node* loss_d(ad::Tape& tape, const RelationOutput& a, const RelationOutput& b);

/// lambda1 * l_r + lambda2 * l_d.
ad::Node* loss_info(ad::Tape& tape, ad::Node* l_r, ad::Node* l_d, const LossWeights& w);

/// Binary cross-entropy of sigmoid(logits) plus a smoothed overlap penalty;
/// target entries must be exactly 0 or 1.
ad::Node* toy_structure_loss(ad::Tape& tape, ad::Node* logits, const Tensor& target);

struct LossBreakdown {
    double l_r = 0.0;
    double l_d = 0.0;
    double l_task = 0.0;
    double l_info = 0.0;
    double l_total = 0.0;
    double lambda1 = 1.0;
    double lambda2 = 0.5;

    std::string to_json() const;
};

LossBreakdown make_breakdown(double l_r, double l_d, double l_task,
                             const LossWeights& w);

} // namespace infogram
