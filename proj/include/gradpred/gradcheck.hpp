#pragma once

#include <span>

#include "gradpred/model.hpp"
#include "gradpred/tensor.hpp"

namespace gradpred {

// Central-difference gradient check over every parameter of `model` on one
// (batch, labels) pair. Returns max over parameters of
//   |analytic - central| / max(1, |central|).
// The reference side uses only forward passes, so it stays independent of
// the backward implementation it is checking.
double finite_diff_check(Model& model, const Tensor& batch,
                         std::span<const int> labels, double epsilon);

}  // namespace gradpred
