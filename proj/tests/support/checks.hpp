#pragma once

// Property and oracle suites shared by the unit tests and the acceptance
// binary.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "omnilab/numcore/graph.hpp"
#include "omnilab/numcore/rng.hpp"

namespace omnilab::checks {

using DVar = num::BasicVar<double>;
using DTensor = num::BasicTensor<double>;
using DGraph = num::BasicGraph<double>;

/// Builds an output from graph leaves bound to the probe inputs.
using Probe = std::function<DVar(DGraph&, std::span<const DVar>)>;

/// Gradient of sum(f(inputs) * R), R a fixed random weighting, checked
/// against central differences with step `h` on every input element.
/// Per input the error is max|analytic - numeric| / max|numeric| (the
/// max-norm relative error); the largest over inputs is returned.
double fd_relative_error(std::vector<DTensor> inputs, const Probe& f, num::SeededStream& rng,
                         double h = 1e-3);

struct GradResult {
  std::string name;
  int instances = 0;
  double max_rel_error = 0.0;
};

/// Every differentiable op on `instances` seeded random problems each.
std::vector<GradResult> op_gradient_suite(int instances, std::uint64_t seed);

/// Full decoder (2 layers, dim 16) in double precision, cycling through
/// schemes, the index embedding and both training modes. Parameters are
/// randomised first so that the zero-initialised gates pass gradient.
/// Each parameter tensor is checked on `samples_per_tensor` random
/// elements against the max-norm of its analytic gradient.
GradResult model_gradient_suite(int instances, std::uint64_t seed, int samples_per_tensor = 6);

struct RopeReport {
  int cases = 0;
  int identity_failures = 0;
  double max_norm_error = 0.0;         // relative
  double max_translation_error = 0.0;  // absolute, unit-norm q and k
  int spatial_mismatches = 0;          // omni_rope row/col operator differences
  int operator_mismatches = 0;         // equal PosId3, different operator
};

RopeReport rope_property_suite(int cases, std::uint64_t seed);

struct FlowReport {
  int draws = 0;
  int invariant_violations = 0;
  double max_one_step_ulps = 0.0;  // one Euler step with the exact velocity
};

FlowReport flow_property_suite(int draws, std::uint64_t seed);

struct PairminerReport {
  int true_cuts = 0;
  int detected_cuts = 0;
  int correct_cuts = 0;
  int fade_false_cuts = 0;
  int jitter_false_cuts = 0;
  int pans = 0;
  int pans_rejected = 0;
  int edits = 0;
  int edits_accepted = 0;
  bool symmetric = true;
  bool self_similar = true;

  double precision() const { return detected_cuts ? double(correct_cuts) / detected_cuts : 1.0; }
  double recall() const { return true_cuts ? double(correct_cuts) / true_cuts : 1.0; }
};

PairminerReport pairminer_suite(std::uint64_t seed);

}  // namespace omnilab::checks
