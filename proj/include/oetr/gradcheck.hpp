#pragma once

#include <functional>
#include <string>
#include <vector>

#include "oetr/graph.hpp"

// Central-difference verification of the reverse-mode gradients. Runs in
// 64-bit mode; relative error uses denominator max(|analytic|, |numeric|,
// 1e-8).
namespace oetr::gradcheck {

struct Report {
    std::string op;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool finite = true;
    std::size_t coords_checked = 0;
    bool pass() const { return finite && max_rel_err < tolerance; }
};

// Builds a scalar-valued computation from leaves; called repeatedly with
// perturbed inputs.
using BuildFn = std::function<Value(Graph<double>&, const std::vector<Value>&)>;

// coords_per_input < 0 checks every coordinate; otherwise a deterministic
// random subset of that size per input tensor (used for the end-to-end model
// check where exhaustive differencing is infeasible).
Report check(const std::string& name, const BuildFn& build, std::vector<Tensor<double>> inputs,
             double tolerance, double eps = 1e-5, int coords_per_input = -1,
             std::uint64_t seed = 0x9E3779B97F4A7C15ull);

// The standard per-op suite (everything except the end-to-end model loss,
// which lives with the model code). All ops are expected under 1e-6.
std::vector<Report> standard_suite(std::uint64_t seed = 42);

}  // namespace oetr::gradcheck
