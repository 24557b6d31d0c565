#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pdl/tensor.hpp"

namespace pdl {

using ScalarFn = std::function<Tensor(const Tensor&)>;
using MultiScalarFn = std::function<Tensor(std::span<const Tensor>)>;

/// Compares backward() against central differences (f(x+h·eᵢ) − f(x−h·eᵢ))/2h
/// and returns the largest relative error, with denominator
/// max(|a|, |b|, 1e-8). `h` must lie in [1e-7, 1e-3].
double finite_diff_check(const ScalarFn& f, const Tensor& x, double h = 1e-5);
double finite_diff_check(const MultiScalarFn& f, std::span<const Tensor> inputs, double h = 1e-5);

struct GradCheckResult {
  std::string name;
  std::uint64_t seed = 0;
  double max_rel_error = 0.0;
};

/// Names of every check run_gradient_suite performs.
std::vector<std::string> gradient_check_names();

/// Runs every op and every loss pipeline on random small instances, one
/// result per (check, seed). Seeds are base_seed, base_seed+1, ...
std::vector<GradCheckResult> run_gradient_suite(std::uint64_t base_seed, int num_seeds,
                                                double h = 1e-5);

}  // namespace pdl
