#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fddb {

struct GradcheckOptions {
  double tolerance = 1e-4;
  std::uint64_t seed = 0;
  int instances = 50;             // random input draws per operation
  int coords_per_input = 32;      // finite-difference coordinates per input tensor
  double step = 1e-5;             // central-difference step
};

struct GradcheckEntry {
  std::string op;
  double max_rel_error = 0.0;
  std::int64_t coordinates = 0;  // finite-difference coordinates checked
  bool passed = false;
};

struct GradcheckReport {
  double tolerance = 0.0;
  std::vector<GradcheckEntry> entries;
  bool passed() const;
};

/// Names of the checked operations, in report order.
const std::vector<std::string>& gradcheck_ops();

/// Compares autograd against central differences in double precision for every
/// imaging operator, the chain, the parameter mapping, the frequency split
/// and every loss term. Tensor-valued outputs are reduced with fixed random
/// weights. Per instance the error is max|a - n| / max(max|a|, max|n|, 1e-12)
/// over the checked coordinates.
GradcheckReport run_gradcheck(const GradcheckOptions& opts);

/// Same, restricted to one named operation.
GradcheckEntry run_gradcheck_op(const std::string& op, const GradcheckOptions& opts);

}  // namespace fddb
