#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace polytuplet {

struct GradcheckOptions {
  std::uint64_t seed = 0;
  std::size_t trials = 100;
  double tolerance = 1e-4;
  double step = 1e-5;
};

// Worst relative error |analytic - numeric| / (|analytic| + |numeric|) (vector
// norms, one value per trial) over all trials of one component. Coordinates
// whose finite-difference stencil crosses a hinge or ReLU kink are skipped and
// counted.
struct GradcheckComponent {
  std::string name;
  double max_rel_error = 0.0;
  std::size_t trials = 0;
  std::size_t skipped = 0;
  bool passed = false;
};

// Central finite differences against the analytic gradients of the sphere
// projection, triplet, polytuplet, cross-entropy and hybrid losses, and the
// full encoder backward pass. Trials alternate d in {2, 64} and h in {4, 32}.
std::vector<GradcheckComponent> run_gradcheck(const GradcheckOptions& options);

}  // namespace polytuplet
