#pragma once

#include "tlfea/model.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace tlfea {

struct VerifyCheck {
  std::string name;
  bool passed = false;
  /// Worst observed error against the tolerance, human readable.
  std::string detail;
};

/// Finite-difference and invariant self-checks on the materials and element kinds present in a
/// model: stress vs energy, tangent vs internal force, rigid-motion invariance, partition of unity.
/// Deterministic for a given seed.
std::vector<VerifyCheck> verify_model(const Model& model, std::uint64_t seed = 20240607);

}  // namespace tlfea
