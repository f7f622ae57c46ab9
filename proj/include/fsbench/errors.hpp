#pragma once

#include <stdexcept>
#include <string>

namespace fsbench {

// Argument validation failures use std::invalid_argument directly. The types
// below mark the failure modes callers are expected to handle separately.

// Non-finite loss or parameters during network training.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A metric that is not defined for the given input (e.g. AUROC with one class).
class UndefinedMetric : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// A generator could not produce a valid dataset within its retry budget.
class GenerationFailed : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fsbench
