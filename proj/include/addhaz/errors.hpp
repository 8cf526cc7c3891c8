#pragma once

#include <stdexcept>
#include <string>

namespace addhaz {

// Dimension disagreement between a layer, an operand, or a batch.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A caller broke an operation's precondition (wrong model kind, non-scalar
// backward root, unsorted grid, ...).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid configuration: hyperparameters, pair sets, CLI flags.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Ingestion or dataset-invariant violation.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite loss or gradient during optimisation.
class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An estimator or metric is undefined on its input (no events, no
// comparable pairs).
class EstimatorError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace addhaz
