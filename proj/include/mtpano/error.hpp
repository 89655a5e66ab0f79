#pragma once

#include <stdexcept>
#include <string>

namespace mtpano {

// Input outside the mathematical domain of an operation (e.g. pixel index out of range).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller violated an operation contract (channel/task mismatch, shape mismatch).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Invalid configuration value (empty range, negative weight, empty pool category).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed on-disk artifact; message carries line/field context.
class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Data inconsistent with declared metadata (class index >= n_classes, ...).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mtpano
