#pragma once

#include <stdexcept>

namespace reclink {

// Bad input: malformed files, schema/arity mismatches, invalid configuration.
class ValidationError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

class SchemaError : public ValidationError {
 public:
    using ValidationError::ValidationError;
};

// A configured resource limit (memory cap, unwritable output) was hit.
class ResourceError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

class NumericalError : public std::runtime_error {
 public:
    using std::runtime_error::runtime_error;
};

}  // namespace reclink
