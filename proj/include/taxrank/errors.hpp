#pragma once

#include <stdexcept>
#include <string>

namespace taxrank {

// Bad domain data: broken invariants, malformed tables, out-of-range fields.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Unusable run configuration or missing referenced files.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Prompt template rendering failure (unresolved placeholder, missing section).
class RenderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Candidate generation failure (transport, auth, short return, fixture exhaustion).
class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace taxrank
