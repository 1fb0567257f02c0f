#pragma once

#include <stdexcept>
#include <string>

namespace dso {

/// Raised when a forward pass or loss evaluation produced a non-finite value.
/// The training loop catches this and returns the trajectory collected so far.
class DivergedError : public std::runtime_error {
public:
    explicit DivergedError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace dso
