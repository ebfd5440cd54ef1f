#pragma once

#include <stdexcept>
#include <string>

namespace hazerf {

/// Raised for violated preconditions, malformed inputs and IO failures.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace hazerf
