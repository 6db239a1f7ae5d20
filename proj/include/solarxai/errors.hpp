#pragma once

#include <stdexcept>
#include <string>

namespace solarxai {

// Exit-code classes used by the command-line tool: usage errors map to 2,
// data errors to 3, numeric failures to 4.
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class NumericError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace solarxai
