#pragma once

#include <stdexcept>
#include <string>

namespace edbench {

// Input data does not satisfy a contract (bad sizes, invalid ids, ...).
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed serialized data (JSON, checkpoint files).
class FormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Editor refused the edit (e.g. degenerate key direction).
class EditError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

} // namespace edbench
