#pragma once

#include <stdexcept>
#include <string>

namespace biaslens {

// Error taxonomy. Every subclass maps to one failure family so callers
// (and the CLI exit-code logic) can distinguish bad input from bad state.

class Error : public std::runtime_error {
public:
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Unreadable / unwritable files.
class IoError : public Error {
public:
    explicit IoError(const std::string& msg) : Error(msg) {}
};

// File parses but violates a supported-format contract (alpha channel,
// 16-bit depth, palette, bad magic). The message names the offending property.
class FormatError : public Error {
public:
    explicit FormatError(const std::string& msg) : Error(msg) {}
};

// Rectangle or index outside the image.
class BoundsError : public Error {
public:
    explicit BoundsError(const std::string& msg) : Error(msg) {}
};

// A parameter violates its declared invariant (even median window,
// empty compose list, strength outside [0,1], ...).
class ParameterError : public Error {
public:
    explicit ParameterError(const std::string& msg) : Error(msg) {}
};

// Input too small / empty for the requested operation.
class DegenerateInputError : public Error {
public:
    explicit DegenerateInputError(const std::string& msg) : Error(msg) {}
};

// Tensor shape disagreement inside the network; names the layer.
class ShapeError : public Error {
public:
    explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Dataset-level contract violations (missing class in train split, ...).
class DatasetError : public Error {
public:
    explicit DatasetError(const std::string& msg) : Error(msg) {}
};

// Non-finite loss or gradient; carries epoch/batch context in the message.
class NumericalError : public Error {
public:
    explicit NumericalError(const std::string& msg) : Error(msg) {}
};

}  // namespace biaslens
